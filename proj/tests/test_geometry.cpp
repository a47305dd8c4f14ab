#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rflab/flow.hpp"

#include <cmath>
#include <random>

using namespace rflab;

TEST_CASE("flat torus: curvature, volume, axis distance") {
  FlowHistory h = make_flat_torus(2, 3.0, 16, 1.0, 8);
  const MetricSlice& slice = h.final_slice();

  Field R = scalar_curvature(slice);
  for (double r : R) CHECK(r == 0.0);
  CHECK(total_volume(slice) == doctest::Approx(9.0).epsilon(1e-12));

  FlowHistory h1 = make_flat_torus(1, 4.0, 32, 1.0, 8);
  const MetricSlice& s1 = h1.final_slice();
  PointSet a{{0}, 0.0}, b{{16}, 0.0};  // antipodal on the circle
  CHECK(geodesic_distance(s1, a, b) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(geodesic_distance(s1, a, a) == 0.0);
}

TEST_CASE("flat torus rejects bad parameters") {
  CHECK_THROWS(make_flat_torus(4, 1.0, 16));
  CHECK_THROWS(make_flat_torus(2, 1.0, 4));
  CHECK_THROWS(make_flat_torus(2, -1.0, 16));
}

TEST_CASE("laplacian: constants and Fourier modes on the flat torus") {
  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 32, 1.0, 8);
  const MetricSlice& slice = h.final_slice();
  const Mesh& m = *h.mesh;

  Field c(m.num_nodes(), 3.7);
  for (double v : laplace_beltrami(slice, c)) CHECK(std::abs(v) < 1e-12);

  // sin(x) is an eigenfunction of the centered stencil with the discrete
  // eigenvalue 4 sin^2(h/2) / h^2.
  Field f(m.num_nodes());
  for (std::int64_t i = 0; i < m.num_nodes(); ++i) f[i] = std::sin(m.coord(i, 0));
  double hgrid = m.spacing(0);
  double lam = 4.0 * std::pow(std::sin(hgrid / 2), 2) / (hgrid * hgrid);
  Field lap = laplace_beltrami(slice, f);
  for (std::int64_t i = 0; i < m.num_nodes(); ++i)
    CHECK(lap[i] == doctest::Approx(-lam * f[i]).epsilon(1e-10));
  CHECK(lam == doctest::Approx(1.0).epsilon(5e-3));  // h^2/12 dispersion
}

TEST_CASE("conformal curvature matches its linearization") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 64);
  double eps = 1e-3;
  Field u(mesh->num_nodes());
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
    u[i] = eps * std::sin(mesh->coord(i, 0));
  MetricSlice slice = MetricSlice::conformal(mesh, 0.0, u);
  Field R = scalar_curvature(slice);
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i) {
    double lin = 2.0 * eps * std::sin(mesh->coord(i, 0));
    CHECK(std::abs(R[i] - lin) < 1e-5);
  }
}

TEST_CASE("conformal laplacian agrees with dense assembly on a small grid") {
  auto mesh = Mesh::periodic_box(2, 2.0, 12);
  std::mt19937_64 rng(7);
  auto uniform = [&] { return (rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5; };
  Field u(mesh->num_nodes()), phi(mesh->num_nodes());
  for (auto& x : u) x = 0.3 * uniform();
  for (auto& x : phi) x = uniform();
  MetricSlice slice = MetricSlice::conformal(mesh, 0.0, u);
  Field got = laplace_beltrami(slice, phi);
  Field want = oracle::dense_conformal_laplacian_apply(*mesh, u, phi);
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("discrete self-adjointness of the laplacian against the volume form") {
  auto mesh = Mesh::periodic_box(2, 1.5, 16);
  std::mt19937_64 rng(11);
  auto uniform = [&] { return (rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5; };
  Field u(mesh->num_nodes()), phi(mesh->num_nodes()), psi(mesh->num_nodes());
  for (auto& x : u) x = 0.2 * uniform();
  for (auto& x : phi) x = uniform();
  for (auto& x : psi) x = uniform();
  MetricSlice slice = MetricSlice::conformal(mesh, 0.0, u);
  Field v = volume_weights(slice);
  Field lap_phi = laplace_beltrami(slice, phi);
  Field lap_psi = laplace_beltrami(slice, psi);
  double a = 0.0, b = 0.0;
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i) {
    a += psi[i] * lap_phi[i] * v[i];
    b += phi[i] * lap_psi[i] * v[i];
  }
  CHECK(a == doctest::Approx(b).epsilon(1e-12));

  // Sphere backend.
  auto smesh = Mesh::sphere(32, 1.0);
  MetricSlice sph = MetricSlice::sphere(smesh, 0.0, 1.0);
  Field f1(smesh->num_nodes()), f2(smesh->num_nodes());
  for (auto& x : f1) x = uniform();
  for (auto& x : f2) x = uniform();
  Field w = volume_weights(sph);
  Field l1 = laplace_beltrami(sph, f1);
  Field l2 = laplace_beltrami(sph, f2);
  double sa = 0.0, sb = 0.0;
  for (std::int64_t i = 0; i < smesh->num_nodes(); ++i) {
    sa += f2[i] * l1[i] * w[i];
    sb += f1[i] * l2[i] * w[i];
  }
  CHECK(sa == doctest::Approx(sb).epsilon(1e-9));
}

TEST_CASE("gauss-bonnet: 8 pi on the sphere, 0 on the torus") {
  auto smesh = Mesh::sphere(48, 2.0);
  MetricSlice sph = MetricSlice::sphere(smesh, 0.0, 2.0);
  CHECK(integrate(sph, scalar_curvature(sph)) == doctest::Approx(8.0 * M_PI).epsilon(1e-12));

  auto mesh = Mesh::periodic_box(2, 2.0, 24);
  std::mt19937_64 rng(3);
  auto uniform = [&] { return (rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5; };
  Field u(mesh->num_nodes());
  for (auto& x : u) x = 0.3 * uniform();
  MetricSlice slice = MetricSlice::conformal(mesh, 0.0, u);
  CHECK(std::abs(integrate(slice, scalar_curvature(slice))) < 1e-10);
}

TEST_CASE("sphere laplacian is spectrally exact on zonal harmonics") {
  auto smesh = Mesh::sphere(32, 1.5);
  MetricSlice sph = MetricSlice::sphere(smesh, 0.0, 1.5);
  // P_3(mu) has eigenvalue -12 / r^2.
  Field f(smesh->num_nodes());
  for (std::int64_t i = 0; i < smesh->num_nodes(); ++i) {
    double mu = smesh->gl_mu[i];
    f[i] = 0.5 * (5.0 * mu * mu * mu - 3.0 * mu);
  }
  Field lap = laplace_beltrami(sph, f);
  for (std::int64_t i = 0; i < smesh->num_nodes(); ++i)
    CHECK(lap[i] == doctest::Approx(-12.0 / (1.5 * 1.5) * f[i]).epsilon(1e-10));
}

TEST_CASE("geodesic distance: symmetry, triangle inequality, conformal scaling") {
  auto mesh = Mesh::periodic_box(2, 2.0, 24);
  Field u(mesh->num_nodes(), 0.4);  // constant conformal factor
  MetricSlice conf = MetricSlice::conformal(mesh, 0.0, u);
  MetricSlice flat = MetricSlice::flat(mesh, 0.0);

  PointSet p[3] = {{{10}, 0.0}, {{200}, 0.0}, {{413}, 0.0}};
  double d01f = geodesic_distance(flat, p[0], p[1]);
  double d01c = geodesic_distance(conf, p[0], p[1]);
  CHECK(d01c == doctest::Approx(std::exp(0.4) * d01f).epsilon(1e-10));

  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dij = geodesic_distance(flat, p[i], p[j]);
      double dji = geodesic_distance(flat, p[j], p[i]);
      CHECK(dij == doctest::Approx(dji).epsilon(1e-12));
      for (int k = 0; k < 3; ++k) {
        double dik = geodesic_distance(flat, p[i], p[k]);
        double dkj = geodesic_distance(flat, p[k], p[j]);
        CHECK(dij <= dik + dkj + 1e-12);
      }
    }

  // Axis-aligned distances are exact; the worst stencil direction is bounded
  // by the documented anisotropy factor.
  auto c0 = mesh->coords_of(0);
  PointSet q{{mesh->node_at({c0[0] + 6, c0[1], 0})}, 0.0};
  PointSet o{{0}, 0.0};
  CHECK(geodesic_distance(flat, o, q) == doctest::Approx(6.0 * mesh->spacing(0)).epsilon(1e-12));
  CHECK(stencil_anisotropy(2) < 1.03);
}

TEST_CASE("ball volume on the flat torus approximates pi r^2") {
  auto mesh = Mesh::periodic_box(2, 4.0, 64);
  MetricSlice slice = MetricSlice::flat(mesh, 0.0);
  double r = 0.8;
  double vol = ball_volume(slice, mesh->center_node(), r);
  CHECK(vol == doctest::Approx(M_PI * r * r).epsilon(0.1));
}
