#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rflab/flow.hpp"

#include <cmath>
#include <complex>

using namespace rflab;

TEST_CASE("shrinking sphere matches the closed-form radius") {
  double r0 = 2.0, T = 1.5;
  FlowHistory h = make_shrinking_sphere(r0, T, 32, 64);
  for (std::size_t k = 0; k < h.num_slices(); ++k) {
    const MetricSlice& s = h.slices[k];
    CHECK(s.radius == doctest::Approx(oracle::sphere_radius(r0, h.times[k])).epsilon(1e-14));
    // Round-sphere identity R r^2 = 2 and area 4 pi r^2.
    Field R = scalar_curvature(s);
    CHECK(R.front() * s.radius * s.radius == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(total_volume(s) ==
          doctest::Approx(4.0 * M_PI * s.radius * s.radius).epsilon(1e-12));
  }
  CHECK(h.initial_slice().radius * h.initial_slice().radius -
            h.final_slice().radius * h.final_slice().radius ==
        doctest::Approx(2.0 * T).epsilon(1e-13));
}

TEST_CASE("shrinking sphere rejects parameters that hit the singular time") {
  CHECK_THROWS_AS(make_shrinking_sphere(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS(make_shrinking_sphere(-1.0, 0.1));
}

TEST_CASE("conformal flow: constant initial data is a fixed point") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 16);
  Field u0(mesh->num_nodes(), 0.37);
  FlowHistory h = evolve_conformal_torus(mesh, u0, 0.25);
  for (double v : h.final_slice().u) CHECK(v == 0.37);
}

TEST_CASE("conformal flow: single-mode decay matches the scalar heat ODE") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 64);
  double eps = 1e-3, T = 0.5;
  Field u0(mesh->num_nodes());
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
    u0[i] = eps * std::sin(mesh->coord(i, 0));
  FlowHistory h = evolve_conformal_torus(mesh, u0, T);

  // k = 1 amplitude of the terminal slice.
  std::complex<double> amp = 0.0;
  const Field& uT = h.final_slice().u;
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
    amp += uT[i] * std::exp(std::complex<double>(0.0, -mesh->coord(i, 0)));
  double a = 2.0 * std::abs(amp) / static_cast<double>(mesh->num_nodes());
  double expected = eps * oracle::mode_decay(1.0, T);
  CHECK(a == doctest::Approx(expected).epsilon(5e-3));
}

TEST_CASE("conformal flow: total area is conserved") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 48);
  Field u0 = band_limited_field(*mesh, 3, 0.2, 99);
  FlowHistory h = evolve_conformal_torus(mesh, u0, 0.4);
  double a0 = h.volume.front();
  for (double a : h.volume) CHECK(a == doctest::Approx(a0).epsilon(1e-4));
}

TEST_CASE("conformal flow: minimum scalar curvature is nondecreasing") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 48);
  Field u0 = band_limited_field(*mesh, 3, 0.25, 5);
  FlowHistory h = evolve_conformal_torus(mesh, u0, 0.4);
  double slack = 1e-6;
  for (std::size_t k = 0; k + 1 < h.num_slices(); ++k)
    CHECK(h.min_curvature[k + 1] >= h.min_curvature[k] - slack);
}

TEST_CASE("conformal flow signals blow-up via the cap") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 16);
  Field u0(mesh->num_nodes(), 0.0);
  StepPolicy pol;
  pol.blowup_cap = 0.05;
  for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
    u0[i] = 0.2 * std::sin(mesh->coord(i, 0));
  CHECK_THROWS_AS(evolve_conformal_torus(mesh, u0, 0.5, pol), SolveError);
}

TEST_CASE("terminal slice converges at first order in dt under joint refinement") {
  double T = 0.1, eps = 0.2;
  auto run = [&](int nres) {
    auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, nres);
    Field u0(mesh->num_nodes());
    for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
      u0[i] = eps * (std::sin(mesh->coord(i, 0)) + std::cos(2.0 * mesh->coord(i, 1)));
    return evolve_conformal_torus(mesh, u0, T);
  };
  FlowHistory h32 = run(32), h64 = run(64), h128 = run(128);
  auto err_vs_fine = [&](const FlowHistory& coarse, const FlowHistory& fine) {
    int ratio = fine.mesh->res[0] / coarse.mesh->res[0];
    double e = 0.0;
    for (int i = 0; i < coarse.mesh->res[0]; ++i)
      for (int j = 0; j < coarse.mesh->res[1]; ++j) {
        double a = coarse.final_slice().u[coarse.mesh->node_at({i, j, 0})];
        double b = fine.final_slice().u[fine.mesh->node_at({i * ratio, j * ratio, 0})];
        e = std::max(e, std::abs(a - b));
      }
    return e;
  };
  double e32 = err_vs_fine(h32, h128);
  double e64 = err_vs_fine(h64, h128);
  // dt scales with h^2, so halving h should divide the error by about 4.
  CHECK(e64 < e32 / 2.5);
}

TEST_CASE("parabolic rescale: identity, flat scaling, sphere normalization") {
  FlowHistory flat = make_flat_torus(2, 4.0, 16, 1.0, 8);
  FlowHistory same = parabolic_rescale(flat, 1.0);
  CHECK(same.mesh->side[0] == 4.0);
  CHECK(same.times.front() == flat.times.front());

  FlowHistory halved = parabolic_rescale(flat, 2.0);
  CHECK(halved.mesh->side[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(halved.times.front() == doctest::Approx(-0.25).epsilon(1e-15));
  for (double r : scalar_curvature(halved.final_slice())) CHECK(r == 0.0);

  double r0 = 3.0, T = 2.0;
  FlowHistory sph = make_shrinking_sphere(r0, T, 16, 32);
  FlowHistory unit = parabolic_rescale(sph, r0);
  CHECK(unit.final_slice().radius == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("parabolic rescale round-trips to the original payload") {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, 24);
  Field u0 = band_limited_field(*mesh, 2, 0.15, 21);
  FlowHistory h = evolve_conformal_torus(mesh, u0, 0.2);
  FlowHistory rt = parabolic_rescale(parabolic_rescale(h, 2.0), 0.5);
  REQUIRE(rt.num_slices() == h.num_slices());
  for (std::size_t k = 0; k < h.num_slices(); ++k) {
    CHECK(std::abs(rt.times[k] - h.times[k]) < 1e-15);
    for (std::int64_t i = 0; i < mesh->num_nodes(); ++i)
      CHECK(std::abs(rt.slices[k].u[i] - h.slices[k].u[i]) < 1e-14);
  }
}

TEST_CASE("flow history validate catches broken grids") {
  FlowHistory h = make_flat_torus(2, 1.0, 8, 1.0, 8);
  h.times.back() = -0.1;
  CHECK_THROWS(h.validate());
}
