#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rflab/heatkernel.hpp"

#include <cmath>
#include <functional>

using namespace rflab;

namespace {

FlowHistory conformal_fixture(int res, double T, double eps, std::uint64_t seed) {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, res);
  return evolve_conformal_torus(mesh, band_limited_field(*mesh, 2, eps, seed), T);
}

HeatField field_history(const FlowHistory& h, double t1, double t2,
                        const std::function<double(double, double, double)>& fn) {
  HeatField out;
  out.direction = HeatField::Direction::Generic;
  std::size_t k1 = h.index_of(t1), k2 = h.index_of(t2);
  for (std::size_t k = k1; k <= k2; ++k) {
    Field f(h.mesh->num_nodes());
    for (std::int64_t i = 0; i < h.mesh->num_nodes(); ++i)
      f[i] = fn(h.mesh->coord(i, 0), h.mesh->coord(i, 1), h.times[k]);
    out.times.push_back(h.times[k]);
    out.fields.push_back(std::move(f));
  }
  return out;
}

double rel_l1(const Field& a, const Field& b, const Field& v) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::abs(a[i] - b[i]) * v[i];
    den += std::abs(b[i]) * v[i];
  }
  return num / den;
}

}  // namespace

TEST_CASE("forward evolution: constants stay caloric, modes decay") {
  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 32, 0.5);
  Field ones(h.mesh->num_nodes(), 1.0);
  Field out1 = forward_evolve(h, ones, -0.5, 0.0);
  for (double x : out1) CHECK(x == doctest::Approx(1.0).epsilon(1e-13));

  Field mode(h.mesh->num_nodes());
  for (std::int64_t i = 0; i < h.mesh->num_nodes(); ++i)
    mode[i] = std::sin(h.mesh->coord(i, 0));
  Field out = forward_evolve(h, mode, -0.5, 0.0);
  double expected = oracle::mode_decay(1.0, 0.5);
  for (std::int64_t i = 0; i < h.mesh->num_nodes(); ++i)
    CHECK(out[i] == doctest::Approx(expected * mode[i]).epsilon(2e-3));
}

TEST_CASE("semigroup law: staged and direct evolutions agree") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.15, 17);
  Field u0 = band_limited_field(*h.mesh, 3, 1.0, 23);
  for (double& x : u0) x += 2.0;
  double s = h.times.front(), r = h.times[h.num_slices() / 2];
  Field staged = forward_evolve(h, forward_evolve(h, u0, s, r), r, 0.0);
  Field direct = forward_evolve(h, u0, s, 0.0);
  for (std::int64_t i = 0; i < h.mesh->num_nodes(); ++i)
    CHECK(staged[i] == doctest::Approx(direct[i]).epsilon(1e-13));
}

TEST_CASE("solved conjugate kernel matches the image-sum oracle under refinement") {
  double T = 0.5, s = -0.5;
  auto solve_error = [&](int res) {
    FlowHistory h = make_flat_torus(2, 2.0 * M_PI, res, T);
    KernelOptions ko;
    ko.force_numeric = true;
    KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node(), ko);
    KernelSlice ks = eval_kernel(h, k, s);
    const MetricSlice& slice = h.slice_at(s);
    Field v = volume_weights(slice);
    Field H(ks.nu.size());
    for (std::size_t i = 0; i < H.size(); ++i) H[i] = ks.nu[i] / v[i];
    Field want = oracle::wrapped_gaussian(*h.mesh, h.mesh->center_node(), s);
    return rel_l1(H, want, v);
  };
  double e32 = solve_error(32);
  double e64 = solve_error(64);
  CHECK(e64 < 2e-3);
  CHECK(e32 / e64 > 2.8);
}

TEST_CASE("conjugate kernel conserves unit mass to roundoff") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 41);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());
  for (double m : k.sample_mass) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analytic flat kernel agrees with the oracle; potential is the Gaussian exponent") {
  FlowHistory h = make_flat_torus(2, 8.0, 32, 1.0, 16);
  NodeIndex x0 = h.mesh->center_node();
  KernelHistory k = solve_conjugate_kernel(h, x0);  // analytic path
  CHECK(k.analytic);
  double s = -0.4;
  KernelSlice ks = eval_kernel(h, k, s);
  Field v = volume_weights(h.slice_at(s));
  Field want = oracle::wrapped_gaussian(*h.mesh, x0, s);
  for (std::size_t i = 0; i < ks.nu.size(); ++i)
    CHECK(ks.nu[i] / v[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // Non-wrapped regime: f = d^2 / (4 |s|).
  Field d2 = frozen_dist_sq(h.slice_at(s), x0);
  for (std::size_t i = 0; i < ks.f.size(); ++i)
    if (d2[i] < 4.0)
      CHECK(ks.f[i] == doctest::Approx(d2[i] / (4.0 * 0.4)).epsilon(1e-9));
}

TEST_CASE("sphere kernel: exact unit mass and positivity") {
  FlowHistory h = make_shrinking_sphere(2.0, 1.0, 64, 128);
  KernelHistory k = solve_conjugate_kernel(h, 0);
  CHECK(k.analytic);
  for (double s : {-0.9, -0.5, -0.1, -0.02}) {
    KernelSlice ks = eval_kernel(h, k, s);
    // Inside the spectral mollification window the truncated series is only
    // approximately a probability density.
    double tol = (s <= -10.0 * k.eps0) ? 1e-12 : 1e-6;
    CHECK(ks.mass == doctest::Approx(1.0).epsilon(tol));
    if (s <= -10.0 * k.eps0) {
      for (std::size_t i = 0; i < ks.nu.size(); ++i)
        if (!ks.mask[i]) CHECK(ks.nu[i] >= 0.0);
    }
  }
}

TEST_CASE("duality: adjoint kernel equals the forward fundamental solution") {
  // Static torus: the two solves are mirror images and agree to roundoff.
  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 32, 0.5);
  KernelOptions ko;
  ko.force_numeric = true;
  NodeIndex x = h.mesh->center_node();
  NodeIndex y = h.mesh->node_at({5, 9, 0});
  CheckReport r = duality_check(h, x, 0.0, y, -0.4, 1e-3, ko);
  CHECK(r.passed());
  CHECK(r.lhs < 1e-10);

  // Conformal flow: genuine discretization error, improving with resolution.
  // Resolutions are chosen so |s| stays above the mollification window.
  FlowHistory hc1 = conformal_fixture(48, 0.3, 0.15, 3);
  FlowHistory hc2 = conformal_fixture(96, 0.3, 0.15, 3);
  NodeIndex y1 = hc1.mesh->node_at({8, 14, 0});
  NodeIndex y2 = hc2.mesh->node_at({16, 28, 0});
  CheckReport r1 = duality_check(hc1, hc1.mesh->center_node(), 0.0, y1, -0.25, 2e-2, ko);
  CheckReport r2 = duality_check(hc2, hc2.mesh->center_node(), 0.0, y2, -0.25, 1e-2, ko);
  CHECK(r1.passed());
  CHECK(r2.passed());
  CHECK(r2.lhs < r1.lhs / 1.8 + 1e-12);
}

TEST_CASE("mass growth of the kernel family in its base point") {
  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 32, 0.5);
  CheckReport flat = mass_growth_check(h, h.mesh->center_node(), -0.4, 1e-9);
  CHECK(flat.passed());

  FlowHistory hc = conformal_fixture(32, 0.3, 0.2, 8);
  CheckReport conf = mass_growth_check(hc, hc.mesh->center_node(), -0.25, 1e-3);
  CHECK(conf.passed());
}

TEST_CASE("parabolic bochner residual vanishes under refinement") {
  // A caloric Fourier mode on the static torus has zero continuum residual,
  // so the discrete residual is pure discretization error.
  auto residual_at = [&](int res) {
    FlowHistory h = make_flat_torus(2, 2.0 * M_PI, res, 0.25);
    Field mode(h.mesh->num_nodes());
    for (std::int64_t i = 0; i < h.mesh->num_nodes(); ++i)
      mode[i] = std::sin(h.mesh->coord(i, 0));
    HeatField u = forward_evolve_history(h, mode, -0.25, 0.0);
    return bochner_residual(h, u).worst();
  };
  double r24 = residual_at(24);
  double r48 = residual_at(48);
  CHECK(r48 < r24 / 3.0);

  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 24, 0.25);
  Field c(h.mesh->num_nodes(), 2.0);
  HeatField uc = forward_evolve_history(h, c, -0.25, 0.0);
  CHECK(bochner_residual(h, uc).worst() < 1e-12);
}

TEST_CASE("space-time integration by parts") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 31);
  double t1 = h.times.front(), t2 = 0.0;

  // u = v = 1: the pairing reduces to the volume-form evolution, checked
  // against direct differencing of the volume.
  HeatField ones = field_history(h, t1, t2, [](double, double, double) { return 1.0; });
  CheckReport r1 = ibp_identity_check(h, ones, ones, t1, t2, 2e-3);
  CHECK(r1.passed());

  // Random smooth space-time data on the static torus: O(h^2 + dt).
  FlowHistory hs = make_flat_torus(2, 2.0 * M_PI, 32, 0.3);
  auto uf = field_history(hs, -0.3, 0.0, [](double x, double y, double t) {
    return std::sin(x) * std::cos(y) * std::cos(t) + 2.0;
  });
  auto vf = field_history(hs, -0.3, 0.0, [](double x, double y, double t) {
    return std::cos(2.0 * x) * (1.0 + 0.3 * std::sin(t)) + 1.5;
  });
  CheckReport r3 = ibp_identity_check(hs, uf, vf, -0.3, 0.0, 5e-3);
  CHECK(r3.passed());
}

TEST_CASE("ibp pairing of a caloric and an adjoint-caloric field is constant") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 31);
  Field u0 = band_limited_field(*h.mesh, 2, 1.0, 77);
  for (double& x : u0) x += 2.0;
  HeatField u = forward_evolve_history(h, u0, h.times.front(), 0.0);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());

  HeatField v;
  v.direction = HeatField::Direction::Adjoint;
  for (std::size_t j = 0; j < k.sample_s.size(); ++j) {
    const MetricSlice& slice = h.slice_at(k.sample_s[j]);
    Field vol = volume_weights(slice);
    Field w(k.samples[j].size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = k.samples[j][i] / vol[i];
    v.times.push_back(k.sample_s[j]);
    v.fields.push_back(std::move(w));
  }
  HeatField u_sub;
  u_sub.direction = HeatField::Direction::Forward;
  for (double t : v.times) {
    u_sub.times.push_back(t);
    u_sub.fields.push_back(u.at_time(t));
  }
  CheckReport r = ibp_identity_check(h, u_sub, v, v.times.front(), v.times.back(), 2e-2);
  CHECK(r.passed());
}

TEST_CASE("commutator residuals vanish under refinement") {
  auto resid = [&](int res, CommutatorVariant variant) {
    FlowHistory h = conformal_fixture(res, 0.2, 0.15, 13);
    Field u0 = band_limited_field(*h.mesh, 2, 1.0, 29);
    for (double& x : u0) x += 2.0;
    HeatField u = forward_evolve_history(h, u0, h.times.front(), 0.0);
    return commutator_residual(h, u, variant);
  };
  for (auto variant : {CommutatorVariant::Square, CommutatorVariant::XLogX}) {
    double r24 = resid(24, variant);
    double r48 = resid(48, variant);
    CHECK(r48 < r24 / 2.5);
  }
}

TEST_CASE("homotopy derivative identity holds to first order in dt") {
  auto resid = [&](int res) {
    FlowHistory h = make_flat_torus(2, 2.0 * M_PI, res, 0.4);
    KernelOptions ko;
    ko.force_numeric = true;
    ko.store_stride = 1;  // dense samples for the finite difference
    KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node(), ko);
    Field psi = band_limited_field(*h.mesh, 2, 1.0, 55);
    return homotopy_derivative_check(h, k, psi, 5e-2).lhs;
  };
  double r32 = resid(32);
  double r64 = resid(64);
  CHECK(r32 < 5e-2);
  CHECK(r64 < r32 / 3.0);  // dt scales with h^2
}

TEST_CASE("kernel rescaling matches the flow rescaling convention") {
  FlowHistory h = make_flat_torus(2, 2.0 * M_PI, 24, 0.5);
  KernelOptions ko;
  ko.force_numeric = true;
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node(), ko);
  KernelHistory k2 = parabolic_rescale(k, 2.0);
  CHECK(k2.sample_s.front() == doctest::Approx(k.sample_s.front() / 4.0).epsilon(1e-15));
  CHECK(k2.samples.front() == k.samples.front());
}
