#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rflab/entropy.hpp"

#include <cmath>

using namespace rflab;

namespace {

FlowHistory conformal_fixture(int res, double T, double eps, std::uint64_t seed) {
  auto mesh = Mesh::periodic_box(2, 2.0 * M_PI, res);
  return evolve_conformal_torus(mesh, band_limited_field(*mesh, 2, eps, seed), T);
}

}  // namespace

TEST_CASE("w functional: gaussian potential and constant potential closed forms") {
  FlowHistory h = make_flat_torus(2, 16.0, 48, 1.0, 16);
  const MetricSlice& slice = h.final_slice();
  double tau = 0.5;

  // Gaussian exponent centered at a node: the entropy vanishes.
  Field d2 = frozen_dist_sq(slice, h.mesh->center_node());
  Field f(d2.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d2[i] / (4.0 * tau);
  CHECK(std::abs(w_functional(slice, f, tau)) < 1e-6);

  // Constant potential: W = log(V (4 pi tau)^{-n/2}) - n, and no shift needed.
  double V = total_volume(slice);
  double c = std::log(V * std::pow(4.0 * M_PI * tau, -1.0));
  Field fc(f.size(), c);
  WFunctionalResult wr = w_functional_full(slice, fc, tau);
  CHECK(wr.value == doctest::Approx(c - 2.0).epsilon(1e-12));
  CHECK(std::abs(wr.shift) < 1e-12);

  // Overflow guard.
  Field bad(f.size(), -1e6);
  CHECK_THROWS_AS(w_functional(slice, bad, tau), SolveError);
}

TEST_CASE("the two entropy code paths agree on a solved kernel") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 19);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());
  double s = -0.25;
  KernelSlice ks = eval_kernel(h, k, s);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  double via_pointed = pointed_w(slice, ks);
  double via_w = w_functional(slice, ks.f, -ks.s);
  CHECK(via_pointed == doctest::Approx(via_w).epsilon(5e-4));
}

TEST_CASE("flat analytic kernel has vanishing pointed and time-averaged entropy") {
  FlowHistory h = make_flat_torus(2, 20.0, 64, 1.0, 32);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());
  for (double s : {-1.0, -0.5, -0.1}) {
    KernelSlice ks = eval_kernel(h, k, s);
    const MetricSlice slice = kernel_metric_slice(h, k, ks);
    CHECK(std::abs(pointed_w(slice, ks)) < 1e-6);
    CHECK(std::abs(pointed_nash_moment(slice, ks)) < 1e-6);
  }
  NashPair np = nash_entropy(h, k, -0.5);
  CHECK(std::abs(np.time_average) < 1e-6);
  CHECK(np.discrepancy < 1e-6);
}

TEST_CASE("entropy curves are monotone and approach zero") {
  // Sphere: closed-form kernel, so the curve is essentially exact.
  FlowHistory hs = make_shrinking_sphere(1.5, 1.0, 96, 256);
  KernelHistory ks = solve_conjugate_kernel(hs, 0);
  EntropyCurve cs = pointed_entropy_curve(hs, ks);
  for (std::size_t j = 0; j + 1 < cs.dense_s.size(); ++j) {
    CHECK(cs.dense_W[j] <= cs.dense_W[j + 1] + 1e-10);
    CHECK(cs.dense_N[j] <= cs.dense_N[j + 1] + 1e-10);
  }
  // W <= N <= 0 and the s -> 0 limit via extrapolation over the last decade.
  for (std::size_t j = 0; j < cs.dense_s.size(); ++j) {
    CHECK(cs.dense_W[j] <= cs.dense_N[j] + 1e-10);
    CHECK(cs.dense_N[j] <= 1e-10);
    CHECK(cs.dense_D[j] >= -1e-12);
  }
  CHECK(std::abs(cs.dense_W.back()) < 0.05 * std::abs(cs.dense_W.front()));

  // Conformal solved kernel: monotone within the discretization allowance.
  FlowHistory hc = conformal_fixture(48, 0.3, 0.2, 7);
  KernelHistory kc = solve_conjugate_kernel(hc, hc.mesh->center_node());
  EntropyCurve cc = pointed_entropy_curve(hc, kc);
  double hmin = hc.mesh->min_spacing();
  double dt = hc.times[1] - hc.times[0];
  double tol_mono = 5.0 * (hmin * hmin + dt);
  for (std::size_t j = 0; j + 1 < cc.dense_s.size(); ++j) {
    CHECK(cc.dense_W[j] <= cc.dense_W[j + 1] + tol_mono);
    CHECK(cc.dense_N[j] <= cc.dense_N[j + 1] + tol_mono);
    CHECK(cc.dense_W[j] <= cc.dense_N[j] + tol_mono);
  }
}

TEST_CASE("nash identity on the sphere is tight") {
  FlowHistory h = make_shrinking_sphere(2.0, 1.5, 96, 256);
  KernelHistory k = solve_conjugate_kernel(h, 0);
  for (double s : {-1.2, -0.7, -0.3}) {
    NashPair np = nash_entropy(h, k, s);
    CHECK(np.moment < 0.0);  // strictly negative entropy on the sphere
    CHECK(np.discrepancy < 1e-6);
  }
}

TEST_CASE("nash identity on a conformal flow") {
  FlowHistory h = conformal_fixture(64, 0.4, 0.25, 23);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());
  NashPair np = nash_entropy(h, k, -0.3);
  CHECK(np.discrepancy < 1e-3);
}

TEST_CASE("soliton defect: zero for the gaussian, derivative of W on the sphere") {
  FlowHistory hf = make_flat_torus(2, 16.0, 48, 1.0, 16);
  KernelHistory kf = solve_conjugate_kernel(hf, hf.mesh->center_node());
  CHECK(std::abs(soliton_defect(hf, kf, -0.5)) < 1e-8);

  // -dW/dr = 2|r| D(r) on the closed-form sphere kernel.
  FlowHistory hs = make_shrinking_sphere(1.5, 1.0, 96, 256);
  KernelHistory ks = solve_conjugate_kernel(hs, 0);
  double r = -0.4, dr = 1e-4;
  auto W_at = [&](double rv) {
    KernelSlice kk = eval_kernel(hs, ks, rv);
    return pointed_w(kernel_metric_slice(hs, ks, kk), kk);
  };
  double dWdr = (W_at(r + dr) - W_at(r - dr)) / (2.0 * dr);
  double D = soliton_defect(hs, ks, r);
  CHECK(D >= 0.0);
  CHECK(dWdr == doctest::Approx(2.0 * std::abs(r) * D).epsilon(1e-4));
}

TEST_CASE("defect representation of the nash entropy on the sphere") {
  FlowHistory h = make_shrinking_sphere(1.5, 1.0, 96, 256);
  KernelHistory k = solve_conjugate_kernel(h, 0);
  double s = -0.8;
  // N(s) = -int_s^0 2|r| (1 - r/s) D(r) dr, via a log-spaced Simpson rule.
  double delta = 10.0 * k.eps0;
  double X = std::log(-s / delta);
  int M = 256;
  double dx = X / M, acc = 0.0;
  for (int j = 0; j <= M; ++j) {
    double x = j * dx;
    double r = s * std::exp(-x);
    double wgt = (j == 0 || j == M) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    double D = soliton_defect(h, k, r);
    acc += wgt * 2.0 * std::abs(r) * (1.0 - r / s) * D * (-r);
  }
  double integral = acc * dx / 3.0;
  NashPair np = nash_entropy(h, k, s);
  CHECK(np.moment == doctest::Approx(-integral).epsilon(2e-3));
}

TEST_CASE("pointed entropy dominates the initial-slice entropy interval") {
  FlowHistory h = conformal_fixture(48, 0.3, 0.25, 3);
  KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node());
  MuResult mu = mu_entropy(h.initial_slice(), h.horizon());
  EntropyCurve c = pointed_entropy_curve(h, k);
  double tol = 5.0 * (std::pow(h.mesh->min_spacing(), 2) + h.times[1] - h.times[0]);
  for (std::size_t j = 0; j < c.dense_s.size(); ++j)
    CHECK(c.dense_W[j] >= mu.lower() - tol);
}

TEST_CASE("mu entropy: localized regime stays within a hundredth of zero") {
  FlowHistory h = make_flat_torus(2, 1.0, 128, 0.01, 8);
  MuResult mu = mu_entropy(h.final_slice(), 1e-3);
  CHECK(mu.value <= 1e-12);
  CHECK(mu.value > -1e-2);
}

TEST_CASE("mu entropy: spread regime hits the constant-minimizer value") {
  FlowHistory h = make_flat_torus(2, 1.0, 32, 0.01, 8);
  double tau = 50.0;
  MuResult mu = mu_entropy(h.final_slice(), tau);
  double expected = std::log(1.0 * std::pow(4.0 * M_PI * tau, -1.0)) - 2.0;
  CHECK(mu.value <= expected + 1e-12);
  CHECK(mu.value == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("mu entropy is nondecreasing along a conformal flow") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 47);
  double t0 = 0.5;  // any reference time beyond the flow
  std::vector<double> mus;
  for (double t : {h.times.front(), -0.15, 0.0}) {
    const MetricSlice& slice = h.slice_at(t);
    mus.push_back(mu_entropy(slice, t0 - slice.t).value);
  }
  double hmin = h.mesh->min_spacing();
  double tol = 5.0 * (hmin * hmin + h.times[1] - h.times[0]);
  CHECK(mus[0] <= mus[1] + tol);
  CHECK(mus[1] <= mus[2] + tol);
}

TEST_CASE("no local collapsing: explicit constant and flat ball") {
  // The torus must be large enough for the entropy hypothesis mu >= -C to
  // hold at the scales t + T + rho^2 involved.
  FlowHistory h = make_flat_torus(2, 8.0, 48, 0.5, 16);
  double C = 1.0;
  CheckReport r = no_local_collapse_check(h, 0.0, h.mesh->center_node(), 0.5, C);
  CHECK(r.status == CheckReport::Status::Pass);
  // kappa = e^{-66} for n = 2, C = 1.
  CHECK(r.note.find(format_double(std::exp(-66.0))) != std::string::npos);
  // pi r^2 dwarfs kappa r^2.
  CHECK(r.rhs == doctest::Approx(M_PI * 0.25).epsilon(0.1));

  // Failing hypothesis reports Skipped, not Fail.
  FlowHistory hs = make_shrinking_sphere(3.0, 0.5, 32, 64);
  CheckReport skip = no_local_collapse_check(hs, 0.0, 0, 0.5, 1e-4);
  CHECK(skip.status == CheckReport::Status::Skipped);
}

TEST_CASE("kernel potential satisfies the heat-entropy derivative identity") {
  // d/dt (tau int u log u dvol) = W + n + (n/2) log(4 pi tau) for the kernel,
  // checked by finite differences; the residual shrinks under refinement.
  auto resid = [&](int res) {
    FlowHistory h = make_flat_torus(2, 2.0 * M_PI, res, 0.4);
    KernelOptions ko;
    ko.force_numeric = true;
    ko.store_stride = 1;
    KernelHistory k = solve_conjugate_kernel(h, h.mesh->center_node(), ko);
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < k.sample_s.size(); j += 4) {
      // Fixed comparison window so refinement is like-for-like.
      if (k.sample_s[j] < -0.35 || k.sample_s[j] > -0.15) continue;
      auto phi_at = [&](std::size_t jj) {
        double tau = -k.sample_s[jj];
        const MetricSlice& slice = h.slice_at(k.sample_s[jj]);
        Field v = volume_weights(slice);
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
          double H = k.samples[jj][i] / v[i];
          if (H > 1e-300) acc += H * std::log(H) * v[i];
        }
        return tau * acc;
      };
      double dphi = (phi_at(j + 1) - phi_at(j - 1)) /
                    (k.sample_s[j + 1] - k.sample_s[j - 1]);
      KernelSlice ks = eval_kernel(h, k, k.sample_s[j]);
      double tau = -ks.s;
      double rhs = pointed_w(h.slice_at(ks.s), ks) + 2.0 +
                   std::log(4.0 * M_PI * tau);
      worst = std::max(worst, std::abs(dphi - rhs));
    }
    return worst;
  };
  double r32 = resid(32);
  double r64 = resid(64);
  CHECK(r64 < r32 / 2.0);
}

TEST_CASE("unweighted log-sobolev with the initial-slice entropy constant") {
  FlowHistory h = conformal_fixture(32, 0.3, 0.2, 91);
  MuResult mu0 = mu_entropy(h.initial_slice(), 0.0 + h.horizon());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Field phi = band_limited_field(*h.mesh, 3, 1.0, 500 + seed);
    for (double& x : phi) x += 1.2;
    CheckReport r = unweighted_logsobolev_check(h, -0.15, phi, mu0, 1e-9);
    CHECK(r.passed());
  }
}

TEST_CASE("entropies are invariant under parabolic rescaling") {
  // Sphere: nontrivial entropy values, closed-form kernels on both sides.
  FlowHistory h = make_shrinking_sphere(2.0, 1.0, 64, 128);
  KernelHistory k = solve_conjugate_kernel(h, 0);
  double lambda = 2.0, s = -0.6;
  FlowHistory hr = parabolic_rescale(h, lambda);
  KernelHistory kr = parabolic_rescale(k, lambda);
  KernelSlice a = eval_kernel(h, k, s);
  KernelSlice b = eval_kernel(hr, kr, s / (lambda * lambda));
  double Wa = pointed_w(kernel_metric_slice(h, k, a), a);
  double Wb = pointed_w(kernel_metric_slice(hr, kr, b), b);
  double Na = pointed_nash_moment(kernel_metric_slice(h, k, a), a);
  double Nb = pointed_nash_moment(kernel_metric_slice(hr, kr, b), b);
  CHECK(Wb == doctest::Approx(Wa).epsilon(1e-10));
  CHECK(Nb == doctest::Approx(Na).epsilon(1e-10));

  // Conformal solved kernel: pure re-indexing of the stored weights.
  FlowHistory hc = conformal_fixture(32, 0.3, 0.2, 15);
  KernelHistory kc = solve_conjugate_kernel(hc, hc.mesh->center_node());
  FlowHistory hcr = parabolic_rescale(hc, lambda);
  KernelHistory kcr = parabolic_rescale(kc, lambda);
  double sc = kc.sample_s[kc.sample_s.size() / 2];
  KernelSlice ca = eval_kernel(hc, kc, sc);
  KernelSlice cb = eval_kernel(hcr, kcr, sc / (lambda * lambda));
  double Wc = pointed_w(kernel_metric_slice(hc, kc, ca), ca);
  double Wcr = pointed_w(kernel_metric_slice(hcr, kcr, cb), cb);
  CHECK(Wcr == doctest::Approx(Wc).epsilon(1e-10));
}
