#include "rflab/inequalities.hpp"

#include "rflab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rflab {

namespace {

double nu_total(const KernelSlice& ks) {
  double m = 0.0;
  for (std::size_t i = 0; i < ks.nu.size(); ++i)
    if (!ks.mask[i]) m += ks.nu[i];
  return m;
}

double nu_integral(const KernelSlice& ks, const Field& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < ks.nu.size(); ++i)
    if (!ks.mask[i]) m += f[i] * ks.nu[i];
  return m;
}

}  // namespace

CheckReport poincare_check(const MetricSlice& slice, const KernelSlice& ks,
                           const TestFunction& tf, double tolerance) {
  double tau = -ks.s;
  Field phi = tf.values;
  double mass = nu_total(ks);
  double mean = nu_integral(ks, phi) / mass;
  for (double& x : phi) x -= mean;

  Field gsq =
      tf.analytic_grad_sq.empty() ? gradient_squared(slice, phi) : tf.analytic_grad_sq;
  double lhs = nu_integral(ks, [&] {
    Field p2(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) p2[i] = phi[i] * phi[i];
    return p2;
  }());
  double rhs = 2.0 * tau * nu_integral(ks, gsq);
  CheckReport r = CheckReport::make("poincare", lhs, rhs, tolerance, ks.s);
  return r;
}

CheckReport logsobolev_check(const MetricSlice& slice, const KernelSlice& ks,
                             const TestFunction& tf, double tolerance) {
  double tau = -ks.s;
  Field phi = tf.values;
  for (double& x : phi) x = std::abs(x);
  double mass = nu_integral(ks, [&] {
    Field p2(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) p2[i] = phi[i] * phi[i];
    return p2;
  }());
  double scale2 = nu_total(ks) / mass;  // rescale phi^2 to unit nu-mass
  double scale = std::sqrt(scale2);
  for (double& x : phi) x *= scale;

  Field gsq =
      tf.analytic_grad_sq.empty() ? gradient_squared(slice, phi) : [&] {
        Field g = tf.analytic_grad_sq;
        for (double& x : g) x *= scale2;
        return g;
      }();
  double lhs = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (ks.mask[i]) continue;
    double p2 = phi[i] * phi[i];
    if (p2 > 1e-300) lhs += p2 * std::log(p2) * ks.nu[i];
  }
  double rhs = 4.0 * tau * nu_integral(ks, gsq);
  return CheckReport::make("logsobolev", lhs, rhs, tolerance, ks.s);
}

CheckReport concentration_check(const MetricSlice& slice, const KernelSlice& ks,
                                const PointSet& a, const PointSet& b, double tolerance) {
  if (a.empty() || b.empty()) throw std::invalid_argument("concentration: empty set");
  double tau = -ks.s;
  double nu_a = 0.0, nu_b = 0.0;
  for (NodeIndex i : a.nodes)
    if (!ks.mask[i]) nu_a += ks.nu[i];
  for (NodeIndex i : b.nodes)
    if (!ks.mask[i]) nu_b += ks.nu[i];
  double dist = geodesic_distance(slice, a, b) / stencil_anisotropy(slice.dim());
  double lhs = nu_a * nu_b;
  double rhs = std::exp(-dist * dist / (8.0 * tau));
  CheckReport r = CheckReport::make("concentration", lhs, rhs, tolerance, ks.s);
  r.note = "distance corrected by the stencil anisotropy factor";
  return r;
}

HerbstResult herbst_transform(const MetricSlice& slice, const KernelSlice& ks,
                              const TestFunction& tf, const std::vector<double>& lambda_grid,
                              double tolerance) {
  double tau = -ks.s;
  Field F = tf.values;
  // Enforce 1-Lipschitz by rescaling with the max discrete gradient (or a
  // caller-certified constant), then center against nu.
  double lip = tf.certified_lipschitz;
  if (!(lip > 0.0)) {
    Field gsq = gradient_squared(slice, F);
    for (std::size_t i = 0; i < F.size(); ++i)
      if (!ks.mask[i]) lip = std::max(lip, std::sqrt(gsq[i]));
  }
  if (lip > 0.0)
    for (double& x : F) x /= lip;
  double mean = nu_integral(ks, F) / nu_total(ks);
  for (double& x : F) x -= mean;

  HerbstResult out;
  std::vector<double> Z;
  for (double l : lambda_grid) {
    double fmax = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i)
      if (!ks.mask[i]) fmax = std::max(fmax, l * F[i]);
    if (fmax > 700.0) throw SolveError("herbst: lambda beyond representable range");
    double z = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i)
      if (!ks.mask[i]) z += std::exp(l * F[i]) * ks.nu[i];
    out.lambda.push_back(l);
    out.U.push_back(std::log(z) / l);
    Z.push_back(z);
  }
  double worst_dU = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < out.lambda.size(); ++j)
    worst_dU = std::max(worst_dU, (out.U[j + 1] - out.U[j]) /
                                      (out.lambda[j + 1] - out.lambda[j]));
  out.derivative_report =
      CheckReport::make("herbst_derivative", worst_dU, tau, tolerance, ks.s);
  double worst_ratio = 0.0;
  for (std::size_t j = 0; j < Z.size(); ++j)
    worst_ratio = std::max(worst_ratio,
                           Z[j] / std::exp(tau * out.lambda[j] * out.lambda[j]));
  out.mgf_report = CheckReport::make("herbst_mgf", worst_ratio, 1.0, tolerance, ks.s);
  return out;
}

namespace {

double hess_norm_sq_at(const std::vector<Field>& hess, int dim, std::size_t i) {
  double h2 = 0.0;
  for (int a = 0; a < dim; ++a) h2 += hess[a][i] * hess[a][i];
  for (std::size_t c = dim; c < hess.size(); ++c) h2 += 2.0 * hess[c][i] * hess[c][i];
  return h2;
}

}  // namespace

CheckReport homotopy_identity_check(const FlowHistory& h, NodeIndex x0, const Field& u_s,
                                    double s, HomotopyVariant variant, double tolerance,
                                    KernelOptions opts) {
  opts.force_numeric = true;
  KernelHistory bk = solve_conjugate_kernel(h, x0, opts);
  std::size_t j_s = bk.nearest_sample(s);
  double s_used = bk.sample_s[j_s];

  HeatField uh = forward_evolve_history(h, u_s, s_used, 0.0, opts.policy);

  auto phi = [&](double x) { return variant == HomotopyVariant::Square ? x * x : x * std::log(x); };
  auto phipp = [&](double x) { return variant == HomotopyVariant::Square ? 2.0 : 1.0 / x; };

  // Left side against the kernel measure at s.
  const Field& nu_s = bk.samples[j_s];
  double mean_u = 0.0, mean_phi = 0.0;
  for (std::size_t i = 0; i < u_s.size(); ++i) {
    mean_u += uh.fields.front()[i] * nu_s[i];
    mean_phi += phi(uh.fields.front()[i]) * nu_s[i];
  }
  double lhs = mean_phi - phi(mean_u);

  // Right side: integrate the smoothed-gradient payload along the kernel.
  std::vector<double> ts, integrand;
  for (std::size_t j = j_s; j < bk.sample_s.size(); ++j) {
    double t = bk.sample_s[j];
    const MetricSlice& slice = h.slice_at(t);
    const Field& ut = uh.at_time(t);
    Field gsq = gradient_squared(slice, ut);
    double acc = 0.0;
    for (std::size_t i = 0; i < ut.size(); ++i)
      acc += phipp(ut[i]) * gsq[i] * bk.samples[j][i];
    ts.push_back(t);
    integrand.push_back(acc);
  }
  double rhs = 0.0;
  for (std::size_t j = 0; j + 1 < ts.size(); ++j)
    rhs += 0.5 * (integrand[j] + integrand[j + 1]) * (ts[j + 1] - ts[j]);
  // Tail over [-eps0, 0]: the integrand limits to the pointwise value at x0.
  {
    const MetricSlice& slice0 = h.final_slice();
    const Field& u0 = uh.fields.back();
    Field gsq0 = gradient_squared(slice0, u0);
    double end_val = phipp(u0[x0]) * gsq0[x0];
    rhs += 0.5 * (integrand.back() + end_val) * (0.0 - ts.back());
  }

  double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
  CheckReport r = CheckReport::make("homotopy_identity", std::abs(lhs - rhs) / scale,
                                    tolerance, 0.0, s_used, x0);
  r.note = variant == HomotopyVariant::Square ? "phi = x^2" : "phi = x log x";
  return r;
}

CheckReport gradient_interpolation_check(const FlowHistory& h, NodeIndex x0,
                                         const Field& u_s, double s, double tolerance,
                                         KernelOptions opts) {
  opts.force_numeric = true;
  KernelHistory bk = solve_conjugate_kernel(h, x0, opts);
  std::size_t j_s = bk.nearest_sample(s);
  double s_used = bk.sample_s[j_s];
  HeatField uh = forward_evolve_history(h, u_s, s_used, 0.0, opts.policy);

  const MetricSlice& slice0 = h.final_slice();
  double lhs = gradient_squared(slice0, uh.fields.back())[x0];

  const MetricSlice& slice_s = h.slice_at(s_used);
  Field gsq_s = gradient_squared(slice_s, uh.at_time(s_used));
  double term1 = 0.0;
  for (std::size_t i = 0; i < gsq_s.size(); ++i) term1 += gsq_s[i] * bk.samples[j_s][i];

  std::vector<double> ts, integrand;
  int dim = h.mesh->dim;
  for (std::size_t j = j_s; j < bk.sample_s.size(); ++j) {
    double t = bk.sample_s[j];
    const MetricSlice& slice = h.slice_at(t);
    auto hess = hessian_onb(slice, uh.at_time(t));
    double acc = 0.0;
    for (std::size_t i = 0; i < u_s.size(); ++i)
      acc += hess_norm_sq_at(hess, dim, i) * bk.samples[j][i];
    ts.push_back(t);
    integrand.push_back(acc);
  }
  double term2 = 0.0;
  for (std::size_t j = 0; j + 1 < ts.size(); ++j)
    term2 += 0.5 * (integrand[j] + integrand[j + 1]) * (ts[j + 1] - ts[j]);
  {
    auto hess0 = hessian_onb(slice0, uh.fields.back());
    double end_val = hess_norm_sq_at(hess0, dim, static_cast<std::size_t>(x0));
    term2 += 0.5 * (integrand.back() + end_val) * (0.0 - ts.back());
  }
  double rhs = term1 - 2.0 * term2;
  double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
  CheckReport r = CheckReport::make("gradient_interpolation", std::abs(lhs - rhs) / scale,
                                    tolerance, 0.0, s_used, x0);
  return r;
}

CheckReport zhang_gradient_check(const FlowHistory& h, const HeatField& u, double t1,
                                 double t2, double tolerance) {
  std::size_t j1 = u.index_of(t1), j2 = u.index_of(t2);
  double sup_u = 0.0;
  for (std::size_t j = j1; j <= j2; ++j)
    for (double x : u.fields[j]) {
      if (!(x > 0.0)) throw std::invalid_argument("zhang estimate needs u > 0");
      sup_u = std::max(sup_u, x);
    }
  double worst = 0.0;
  for (std::size_t j = j1 + 1; j <= j2; ++j) {
    double dt = u.times[j] - u.times[j1];
    const MetricSlice& slice = h.slice_at(u.times[j]);
    Field q(u.fields[j].size());
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] = std::sqrt(std::max(0.0, std::log(sup_u / u.fields[j][i])));
    Field gsq = gradient_squared(slice, q);
    double gmax = 0.0;
    for (double x : gsq) gmax = std::max(gmax, x);
    worst = std::max(worst, std::sqrt(gmax) * std::sqrt(dt));
  }
  CheckReport r = CheckReport::make("zhang_gradient", worst, 1.0, tolerance, t1);
  r.note = "sup_t sup_x |grad sqrt(log(sup u/u))| sqrt(t-t1)";
  return r;
}

KernelBoundsResult kernel_bounds_check(const FlowHistory& h, const KernelHistory& k,
                                       const std::vector<double>& s_values,
                                       double tolerance, MuOptions mu_opts) {
  KernelBoundsResult out;
  double T = h.horizon();
  int n = h.mesh->dim;
  out.rho = std::max(0.0, -h.min_curvature.front());
  MuResult mu = mu_entropy_inf(h.initial_slice(), 0.05 * T, 2.0 * T, 8, mu_opts);
  out.mu_lower = mu.lower();
  if (mu.residual * mu.interval_scale > 0.5) {
    out.upper = CheckReport::skipped("kernel_upper_bound", "mu interval too wide");
    out.lower = CheckReport::skipped("kernel_lower_bound", "mu interval too wide");
    return out;
  }

  const MetricSlice& slice0 = h.final_slice();
  PointSet base{{k.basepoint}, 0.0};
  Field dist0 = distance_field(slice0, base);

  double worst_upper = 0.0, worst_lower = 0.0;
  for (double s : s_values) {
    KernelSlice ks = eval_kernel(h, k, s, false);
    double tau = -ks.s;
    const MetricSlice slice = kernel_metric_slice(h, k, ks);
    Field v = volume_weights(slice);

    double bound_up = std::pow(4.0 * M_PI * tau, -0.5 * n) *
                      std::exp(out.rho * tau - out.mu_lower);
    double hmax = 0.0;
    for (std::size_t i = 0; i < ks.nu.size(); ++i)
      if (!ks.mask[i]) hmax = std::max(hmax, ks.nu[i] / v[i]);
    worst_upper = std::max(worst_upper, hmax / bound_up);

    // Curvature window integral int_0^tau sqrt(sigma) R(y, -sigma) dsigma
    // by the trapezoid rule over stored slices.
    std::int64_t nn = h.mesh->num_nodes();
    Field curv_int(nn, 0.0);
    std::size_t k_end = h.index_of(0.0), k_start = h.index_of(ks.s + k.base_time);
    Field R_prev = scalar_curvature(h.slices[k_end]);
    for (std::size_t kk = k_end; kk-- > k_start;) {
      Field R_here = scalar_curvature(h.slices[kk]);
      double sig1 = -h.times[kk + 1], sig2 = -h.times[kk];
      double w1 = std::sqrt(std::max(0.0, sig1)), w2 = std::sqrt(std::max(0.0, sig2));
      for (std::int64_t i = 0; i < nn; ++i)
        curv_int[i] += 0.5 * (w1 * R_prev[i] + w2 * R_here[i]) * (sig2 - sig1);
      R_prev = std::move(R_here);
    }

    for (std::size_t i = 0; i < ks.nu.size(); ++i) {
      if (ks.mask[i]) continue;
      double H = ks.nu[i] / v[i];
      double expo = -4.0 * dist0[i] * dist0[i] / tau - curv_int[i] / std::sqrt(tau) -
                    out.rho * tau + out.mu_lower;
      double bound_lo = std::pow(8.0 * M_PI * tau, -0.5 * n) * std::exp(expo);
      if (bound_lo <= 0.0 || H <= 0.0) continue;
      worst_lower = std::max(worst_lower, bound_lo / H);
    }
  }
  out.upper = CheckReport::make("kernel_upper_bound", worst_upper, 1.0, tolerance);
  out.upper.note = "sup_x H / sup-bound, over sampled s";
  out.lower = CheckReport::make("kernel_lower_bound", worst_lower, 1.0, tolerance);
  out.lower.note = "sup_y gaussian-lower-bound / H, over sampled s";
  return out;
}

AvgGaussianResult avg_gaussian_upper_check(const FlowHistory& h, const KernelHistory& k_x2,
                                           NodeIndex x1, NodeIndex x2, double s,
                                           double c_cap) {
  AvgGaussianResult out;
  KernelSlice ks = eval_kernel(h, k_x2, s, false);
  double tau = -ks.s;
  int n = h.mesh->dim;
  double r = std::sqrt(tau);

  const MetricSlice& slice0 = h.final_slice();
  const MetricSlice slice_s = kernel_metric_slice(h, k_x2, ks);
  PointSet ball1 = metric_ball(slice0, x1, r);
  PointSet ball2 = metric_ball(slice0, x2, r);

  Field v_s = volume_weights(slice_s);
  double num = 0.0, den = 0.0;
  for (NodeIndex i : ball1.nodes) {
    num += ks.nu[i];
    den += v_s[i];
  }
  double avg = num / den;

  double dist_s = geodesic_distance(slice_s, ball1, ball2) / stencil_anisotropy(n);

  auto passes = [&](double c) {
    return avg <= c * std::pow(tau, -0.5 * n) * std::exp(-dist_s * dist_s / (c * tau));
  };
  double lo = 1e-3, hi = c_cap;
  if (!passes(hi)) {
    out.c_prime_avg = std::numeric_limits<double>::infinity();
  } else {
    for (int it = 0; it < 80; ++it) {
      double mid = std::sqrt(lo * hi);
      (passes(mid) ? hi : lo) = mid;
    }
    out.c_prime_avg = hi;
  }

  PointSet p1{{x1}, 0.0}, p2{{x2}, 0.0};
  double d0 = geodesic_distance(slice0, p1, p2);
  out.c_prime_distort = (d0 > 0.0) ? dist_s / d0 : 0.0;

  out.report = CheckReport::make("avg_gaussian_upper", std::isfinite(out.c_prime_avg) ? 0.0 : 1.0,
                                 0.0, 0.0, ks.s, x2);
  out.report.note = "smallest C' (avg) = " + format_double(out.c_prime_avg) +
                    ", smallest C' (distortion) = " + format_double(out.c_prime_distort);
  return out;
}

std::vector<CheckReport> moment_bounds_check(const FlowHistory& h, const KernelHistory& k,
                                             double s, double C, double tolerance,
                                             MuOptions mu_opts) {
  KernelSlice ks = eval_kernel(h, k, s, false);
  double tau = -ks.s;
  int n = h.mesh->dim;
  const MetricSlice slice = kernel_metric_slice(h, k, ks);

  // Hypotheses: scalar curvature and entropy control at scale |s|.
  double minR = min_scalar_curvature(slice);
  bool hyp_R = minR * tau >= -C - 1e-12;
  MuResult mu = mu_entropy_inf(slice, 0.05 * tau, 2.0 * tau, 6, mu_opts);
  bool hyp_mu = mu.lower() >= -C;
  if (!hyp_R || !hyp_mu) {
    std::string why = !hyp_R ? "min R |s| below -C" : "mu interval below -C";
    return {CheckReport::skipped("moment_bounds", why)};
  }

  double m1 = nu_integral(ks, ks.f);
  double m2 = nu_integral(ks, ks.grad_f_sq);
  Field f2(ks.f.size());
  for (std::size_t i = 0; i < f2.size(); ++i) f2[i] = ks.f[i] * ks.f[i];
  double m3 = nu_integral(ks, f2);

  std::vector<CheckReport> reps;
  reps.push_back(CheckReport::make("moment_first_lower", 0.5 * n - C, m1, tolerance, ks.s,
                                   k.basepoint));
  reps.push_back(
      CheckReport::make("moment_first_upper", m1, 0.5 * n, tolerance, ks.s, k.basepoint));
  reps.push_back(CheckReport::make("moment_gradient", m2, (0.5 * n + C) / tau, tolerance,
                                   ks.s, k.basepoint));
  reps.push_back(CheckReport::make("moment_second", m3, 2.0 * (n + 2.0 * C) * (n + 2.0 * C),
                                   tolerance, ks.s, k.basepoint));
  reps.push_back(CheckReport::make("moment_variance_chain", m3, 2.0 * tau * m2 + m1 * m1,
                                   tolerance, ks.s, k.basepoint));
  return reps;
}

NashLipschitzResult nash_lipschitz_estimate(const FlowHistory& h, double s, int stride,
                                            KernelOptions opts, int workers) {
  const Mesh& m = *h.mesh;
  if (m.topology != Topology::PeriodicBox)
    throw std::invalid_argument("base-point Lipschitz scan needs a box mesh");
  int n = m.dim;
  std::int64_t nn = m.num_nodes();
  const MetricSlice& slice0 = h.final_slice();

  // Base-point grid: every stride-th node per axis.
  std::vector<NodeIndex> grid;
  std::array<int, 3> c = {0, 0, 0};
  for (c[0] = 0; c[0] < (n > 0 ? m.res[0] : 1); c[0] += stride)
    for (c[1] = 0; c[1] < (n > 1 ? m.res[1] : 1); c[1] += stride)
      for (c[2] = 0; c[2] < (n > 2 ? m.res[2] : 1); c[2] += stride)
        grid.push_back(m.node_at(c));

  NashLipschitzResult out;
  double tau = -s;

  // Forward kernels from (y, s) for y on the grid: each solve provides the
  // x-dependence of H(x, 0 | y, s) on the whole mesh.
  std::size_t k_s = h.index_of(s);
  double s_used = h.times[k_s];
  Field v_s = volume_weights(h.slices[k_s]);
  double cell_factor = std::pow(static_cast<double>(stride), n);

  std::vector<Field> I_contrib(grid.size());
  std::vector<double> cprime_local(grid.size(), 0.0);
  opts.force_numeric = true;
  parallel_for(static_cast<std::int64_t>(grid.size()), workers, [&](std::int64_t gi) {
    NodeIndex y = grid[gi];
    HeatField fw = forward_kernel(h, y, s_used, opts.policy);
    const Field& u0 = fw.fields.back();
    double lognorm = 0.5 * n * std::log(4.0 * M_PI * tau);
    Field fH(nn, 0.0), fx(nn, 0.0);
    std::vector<char> ok(nn, 0);
    for (std::int64_t i = 0; i < nn; ++i) {
      if (u0[i] > 1e-300) {
        ok[i] = 1;
        fx[i] = -std::log(u0[i]) - lognorm;
        fH[i] = fx[i] * u0[i];
      }
    }
    auto grad_fH = gradient_onb(slice0, fH);
    auto grad_f = gradient_onb(slice0, fx);
    Field contrib(nn, 0.0);
    double cp = 0.0;
    for (std::int64_t i = 0; i < nn; ++i) {
      if (!ok[i]) continue;
      double g2 = 0.0, gf2 = 0.0;
      for (int a = 0; a < n; ++a) {
        g2 += grad_fH[a][i] * grad_fH[a][i];
        gf2 += grad_f[a][i] * grad_f[a][i];
      }
      contrib[i] = std::sqrt(g2) * v_s[y] * cell_factor;
      if (u0[i] > 1e-12 * std::pow(tau, -0.5 * n)) {
        // Smallest C' with C'^2 + C' f - |grad_x f|^2 |s| >= 0 at this point.
        double G = gf2 * tau;
        double root = 0.5 * (-fx[i] + std::sqrt(fx[i] * fx[i] + 4.0 * G));
        cp = std::max(cp, root);
      }
    }
    I_contrib[gi] = std::move(contrib);
    cprime_local[gi] = cp;
  });

  Field I_total(nn, 0.0);
  for (const Field& c2 : I_contrib)
    for (std::int64_t i = 0; i < nn; ++i) I_total[i] += c2[i];
  double I_max = *std::max_element(I_total.begin(), I_total.end());
  out.grad_l1_const = I_max * std::sqrt(tau);
  out.c_prime_grad = *std::max_element(cprime_local.begin(), cprime_local.end());
  out.grad_bound_report = CheckReport::make("basepoint_gradient_bound", 0.0,
                                            out.c_prime_grad, 0.0, s_used);
  out.grad_bound_report.note =
      "smallest C' with |grad_x f|^2 <= C'(C'+f)/|s| = " + format_double(out.c_prime_grad);

  // Adjoint kernels on the grid give N_x; difference quotients over grid
  // neighbors give the empirical Lipschitz constant.
  std::vector<double> Nvals(grid.size(), 0.0);
  parallel_for(static_cast<std::int64_t>(grid.size()), workers, [&](std::int64_t gi) {
    KernelHistory bk = solve_conjugate_kernel(h, grid[gi], opts);
    KernelSlice ks = eval_kernel(h, bk, s_used, false);
    Nvals[gi] = pointed_nash_moment(kernel_metric_slice(h, bk, ks), ks);
  });

  int per_axis[3] = {1, 1, 1};
  for (int a = 0; a < n; ++a) per_axis[a] = (m.res[a] + stride - 1) / stride;
  auto grid_index = [&](std::array<int, 3> g) {
    for (int a = 0; a < n; ++a) g[a] = ((g[a] % per_axis[a]) + per_axis[a]) % per_axis[a];
    return (g[0] * per_axis[1] + g[1]) * per_axis[2] + g[2];
  };
  double lip = 0.0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    auto cg = m.coords_of(grid[gi]);
    std::array<int, 3> g = {cg[0] / stride, cg[1] / stride, cg[2] / stride};
    for (int a = 0; a < n; ++a) {
      std::array<int, 3> gnb = g;
      gnb[a] += 1;
      std::size_t gj = static_cast<std::size_t>(grid_index(gnb));
      NodeIndex xj = grid[gj];
      double seg = stride * m.spacing(a);
      if (h.backend == Backend::Conformal)
        seg *= 0.5 * (std::exp(slice0.u[grid[gi]]) + std::exp(slice0.u[xj]));
      lip = std::max(lip, std::abs(Nvals[gi] - Nvals[gj]) / seg);
    }
  }
  out.lipschitz_const = lip;
  out.lipschitz_scaled = lip * std::sqrt(tau);
  return out;
}

// --- batteries ---------------------------------------------------------------

Field battery_test_field(const Mesh& mesh, std::uint64_t seed) {
  if (mesh.topology == Topology::PeriodicBox) {
    int kmax = std::max(1, std::min(mesh.res[0] / 4, 6));
    return band_limited_field(mesh, kmax, 1.0, seed);
  }
  // Zonal band-limited field: random low Legendre modes.
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
  };
  int lmax = std::max(2, std::min(mesh.degree / 4, 12));
  std::vector<double> coeffs(lmax + 1, 0.0);
  for (int l = 1; l <= lmax; ++l) coeffs[l] = uniform() - 0.5;
  Field f = mesh.synthesize(coeffs);
  double fmax = 0.0;
  for (double x : f) fmax = std::max(fmax, std::abs(x));
  if (fmax > 0.0)
    for (double& x : f) x /= fmax;
  return f;
}

Field coordinate_field(const Mesh& mesh, NodeIndex x0, int axis) {
  std::int64_t nn = mesh.num_nodes();
  Field z(nn, 0.0);
  double x0c = mesh.coords_of(x0)[axis] * mesh.spacing(axis);
  for (std::int64_t i = 0; i < nn; ++i)
    z[i] = mesh.wrap_delta(mesh.coords_of(i)[axis] * mesh.spacing(axis), x0c, axis);
  return z;
}

std::vector<CheckReport> poincare_battery(const FlowHistory& h, const KernelHistory& k,
                                          double s, int count, std::uint64_t seed,
                                          double tolerance) {
  KernelSlice ks = eval_kernel(h, k, s, false);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  std::vector<CheckReport> out(count);
  for (int j = 0; j < count; ++j) {
    TestFunction tf{battery_test_field(*h.mesh, seed + j), TestFunction::Normalization::ZeroMean};
    out[j] = poincare_check(slice, ks, tf, tolerance);
    out[j].note = "battery #" + std::to_string(j);
  }
  return out;
}

std::vector<CheckReport> logsobolev_battery(const FlowHistory& h, const KernelHistory& k,
                                            double s, int count, std::uint64_t seed,
                                            double tolerance) {
  KernelSlice ks = eval_kernel(h, k, s, false);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  std::vector<CheckReport> out(count);
  for (int j = 0; j < count; ++j) {
    Field f = battery_test_field(*h.mesh, seed + 1000 + j);
    for (double& x : f) x += 1.5;  // keep the profile positive and nontrivial
    TestFunction tf{std::move(f), TestFunction::Normalization::UnitL2Nu};
    out[j] = logsobolev_check(slice, ks, tf, tolerance);
    out[j].note = "battery #" + std::to_string(j);
  }
  return out;
}

std::vector<CheckReport> concentration_battery(const FlowHistory& h, const KernelHistory& k,
                                               double s, int pairs, std::uint64_t seed,
                                               double tolerance) {
  KernelSlice ks = eval_kernel(h, k, s, false);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  const Mesh& m = *h.mesh;
  std::mt19937_64 rng(seed);
  std::int64_t nn = m.num_nodes();
  std::vector<CheckReport> out(pairs);
  for (int j = 0; j < pairs; ++j) {
    PointSet a, b;
    a.t = b.t = slice.t;
    if (m.topology == Topology::SphereSpectral) {
      // Polar caps with a random angular gap.
      int nr = m.rings();
      int ia = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(nr / 3));
      int ib = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(nr / 3));
      for (int i = 0; i < ia; ++i) a.nodes.push_back(i);
      for (int i = 0; i < ib; ++i) b.nodes.push_back(nr - 1 - i);
    } else {
      NodeIndex ca = static_cast<NodeIndex>(rng() % static_cast<std::uint64_t>(nn));
      NodeIndex cb = static_cast<NodeIndex>(rng() % static_cast<std::uint64_t>(nn));
      double rmax = 0.25 * m.side[0];
      double ra = (0.1 + 0.9 * static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0)) * rmax;
      double rb = (0.1 + 0.9 * static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0)) * rmax;
      a = metric_ball(slice, ca, ra);
      b = metric_ball(slice, cb, rb);
    }
    out[j] = concentration_check(slice, ks, a, b, tolerance);
    out[j].note = "battery #" + std::to_string(j);
  }
  return out;
}

}  // namespace rflab
