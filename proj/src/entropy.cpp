#include "rflab/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rflab {

namespace {

double dot_v(const Field& a, const Field& b, const Field& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * v[i];
  return s;
}

}  // namespace

WFunctionalResult w_functional_full(const MetricSlice& slice, const Field& f, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("w_functional needs tau > 0");
  int n = slice.dim();
  std::int64_t nn = slice.num_nodes();
  Field v = volume_weights(slice);
  double lognorm = 0.5 * n * std::log(4.0 * M_PI * tau);

  double mass = 0.0;
  for (std::int64_t i = 0; i < nn; ++i) {
    double w = std::exp(-f[i] - lognorm);
    if (!std::isfinite(w)) throw SolveError("w_functional: non-normalizable potential");
    mass += w * v[i];
  }
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw SolveError("w_functional: non-normalizable potential");
  double shift = std::log(mass);

  Field fs(nn);
  for (std::int64_t i = 0; i < nn; ++i) fs[i] = f[i] + shift;
  Field gsq = gradient_squared(slice, fs);
  Field R = scalar_curvature(slice);

  double val = 0.0, excluded = 0.0;
  for (std::int64_t i = 0; i < nn; ++i) {
    double w = std::exp(-fs[i] - lognorm) * v[i];
    if (w < 1e-300) {
      excluded += w;
      continue;
    }
    val += (tau * (gsq[i] + R[i]) + fs[i] - n) * w;
  }
  return {val, shift, excluded};
}

double w_functional(const MetricSlice& slice, const Field& f, double tau) {
  return w_functional_full(slice, f, tau).value;
}

double pointed_w(const MetricSlice& slice, const KernelSlice& ks) {
  int n = slice.dim();
  double tau = -ks.s;
  Field R = scalar_curvature(slice);
  double val = 0.0;
  for (std::size_t i = 0; i < ks.nu.size(); ++i) {
    if (ks.mask[i]) continue;
    val += (tau * (ks.grad_f_sq[i] + R[i]) + ks.f[i] - n) * ks.nu[i];
  }
  return val;
}

double pointed_nash_moment(const MetricSlice& slice, const KernelSlice& ks) {
  int n = slice.dim();
  double val = 0.0;
  for (std::size_t i = 0; i < ks.nu.size(); ++i) {
    if (ks.mask[i]) continue;
    val += ks.f[i] * ks.nu[i];
  }
  return val - 0.5 * n;
}

double soliton_defect_slice(const MetricSlice& slice, const KernelSlice& ks) {
  if (ks.hess_f.empty())
    throw std::invalid_argument("soliton defect needs a Hessian-bearing kernel slice");
  int n = slice.dim();
  double tau = -ks.s;
  Field R = scalar_curvature(slice);
  bool curved = slice.backend != Backend::Flat;  // Ric = (R/2) g on surfaces
  double val = 0.0;
  int ndiag = n;  // sphere Hessians carry exactly the two diagonal components
  for (std::size_t i = 0; i < ks.nu.size(); ++i) {
    if (ks.mask[i]) continue;
    double ric = curved ? 0.5 * R[i] : 0.0;
    double a2 = 0.0;
    for (int a = 0; a < ndiag; ++a) {
      double comp = ric + ks.hess_f[a][i] - 1.0 / (2.0 * tau);
      a2 += comp * comp;
    }
    for (std::size_t c = ndiag; c < ks.hess_f.size(); ++c)
      a2 += 2.0 * ks.hess_f[c][i] * ks.hess_f[c][i];
    val += a2 * ks.nu[i];
  }
  return val;
}

namespace {

struct CurvePoint {
  double s, W, N, D;
};

CurvePoint eval_curve_point(const FlowHistory& h, const KernelHistory& k, double s,
                            bool with_defect) {
  KernelSlice ks = eval_kernel(h, k, s, with_defect);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  CurvePoint p;
  p.s = ks.s;
  p.W = pointed_w(slice, ks);
  p.N = pointed_nash_moment(slice, ks);
  p.D = with_defect ? soliton_defect_slice(slice, ks) : 0.0;
  return p;
}

double interp_channel(const std::vector<double>& xs, const std::vector<double>& ys,
                      double x) {
  if (xs.empty()) throw std::invalid_argument("empty curve channel");
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t j = static_cast<std::size_t>(it - xs.begin());
  double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return (1.0 - t) * ys[j - 1] + t * ys[j];
}

}  // namespace

double EntropyCurve::interp_W(double sv) const { return interp_channel(dense_s, dense_W, sv); }
double EntropyCurve::interp_N(double sv) const { return interp_channel(dense_s, dense_N, sv); }

EntropyCurve pointed_entropy_curve(const FlowHistory& h, const KernelHistory& k,
                                   CurveOptions opts) {
  EntropyCurve c;
  c.basepoint = k.basepoint;
  double T = h.horizon();
  double s_lo = -T;
  double s_hi = k.analytic ? std::min(-10.0 * k.eps0, -T * 1e-7) : -10.0 * k.eps0;

  if (k.analytic) {
    int M = std::max(16, opts.analytic_dense);
    for (int j = 0; j < M; ++j) {
      double x = static_cast<double>(j) / (M - 1);
      double s = -std::exp(std::log(-s_lo) + x * (std::log(-s_hi) - std::log(-s_lo)));
      CurvePoint p = eval_curve_point(h, k, s, opts.with_defect);
      c.dense_s.push_back(p.s);
      c.dense_W.push_back(p.W);
      c.dense_N.push_back(p.N);
      c.dense_D.push_back(p.D);
    }
  } else {
    for (double s : k.sample_s) {
      if (s > s_hi) break;
      CurvePoint p = eval_curve_point(h, k, s, opts.with_defect);
      c.dense_s.push_back(p.s);
      c.dense_W.push_back(p.W);
      c.dense_N.push_back(p.N);
      c.dense_D.push_back(p.D);
    }
  }
  if (c.dense_s.empty())
    throw SolveError("entropy curve: no usable samples above the mollification window");

  for (int j = 0; j < opts.samples; ++j) {
    double s = -T * std::pow(2.0, -j);
    if (s > s_hi) break;
    c.s.push_back(s);
    c.W.push_back(interp_channel(c.dense_s, c.dense_W, s));
    c.N.push_back(interp_channel(c.dense_s, c.dense_N, s));
    c.D.push_back(interp_channel(c.dense_s, c.dense_D, s));
  }
  return c;
}

NashPair nash_entropy(const FlowHistory& h, const KernelHistory& k, double s) {
  int n = h.mesh->dim;
  NashPair out;

  KernelSlice ks = eval_kernel(h, k, s, false);
  const MetricSlice slice = kernel_metric_slice(h, k, ks);
  out.moment = pointed_nash_moment(slice, ks);
  double s_used = ks.s;

  auto W_at = [&](double r) { return eval_curve_point(h, k, r, false).W; };

  double integral = 0.0;
  if (k.analytic) {
    // Simpson in x after r = -|s| e^{-x}; truncate where W has decayed.
    double delta = std::max(-s_used * 1e-8, 10.0 * k.eps0);
    double X = std::log(-s_used / delta);
    int M = 512;  // even
    double dx = X / M;
    double acc = 0.0;
    for (int j = 0; j <= M; ++j) {
      double x = j * dx;
      double r = s_used * std::exp(-x);
      double wgt = (j == 0 || j == M) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      acc += wgt * W_at(r) * (-r);
    }
    integral = acc * dx / 3.0;
    // Quadratic tail through W(-delta), W(-2 delta) with W(0) = 0.
    double W1 = W_at(-delta), W2 = W_at(-2.0 * delta);
    integral += -delta * (W2 - 4.0 * W1) / 4.0 + delta * (W2 - 2.0 * W1) / 6.0;
  } else {
    // Trapezoid over the stored samples in [s, -10 eps0], then the fitted tail.
    double s_hi = -10.0 * k.eps0;
    std::vector<double> xs, ws;
    for (double sv : k.sample_s) {
      if (sv < s_used - 1e-15 || sv > s_hi) continue;
      xs.push_back(sv);
      ws.push_back(W_at(sv));
    }
    if (xs.size() < 3) throw SolveError("nash_entropy: too few samples above 10 eps0");
    for (std::size_t j = 0; j + 1 < xs.size(); ++j)
      integral += 0.5 * (ws[j] + ws[j + 1]) * (xs[j + 1] - xs[j]);
    // Tail over [-10 eps0, 0]: fit W = a r + b r^2 on the last stretch.
    double delta = -xs.back();
    double W1 = ws.back();
    double W2 = interp_channel(xs, ws, -2.0 * delta);
    integral += -delta * (W2 - 4.0 * W1) / 4.0 + delta * (W2 - 2.0 * W1) / 6.0;
  }
  out.time_average = integral / (-s_used);
  out.discrepancy = std::abs(out.time_average - out.moment) /
                    std::max({std::abs(out.time_average), std::abs(out.moment), 0.5 * n});
  return out;
}

double soliton_defect(const FlowHistory& h, const KernelHistory& k, double r) {
  KernelSlice ks = eval_kernel(h, k, r, true);
  return soliton_defect_slice(kernel_metric_slice(h, k, ks), ks);
}

// --- mu minimization ---------------------------------------------------------

namespace {

double mu_objective(const MetricSlice& slice, const Field& R, const Field& v,
                    const Field& phi, double tau, int n) {
  Field lap = laplace_beltrami(slice, phi);
  double dirichlet = 0.0, rterm = 0.0, ent = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    dirichlet -= phi[i] * lap[i] * v[i];
    rterm += R[i] * phi[i] * phi[i] * v[i];
    double p2 = phi[i] * phi[i];
    if (p2 > 1e-300) ent += p2 * std::log(p2) * v[i];
  }
  return tau * (4.0 * dirichlet + rterm) - ent - n - 0.5 * n * std::log(4.0 * M_PI * tau);
}

void normalize_l2(Field& phi, const Field& v) {
  double m = dot_v(phi, phi, v);
  double c = 1.0 / std::sqrt(m);
  for (double& x : phi) x *= c;
}

MuResult mu_descend(const MetricSlice& slice, const Field& R, const Field& v, Field phi,
                    double tau, const MuOptions& opts) {
  int n = slice.dim();
  normalize_l2(phi, v);
  double F = mu_objective(slice, R, v, phi, tau, n);
  double eta = 0.1;
  MuResult res;
  res.tau = tau;
  res.interval_scale = opts.interval_scale;

  int it = 0;
  double resid = 0.0;
  for (; it < opts.max_iterations; ++it) {
    Field lap = laplace_beltrami(slice, phi);
    Field g(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
      double p2 = phi[i] * phi[i];
      double logterm = (p2 > 1e-300) ? std::log(p2) : 0.0;
      g[i] = -8.0 * tau * lap[i] + 2.0 * tau * R[i] * phi[i] -
             2.0 * phi[i] * logterm - 2.0 * phi[i];
    }
    double gp = dot_v(g, phi, v);
    for (std::size_t i = 0; i < phi.size(); ++i) g[i] -= gp * phi[i];
    resid = std::sqrt(std::max(0.0, dot_v(g, g, v)));
    if (resid < opts.grad_tol * std::max(1.0, std::abs(F))) break;

    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Field cand(phi.size());
      for (std::size_t i = 0; i < phi.size(); ++i) cand[i] = phi[i] - eta * g[i];
      normalize_l2(cand, v);
      double Fc = mu_objective(slice, R, v, cand, tau, n);
      if (Fc <= F - 1e-4 * eta * resid * resid) {
        phi = std::move(cand);
        F = Fc;
        eta *= 1.8;
        moved = true;
        break;
      }
      eta *= 0.5;
      if (eta < 1e-14) break;
    }
    if (!moved) break;
  }
  res.phi = std::move(phi);
  res.value = F;
  res.residual = resid;
  res.iterations = it;
  res.converged = resid < opts.grad_tol * std::max(1.0, std::abs(F));
  return res;
}

}  // namespace

MuResult mu_entropy(const MetricSlice& slice, double tau, MuOptions opts) {
  if (!(tau > 0.0)) throw std::invalid_argument("mu_entropy needs tau > 0");
  Field R = scalar_curvature(slice);
  Field v = volume_weights(slice);
  double V = std::accumulate(v.begin(), v.end(), 0.0);

  // The constant is a critical point, so a localized start is required to
  // reach the small-tau branch; keep whichever descent ends lower.
  Field phi_const(slice.num_nodes(), 1.0 / std::sqrt(V));
  Field d2 = frozen_dist_sq(slice, slice.mesh->center_node());
  Field phi_gauss(slice.num_nodes());
  for (std::size_t i = 0; i < phi_gauss.size(); ++i)
    phi_gauss[i] = std::exp(-d2[i] / (4.0 * tau));

  MuResult a = mu_descend(slice, R, v, std::move(phi_const), tau, opts);
  MuResult b = mu_descend(slice, R, v, std::move(phi_gauss), tau, opts);
  return (a.value <= b.value) ? a : b;
}

MuResult mu_entropy_inf(const MetricSlice& slice, double tau_lo, double tau_hi, int grid,
                        MuOptions opts) {
  if (!(tau_lo > 0.0) || !(tau_hi > tau_lo)) throw std::invalid_argument("bad tau range");
  MuResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid; ++j) {
    double x = (grid == 1) ? 0.0 : static_cast<double>(j) / (grid - 1);
    double tau = std::exp(std::log(tau_lo) + x * (std::log(tau_hi) - std::log(tau_lo)));
    MuResult r = mu_entropy(slice, tau, opts);
    if (r.value < best.value) best = std::move(r);
  }
  return best;
}

CheckReport no_local_collapse_check(const FlowHistory& h, double t, NodeIndex x,
                                    double r, double C, MuOptions opts) {
  const MetricSlice& slice = h.slice_at(t);
  int n = slice.dim();
  double kappa = std::exp(-(std::pow(2.0, n + 4) + 2.0 * C));

  // Hypothesis 1: scalar curvature bound on the ball.
  PointSet ball = metric_ball(slice, x, r);
  Field R = scalar_curvature(slice);
  double supR = -std::numeric_limits<double>::infinity();
  for (NodeIndex i : ball.nodes) supR = std::max(supR, R[i]);
  if (supR > C / (r * r))
    return CheckReport::skipped("no_local_collapse",
                                "hypothesis failed: sup_B R > C r^-2");

  // Hypothesis 2: entropy lower bound on the initial slice over the rho-window.
  double T = h.horizon();
  for (double rho : {0.25 * r, 0.5 * r, r}) {
    double tau = t + T + rho * rho;
    if (!(tau > 0.0)) continue;
    MuResult m = mu_entropy(h.initial_slice(), tau, opts);
    if (m.lower() < -C)
      return CheckReport::skipped("no_local_collapse",
                                  "hypothesis failed: mu interval below -C");
  }

  double vol = 0.0;
  Field v = volume_weights(slice);
  for (NodeIndex i : ball.nodes) vol += v[i];
  CheckReport rep =
      CheckReport::make("no_local_collapse", kappa * std::pow(r, n), vol, 0.0, t, x);
  rep.note = "kappa r^n <= |B_r|, kappa = " + format_double(kappa);
  return rep;
}

CheckReport unweighted_logsobolev_check(const FlowHistory& h, double t,
                                        const Field& phi_raw, const MuResult& mu0,
                                        double tolerance) {
  if (!(t < 0.0)) throw std::invalid_argument("needs a slice with t < 0");
  const MetricSlice& slice = h.slice_at(t);
  int n = slice.dim();
  double tau = -t;
  Field v = volume_weights(slice);
  Field phi = phi_raw;
  normalize_l2(phi, v);
  Field R = scalar_curvature(slice);
  Field lap = laplace_beltrami(slice, phi);
  double lhs = 0.0, dirichlet = 0.0, rterm = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    double p2 = phi[i] * phi[i];
    if (p2 > 1e-300) lhs += p2 * std::log(p2) * v[i];
    dirichlet -= phi[i] * lap[i] * v[i];
    rterm += R[i] * p2 * v[i];
  }
  double rhs = tau * (4.0 * dirichlet + rterm) - 0.5 * n * std::log(4.0 * M_PI * tau) - n -
               mu0.lower();
  CheckReport rep = CheckReport::make("unweighted_logsobolev", lhs, rhs, tolerance, t);
  rep.note = "mu0 interval lower end " + format_double(mu0.lower());
  return rep;
}

}  // namespace rflab
