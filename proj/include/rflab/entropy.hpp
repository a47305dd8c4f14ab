#pragma once

#include "rflab/heatkernel.hpp"

#include <vector>

namespace rflab {

struct WFunctionalResult {
  double value = 0.0;
  double shift = 0.0;          // additive normalization applied to f
  double excluded_mass = 0.0;  // nu-mass of underflow-masked nodes
};

/// Weighted entropy of (g, f, tau): integral of
/// [tau (|grad f|^2 + R) + f - n] against (4 pi tau)^{-n/2} e^{-f} dvol.
/// f is shifted internally so the weight has unit mass; the shift is reported.
WFunctionalResult w_functional_full(const MetricSlice& slice, const Field& f, double tau);
double w_functional(const MetricSlice& slice, const Field& f, double tau);

/// Kernel-path evaluations against the measure carried by a KernelSlice.
double pointed_w(const MetricSlice& slice, const KernelSlice& ks);
double pointed_nash_moment(const MetricSlice& slice, const KernelSlice& ks);
double soliton_defect_slice(const MetricSlice& slice, const KernelSlice& ks);

/// Sampled s -> (W_x, N_x, defect) along one kernel. Published samples lie on
/// a geometric grid |s_j| = |s_max| 2^{-j} clipped to |s| >= 10 eps0; dense
/// channels carry every evaluated time for quadrature and monotonicity scans.
struct EntropyCurve {
  NodeIndex basepoint = 0;
  std::vector<double> s, W, N, D;
  std::vector<double> dense_s, dense_W, dense_N, dense_D;

  double interp_W(double s) const;
  double interp_N(double s) const;
};

struct CurveOptions {
  int samples = 12;
  bool with_defect = true;
  int analytic_dense = 160;  // dense points for closed-form kernels
};

EntropyCurve pointed_entropy_curve(const FlowHistory& h, const KernelHistory& k,
                                   CurveOptions opts = {});

/// The two routes to the Nash entropy: time average of W_x over [s, 0] and
/// the first moment of the potential minus n/2.
struct NashPair {
  double time_average = 0.0;
  double moment = 0.0;
  double discrepancy = 0.0;  // relative, floored at the n/2 scale
};
NashPair nash_entropy(const FlowHistory& h, const KernelHistory& k, double s);

double soliton_defect(const FlowHistory& h, const KernelHistory& k, double r);

/// Result of the constrained minimization defining mu(g, tau). Projected
/// gradient descent yields an upper bound; the first-order residual converts
/// it into the reported two-sided interval [value - residual*scale, value].
struct MuResult {
  double tau = 0.0;
  Field phi;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double interval_scale = 1.0;

  double lower() const { return value - residual * interval_scale; }
};

struct MuOptions {
  int max_iterations = 1500;
  double grad_tol = 1e-8;
  double interval_scale = 1.0;
};

MuResult mu_entropy(const MetricSlice& slice, double tau, MuOptions opts = {});
/// min of mu over a geometric tau-grid in [tau_lo, tau_hi].
MuResult mu_entropy_inf(const MetricSlice& slice, double tau_lo, double tau_hi,
                        int grid, MuOptions opts = {});

/// Volume ratio lower bound |B_r(x,t)| >= kappa r^n with
/// kappa = exp(-(2^{n+4} + 2C)), under the scalar curvature and entropy
/// hypotheses; returns Skipped when a hypothesis cannot be certified.
CheckReport no_local_collapse_check(const FlowHistory& h, double t, NodeIndex x,
                                    double r, double C, MuOptions opts = {});

/// Unweighted log-Sobolev inequality at slice time t < 0 (tau = -t,
/// reference entropy mu0 computed on the initial slice at tau = horizon).
CheckReport unweighted_logsobolev_check(const FlowHistory& h, double t,
                                        const Field& phi_raw, const MuResult& mu0,
                                        double tolerance);

}  // namespace rflab
