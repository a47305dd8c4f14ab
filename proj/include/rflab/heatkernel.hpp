#pragma once

#include "rflab/flow.hpp"
#include "rflab/report.hpp"

#include <optional>
#include <vector>

namespace rflab {

/// A space-time scalar field sampled on (a contiguous range of) the flow's
/// stored time grid.
struct HeatField {
  enum class Direction { Forward, Adjoint, Generic };
  Direction direction = Direction::Generic;
  std::vector<double> times;
  std::vector<Field> fields;

  const Field& at_time(double t) const;
  std::size_t index_of(double t) const;
};

struct KernelOptions {
  bool force_numeric = false;  // run the PDE solver even on analytic backends
  int store_stride = 0;        // sample decimation; 0 picks one automatically
  int max_samples = 400;
  double mass_tol = 1e-6;      // per-slice drift tolerance (numeric path)
  StepPolicy policy;
};

/// Conjugate heat kernel along a flow, based at (x0, base_time). Numeric
/// kernels advect the mass density w = H dvol with the flat-stencil
/// divergence form, which conserves total mass exactly; analytic backends
/// (flat image sums, sphere Legendre modes) are evaluated on demand.
struct KernelHistory {
  Backend backend = Backend::Flat;
  NodeIndex basepoint = 0;
  double base_time = 0.0;
  double eps0 = 0.0;       // mollification time; entropies use |s| >= 10 eps0
  bool analytic = false;

  // Stored samples (numeric path), ascending in s, all s <= -eps0.
  std::vector<double> sample_s;
  std::vector<Field> samples;  // nu-weights w_i per sample, sum == 1
  std::vector<double> sample_mass;

  double earliest_s() const;
  double latest_s() const;  // closest usable time to 0 (== -eps0 for analytic)
  std::size_t nearest_sample(double s) const;
};

/// One evaluated kernel slice: nu-weights plus the derived potential and its
/// derivatives in an orthonormal frame. Nodes where H underflows (or a
/// truncated spectral sum goes nonpositive) are masked out of nu-integrals;
/// their nu-mass is below 1e-300.
struct KernelSlice {
  double s = 0.0;
  Field nu;                 // H dvol weights
  Field f;                  // potential, H = (4 pi |s|)^{-n/2} e^{-f}
  std::vector<char> mask;   // 1 = excluded
  std::vector<Field> grad_f;   // ONB components
  Field grad_f_sq;
  std::vector<Field> hess_f;   // ONB packed [11,22,33,12,13,23] (dim-truncated)
  double mass = 0.0;
};

KernelHistory solve_conjugate_kernel(const FlowHistory& h, NodeIndex x0,
                                     KernelOptions opts = {});
// Same solver with the pole at an arbitrary stored slice time (adjoint
// duality checks need interior base times).
KernelHistory solve_conjugate_kernel_at(const FlowHistory& h, NodeIndex x0,
                                        double base_time, KernelOptions opts = {});

/// Evaluate the kernel at time s (analytic backends: closed form at exactly
/// s; numeric: nearest stored sample). Hessians are filled only on request.
KernelSlice eval_kernel(const FlowHistory& h, const KernelHistory& k, double s,
                        bool need_hessian = false);

/// Metric slice consistent with a kernel evaluation: analytic backends
/// rebuild the exact slice at ks.s, numeric kernels return the stored one.
MetricSlice kernel_metric_slice(const FlowHistory& h, const KernelHistory& k,
                                const KernelSlice& ks);

/// Forward heat evolution u_t = Laplace(u) coupled to the flow, from time s
/// to time t over the stored grid. forward_evolve returns the final field.
Field forward_evolve(const FlowHistory& h, const Field& u_s, double s, double t,
                     StepPolicy policy = {});
HeatField forward_evolve_history(const FlowHistory& h, const Field& u_s, double s,
                                 double t, StepPolicy policy = {});

/// Forward fundamental solution with (mollified) pole at (y, s), evaluated on
/// the whole grid: one solve serves every observation point simultaneously.
HeatField forward_kernel(const FlowHistory& h, NodeIndex y, double s,
                         StepPolicy policy = {});

double kernel_eps0(const FlowHistory& h, StepPolicy policy = {});

/// Rescaled kernel matching parabolic_rescale of the flow: sample times scale
/// by 1/lambda^2 and the nu-weights are unchanged (they are scale invariant).
KernelHistory parabolic_rescale(const KernelHistory& k, double lambda);

/// Adjoint-vs-forward agreement of the kernel: the kernel based at (x, t)
/// evaluated at (y, s) against the forward fundamental solution from (y, s)
/// evaluated at (x, t).
CheckReport duality_check(const FlowHistory& h, NodeIndex x, double t, NodeIndex y,
                          double s, double tolerance, KernelOptions opts = {});

/// Mass of the kernel family over its base point at fixed pole (y, s):
/// integral over x of H(x, t | y, s) dvol_{g(t)} stays below e^{rho (t-s)}
/// with rho the sup of the negative part of the initial scalar curvature.
CheckReport mass_growth_check(const FlowHistory& h, NodeIndex y, double s,
                              double tolerance);

/// Residual of the parabolic Bochner identity for a forward solution u:
/// (d/dt - Laplace)(|grad u|^2 / 2) + |Hess u|^2, per stored step.
struct BochnerResult {
  std::vector<double> times;
  std::vector<double> l2_norm;
  double worst() const;
};
BochnerResult bochner_residual(const FlowHistory& h, const HeatField& u);

/// Space-time integration-by-parts identity between the forward and adjoint
/// heat operators on closed slices.
CheckReport ibp_identity_check(const FlowHistory& h, const HeatField& u,
                               const HeatField& v, double t1, double t2,
                               double tolerance);

/// Residual of the commutator identity (d/dt - Laplace) phi(u) =
/// -phi''(u) |grad u|^2 for caloric u; phi in {square, xlogx}.
enum class CommutatorVariant { Square, XLogX };
double commutator_residual(const FlowHistory& h, const HeatField& u,
                           CommutatorVariant variant);

/// Finite-difference check of d/dt P_{t,0} U_t = P_{t,0} (d/dt - Laplace) U_t
/// for a one-parameter test family U_t = a(t) psi.
CheckReport homotopy_derivative_check(const FlowHistory& h, const KernelHistory& k,
                                      const Field& psi, double tolerance);

}  // namespace rflab
