#pragma once

#include "rflab/entropy.hpp"

#include <array>
#include <vector>

namespace rflab {

struct TestFunction {
  enum class Normalization { ZeroMean, UnitL2Nu, Raw };
  Field values;
  Normalization normalization = Normalization::Raw;
  // Closed-form |grad phi|^2 when the caller knows it exactly (equality-case
  // saturation needs gradients beyond stencil accuracy). Empty = use the
  // discrete gradient.
  Field analytic_grad_sq;
  // Caller-certified Lipschitz constant; <= 0 means rescale by the max
  // discrete gradient instead.
  double certified_lipschitz = 0.0;
};

/// Variance bound against the kernel measure: int phi^2 dnu <= 2|s| int
/// |grad phi|^2 dnu for nu-centered phi.
CheckReport poincare_check(const MetricSlice& slice, const KernelSlice& ks,
                           const TestFunction& phi, double tolerance);

/// Entropy bound: int phi^2 log phi^2 dnu <= 4|s| int |grad phi|^2 dnu for
/// phi >= 0 with unit nu-mass of phi^2.
CheckReport logsobolev_check(const MetricSlice& slice, const KernelSlice& ks,
                             const TestFunction& phi, double tolerance);

/// nu(A) nu(B) <= exp(-dist(A,B)^2 / (8|s|)). The shortest-path distance can
/// only overestimate; it is divided by the documented stencil anisotropy so
/// the exponent stays a certified lower bound on the true distance.
CheckReport concentration_check(const MetricSlice& slice, const KernelSlice& ks,
                                const PointSet& a, const PointSet& b, double tolerance);

struct HerbstResult {
  std::vector<double> lambda;
  std::vector<double> U;  // log-moment transform U(l) = log(int e^{l F} dnu)/l
  CheckReport derivative_report;  // dU/dlambda <= |s|
  CheckReport mgf_report;         // int e^{l F} dnu <= e^{|s| l^2}
};
HerbstResult herbst_transform(const MetricSlice& slice, const KernelSlice& ks,
                              const TestFunction& f, const std::vector<double>& lambda_grid,
                              double tolerance);

/// Two-sided quadrature of the semigroup homotopy identity
///   int phi(u) dnu - phi(int u dnu) = int_s^0 P_{t0}(phi''(u_t)|grad u_t|^2)(x0) dt
/// for phi = x^2 or x log x (u > 0 for the latter).
enum class HomotopyVariant { Square, XLogX };
CheckReport homotopy_identity_check(const FlowHistory& h, NodeIndex x0, const Field& u_s,
                                    double s, HomotopyVariant variant, double tolerance,
                                    KernelOptions opts = {});

/// The gradient interpolation behind the homotopy bound, evaluated at (x0, 0):
///   |grad P_{s0} u|^2 = P_{s0}(|grad u|^2) - 2 int_s^0 P_{r0}|Hess P_{sr} u|^2 dr.
CheckReport gradient_interpolation_check(const FlowHistory& h, NodeIndex x0,
                                         const Field& u_s, double s, double tolerance,
                                         KernelOptions opts = {});

/// Spatial Harnack estimate for positive forward solutions:
/// |grad sqrt(log(sup u / u))| <= 1/sqrt(t - t1) on (t1, t2].
CheckReport zhang_gradient_check(const FlowHistory& h, const HeatField& u, double t1,
                                 double t2, double tolerance);

/// Kernel sup bound and Gaussian lower bound, evaluated against the computed
/// kernel at its stored sample times. Skipped when the mu interval is too
/// wide to certify the hypotheses.
struct KernelBoundsResult {
  CheckReport upper;
  CheckReport lower;
  double rho = 0.0;
  double mu_lower = 0.0;
};
KernelBoundsResult kernel_bounds_check(const FlowHistory& h, const KernelHistory& k,
                                       const std::vector<double>& s_values,
                                       double tolerance, MuOptions mu_opts = {});

/// Ball-averaged Gaussian upper bound and the distance distortion estimate;
/// reports the smallest passing constants.
struct AvgGaussianResult {
  double c_prime_avg = 0.0;       // smallest C' satisfying the averaged bound
  double c_prime_distort = 0.0;   // smallest C' in the distance distortion
  CheckReport report;
};
AvgGaussianResult avg_gaussian_upper_check(const FlowHistory& h, const KernelHistory& k_x2,
                                           NodeIndex x1, NodeIndex x2, double s,
                                           double c_cap = 1e6);

/// Potential moment bounds at scale |s| under curvature/entropy control C:
/// first moment in [n/2 - C, n/2], gradient moment <= (n/2 + C)/|s|, second
/// moment <= 2(n + 2C)^2, plus the variance chain tying them together.
std::vector<CheckReport> moment_bounds_check(const FlowHistory& h, const KernelHistory& k,
                                             double s, double C, double tolerance,
                                             MuOptions mu_opts = {});

/// Empirical Lipschitz data for the base-point dependence of the kernel:
/// (a) the L1 norm of the base-point gradient of f_x H_x, (b) the Lipschitz
/// constant of x -> N_x(s) over neighboring base points, (c) the smallest C'
/// with |grad_x f_x|^2 <= C'(C' + f_x)/|s|.
struct NashLipschitzResult {
  double grad_l1_const = 0.0;       // sup_x I(x) * sqrt(|s|)
  double lipschitz_const = 0.0;     // sup |N_x1 - N_x2| / d_{g(0)}
  double lipschitz_scaled = 0.0;    // the same * sqrt(|s|)
  double c_prime_grad = 0.0;
  CheckReport grad_bound_report;    // (c) admits a finite constant
};
NashLipschitzResult nash_lipschitz_estimate(const FlowHistory& h, double s, int stride,
                                            KernelOptions opts = {}, int workers = 0);

// Battery helpers (deterministic seeds, band-limited test data).
Field battery_test_field(const Mesh& mesh, std::uint64_t seed);
Field coordinate_field(const Mesh& mesh, NodeIndex x0, int axis);

std::vector<CheckReport> poincare_battery(const FlowHistory& h, const KernelHistory& k,
                                          double s, int count, std::uint64_t seed,
                                          double tolerance);
std::vector<CheckReport> logsobolev_battery(const FlowHistory& h, const KernelHistory& k,
                                            double s, int count, std::uint64_t seed,
                                            double tolerance);
std::vector<CheckReport> concentration_battery(const FlowHistory& h, const KernelHistory& k,
                                               double s, int pairs, std::uint64_t seed,
                                               double tolerance);

}  // namespace rflab
