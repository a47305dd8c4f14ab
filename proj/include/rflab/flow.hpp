#pragma once

#include "rflab/geometry.hpp"

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace rflab {

/// Raised when an evolution cannot continue (blow-up, CFL underflow,
/// mass drift beyond tolerance).
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A discrete Ricci flow trajectory on t in [-T, 0]: one metric slice per
/// stored time, strictly increasing times, final time exactly 0.
/// Analytic backends (flat, sphere) match their closed forms at every slice;
/// the conformal backend stores every accepted integrator step so that
/// adjoint-in-time solves can follow the full trajectory.
struct FlowHistory {
  std::shared_ptr<const Mesh> mesh;
  Backend backend = Backend::Flat;
  std::vector<double> times;
  std::vector<MetricSlice> slices;

  // Per-slice monotone diagnostics recorded during construction.
  std::vector<double> min_curvature;
  std::vector<double> volume;

  double horizon() const { return -times.front(); }
  std::size_t num_slices() const { return times.size(); }
  const MetricSlice& slice(std::size_t k) const { return slices[k]; }
  const MetricSlice& final_slice() const { return slices.back(); }
  const MetricSlice& initial_slice() const { return slices.front(); }

  // Index of the stored time nearest to t.
  std::size_t index_of(double t) const;
  const MetricSlice& slice_at(double t) const { return slices[index_of(t)]; }

  void validate() const;
};

/// Time-step policy for the explicit integrators: dt = cfl * h^2 * min e^{2u}.
/// The default 1/6 is well inside the stability bound and cancels the leading
/// per-axis dispersion error of the heat stencil.
struct StepPolicy {
  double cfl = 1.0 / 6.0;
  std::int64_t max_steps = 100000;
  double blowup_cap = 10.0;  // abort when max |u| exceeds this

  double step_for(const MetricSlice& s) const;
};

/// Static flat torus flow: the metric does not move (Ricci flow of a flat
/// metric), but the time grid still carries [-T, 0] for the kernel solvers.
/// slices == 0 picks the grid the kernel integrator would use.
FlowHistory make_flat_torus(int n, double side, int resolution, double T = 1.0,
                            std::int64_t slices = 0);
FlowHistory make_flat_torus(int n, std::array<double, 3> sides, std::array<int, 3> resolution,
                            double T = 1.0, std::int64_t slices = 0);

/// Round shrinking 2-sphere with r(t)^2 = r0^2 - 2t on [-T, 0], r(0) = r0.
/// Rejects r0^2 <= 2T ("flow singular before t=0").
FlowHistory make_shrinking_sphere(double r0, double T, int degree = 128,
                                  std::int64_t slices = 512);

/// Explicit conformal-torus Ricci flow dt u = e^{-2u} D0 u. u0 is the slice
/// at t = -T; the flow runs forward to t = 0 with adaptive CFL steps.
FlowHistory evolve_conformal_torus(std::shared_ptr<const Mesh> mesh, const Field& u0,
                                   double T, StepPolicy policy = {});

/// Parabolic rescaling g~(t) = lambda^{-2} g(lambda^2 t) on [-T/lambda^2, 0].
/// Pure re-indexing plus scalar multiplies; nothing is re-solved.
FlowHistory parabolic_rescale(const FlowHistory& h, double lambda);

/// Deterministic band-limited field on a box mesh: wavenumbers up to kmax per
/// axis, amplitude normalized so max |u0| = eps.
Field band_limited_field(const Mesh& mesh, int kmax, double eps, std::uint64_t seed);

}  // namespace rflab
