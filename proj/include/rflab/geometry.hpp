#pragma once

#include "rflab/mesh.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rflab {

using Field = std::vector<double>;

enum class Backend { Flat, Sphere, Conformal };

const char* backend_name(Backend b);
Backend backend_from_name(const std::string& s);

/// Metric data at one flow time. The payload depends on the backend:
///  - Flat:      the constant flat box metric (no payload),
///  - Sphere:    the round metric of the given radius,
///  - Conformal: g = e^{2u} (dx^2 + dy^2) with the conformal factor field u.
struct MetricSlice {
  std::shared_ptr<const Mesh> mesh;
  double t = 0.0;
  Backend backend = Backend::Flat;
  double radius = 0.0;
  Field u;

  static MetricSlice flat(std::shared_ptr<const Mesh> mesh, double t);
  static MetricSlice sphere(std::shared_ptr<const Mesh> mesh, double t, double radius);
  static MetricSlice conformal(std::shared_ptr<const Mesh> mesh, double t, Field u);

  std::int64_t num_nodes() const { return mesh->num_nodes(); }
  int dim() const { return mesh->dim; }
};

// Volume weights of the discrete volume form (one weight per node); midpoint
// quadrature of f is then sum_i f_i v_i.
Field volume_weights(const MetricSlice& slice);
double total_volume(const MetricSlice& slice);
double integrate(const MetricSlice& slice, const Field& f);

// Nodewise scalar curvature. Flat: zero. Sphere of radius r: 2/r^2.
// Conformal: R = -2 e^{-2u} D0 u with the same centered stencil as the
// Laplacian, so the identity holds exactly at the discrete level.
Field scalar_curvature(const MetricSlice& slice);
double min_scalar_curvature(const MetricSlice& slice);

// Discrete Laplace-Beltrami of phi in the slice metric. Second-order centered
// stencil on boxes, spectral on the sphere.
Field laplace_beltrami(const MetricSlice& slice, const Field& phi);

// Flat (coordinate) Laplacian on the box mesh, independent of the metric.
Field flat_laplacian(const Mesh& mesh, const Field& phi);

// Gradient in an orthonormal frame: one component field per axis (box meshes)
// or the single colatitude component (sphere).
std::vector<Field> gradient_onb(const MetricSlice& slice, const Field& phi);
Field gradient_squared(const MetricSlice& slice, const Field& phi);

// Hessian in an orthonormal frame, packed as [11, 22, 33, 12, 13, 23]
// truncated to the slice dimension (sphere: [theta theta, phi phi]).
std::vector<Field> hessian_onb(const MetricSlice& slice, const Field& phi);

// Shortest-path distance field from a source set, on the slice metric.
// Box meshes use Dijkstra over an extended neighbor stencil (16 directions in
// 2-D); the worst-case overestimation factor is stencil_anisotropy(dim).
// Sphere distances are exact meridian arcs.
Field distance_field(const MetricSlice& slice, const PointSet& from);
double geodesic_distance(const MetricSlice& slice, const PointSet& a, const PointSet& b);
double stencil_anisotropy(int dim);

// Nodes within distance r of x in the slice metric, plus their volume.
PointSet metric_ball(const MetricSlice& slice, NodeIndex x, double r);
double ball_volume(const MetricSlice& slice, NodeIndex x, double r);

// Squared distance from x0 with the metric frozen at its value near x0
// (wrapped coordinate distance scaled by the local conformal factor; exact
// meridian arcs on the sphere). Used to seed mollified deltas and localized
// trial functions; only accurate near x0.
Field frozen_dist_sq(const MetricSlice& slice, NodeIndex x0);

}  // namespace rflab
