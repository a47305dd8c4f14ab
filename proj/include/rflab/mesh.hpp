#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

namespace rflab {

using NodeIndex = std::int64_t;

enum class Topology { PeriodicBox, SphereSpectral };

/// Discretized model geometry. Two kinds are supported:
///  - periodic boxes in dimension 1..3 (uniform grid, wrap-around indexing),
///  - the round 2-sphere represented spectrally by zonal (axisymmetric)
///    Legendre modes; nodes are Gauss-Legendre colatitude rings.
/// Meshes are immutable after construction and shared between slices.
struct Mesh {
  int dim = 2;
  Topology topology = Topology::PeriodicBox;

  // Periodic box data.
  std::array<int, 3> res = {0, 0, 0};       // nodes per axis
  std::array<double, 3> side = {0, 0, 0};   // box side lengths

  // Sphere-spectral data.
  int degree = 0;                  // Legendre truncation degree l_max
  double base_radius = 1.0;        // radius of the reference round metric
  std::vector<double> gl_mu;       // Gauss-Legendre nodes, mu = cos(theta)
  std::vector<double> gl_w;        // Gauss-Legendre weights
  // Orthonormal Legendre tables, row l in [0, degree], column i over rings:
  // pbar[l*nrings + i] = sqrt(l + 1/2) P_l(mu_i), pbar_d = d/dmu of the same.
  std::vector<double> pbar;
  std::vector<double> pbar_d;

  static std::shared_ptr<const Mesh> periodic_box(int n, std::array<double, 3> sides,
                                                  std::array<int, 3> resolution);
  static std::shared_ptr<const Mesh> periodic_box(int n, double side, int resolution);
  static std::shared_ptr<const Mesh> sphere(int truncation_degree, double radius);

  std::int64_t num_nodes() const {
    if (topology == Topology::SphereSpectral) return degree + 1;
    std::int64_t m = 1;
    for (int a = 0; a < dim; ++a) m *= res[a];
    return m;
  }
  int rings() const { return degree + 1; }

  double spacing(int axis) const { return side[axis] / res[axis]; }
  double min_spacing() const;

  // Flattened row-major indexing with periodic wrap.
  NodeIndex node_at(std::array<int, 3> c) const {
    NodeIndex idx = 0;
    for (int a = 0; a < dim; ++a) {
      int q = c[a] % res[a];
      if (q < 0) q += res[a];
      idx = idx * res[a] + q;
    }
    return idx;
  }
  std::array<int, 3> coords_of(NodeIndex idx) const {
    std::array<int, 3> c = {0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % res[a]);
      idx /= res[a];
    }
    return c;
  }
  NodeIndex center_node() const;

  // Coordinate of a node along an axis (box) in [0, side).
  double coord(NodeIndex idx, int axis) const {
    return coords_of(idx)[axis] * spacing(axis);
  }
  // Signed wrapped coordinate difference in (-side/2, side/2].
  double wrap_delta(double a, double b, int axis) const {
    double d = a - b;
    double L = side[axis];
    d -= L * std::round(d / L);
    return d;
  }

  // Sphere helpers.
  double colatitude(NodeIndex ring) const;   // theta in (0, pi)

  // Zonal Legendre analysis/synthesis on the Gauss-Legendre rings.
  // Coefficients are with respect to the orthonormal basis sqrt(l+1/2) P_l.
  std::vector<double> analyze(const std::vector<double>& ring_values) const;
  std::vector<double> synthesize(const std::vector<double>& coeffs) const;
  // d/dmu of the synthesized series, evaluated at the rings.
  std::vector<double> synthesize_dmu(const std::vector<double>& coeffs) const;
  std::vector<double> synthesize_d2mu(const std::vector<double>& coeffs) const;
};

/// Node set living on one time slice.
struct PointSet {
  std::vector<NodeIndex> nodes;
  double t = 0.0;

  bool empty() const { return nodes.empty(); }
};

}  // namespace rflab
