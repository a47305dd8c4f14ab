#include "rflab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>

namespace rflab {

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Flat: return "flat";
    case Backend::Sphere: return "sphere";
    case Backend::Conformal: return "conformal";
  }
  return "?";
}

Backend backend_from_name(const std::string& s) {
  if (s == "flat") return Backend::Flat;
  if (s == "sphere") return Backend::Sphere;
  if (s == "conformal") return Backend::Conformal;
  throw std::invalid_argument("unknown backend: " + s);
}

MetricSlice MetricSlice::flat(std::shared_ptr<const Mesh> mesh, double t) {
  MetricSlice s;
  s.mesh = std::move(mesh);
  s.t = t;
  s.backend = Backend::Flat;
  return s;
}

MetricSlice MetricSlice::sphere(std::shared_ptr<const Mesh> mesh, double t, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("sphere slice needs radius > 0");
  MetricSlice s;
  s.mesh = std::move(mesh);
  s.t = t;
  s.backend = Backend::Sphere;
  s.radius = radius;
  return s;
}

MetricSlice MetricSlice::conformal(std::shared_ptr<const Mesh> mesh, double t, Field u) {
  if (static_cast<std::int64_t>(u.size()) != mesh->num_nodes())
    throw std::invalid_argument("conformal factor field has wrong size");
  for (double v : u)
    if (!std::isfinite(v)) throw std::invalid_argument("conformal factor must be finite");
  MetricSlice s;
  s.mesh = std::move(mesh);
  s.t = t;
  s.backend = Backend::Conformal;
  s.u = std::move(u);
  return s;
}

Field volume_weights(const MetricSlice& slice) {
  const Mesh& m = *slice.mesh;
  std::int64_t nn = m.num_nodes();
  Field v(nn);
  if (slice.backend == Backend::Sphere) {
    double r2 = slice.radius * slice.radius;
    for (std::int64_t i = 0; i < nn; ++i) v[i] = 2.0 * M_PI * r2 * m.gl_w[i];
    return v;
  }
  double cell = 1.0;
  for (int a = 0; a < m.dim; ++a) cell *= m.spacing(a);
  if (slice.backend == Backend::Flat) {
    std::fill(v.begin(), v.end(), cell);
  } else {
    for (std::int64_t i = 0; i < nn; ++i) v[i] = cell * std::exp(2.0 * slice.u[i]);
  }
  return v;
}

double total_volume(const MetricSlice& slice) {
  Field v = volume_weights(slice);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

double integrate(const MetricSlice& slice, const Field& f) {
  Field v = volume_weights(slice);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * v[i];
  return s;
}

Field flat_laplacian(const Mesh& m, const Field& phi) {
  std::int64_t nn = m.num_nodes();
  Field out(nn, 0.0);
  // Strides of each axis in the flattened row-major layout.
  std::int64_t stride[3] = {0, 0, 0};
  std::int64_t s = 1;
  for (int a = m.dim - 1; a >= 0; --a) {
    stride[a] = s;
    s *= m.res[a];
  }
  for (std::int64_t i = 0; i < nn; ++i) {
    auto c = m.coords_of(i);
    double acc = 0.0;
    for (int a = 0; a < m.dim; ++a) {
      double h2 = m.spacing(a) * m.spacing(a);
      std::int64_t ip = (c[a] + 1 == m.res[a]) ? i - (m.res[a] - 1) * stride[a] : i + stride[a];
      std::int64_t im = (c[a] == 0) ? i + (m.res[a] - 1) * stride[a] : i - stride[a];
      acc += (phi[ip] - 2.0 * phi[i] + phi[im]) / h2;
    }
    out[i] = acc;
  }
  return out;
}

Field scalar_curvature(const MetricSlice& slice) {
  const Mesh& m = *slice.mesh;
  std::int64_t nn = m.num_nodes();
  Field r(nn, 0.0);
  switch (slice.backend) {
    case Backend::Flat:
      break;
    case Backend::Sphere:
      std::fill(r.begin(), r.end(), 2.0 / (slice.radius * slice.radius));
      break;
    case Backend::Conformal: {
      Field lap = flat_laplacian(m, slice.u);
      for (std::int64_t i = 0; i < nn; ++i)
        r[i] = -2.0 * std::exp(-2.0 * slice.u[i]) * lap[i];
      break;
    }
  }
  return r;
}

double min_scalar_curvature(const MetricSlice& slice) {
  Field r = scalar_curvature(slice);
  return *std::min_element(r.begin(), r.end());
}

Field laplace_beltrami(const MetricSlice& slice, const Field& phi) {
  const Mesh& m = *slice.mesh;
  if (slice.backend == Backend::Sphere) {
    auto a = m.analyze(phi);
    for (int l = 0; l <= m.degree; ++l) a[l] *= -static_cast<double>(l) * (l + 1);
    Field out = m.synthesize(a);
    double r2 = slice.radius * slice.radius;
    for (double& x : out) x /= r2;
    return out;
  }
  Field out = flat_laplacian(m, phi);
  if (slice.backend == Backend::Conformal) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::exp(-2.0 * slice.u[i]);
  }
  return out;
}

std::vector<Field> gradient_onb(const MetricSlice& slice, const Field& phi) {
  const Mesh& m = *slice.mesh;
  std::int64_t nn = m.num_nodes();
  if (slice.backend == Backend::Sphere) {
    // Zonal field: the only nonzero component is along e_theta = (1/r) d_theta.
    auto a = m.analyze(phi);
    Field dmu = m.synthesize_dmu(a);
    Field g(nn);
    for (std::int64_t i = 0; i < nn; ++i) {
      double sin_t = std::sqrt(1.0 - m.gl_mu[i] * m.gl_mu[i]);
      g[i] = -sin_t * dmu[i] / slice.radius;  // d_theta phi / r
    }
    return {g};
  }
  std::vector<Field> out(m.dim, Field(nn, 0.0));
  std::int64_t stride[3] = {0, 0, 0};
  std::int64_t s = 1;
  for (int a = m.dim - 1; a >= 0; --a) {
    stride[a] = s;
    s *= m.res[a];
  }
  for (std::int64_t i = 0; i < nn; ++i) {
    auto c = m.coords_of(i);
    double conf = (slice.backend == Backend::Conformal) ? std::exp(-slice.u[i]) : 1.0;
    for (int a = 0; a < m.dim; ++a) {
      std::int64_t ip = (c[a] + 1 == m.res[a]) ? i - (m.res[a] - 1) * stride[a] : i + stride[a];
      std::int64_t im = (c[a] == 0) ? i + (m.res[a] - 1) * stride[a] : i - stride[a];
      out[a][i] = conf * (phi[ip] - phi[im]) / (2.0 * m.spacing(a));
    }
  }
  return out;
}

Field gradient_squared(const MetricSlice& slice, const Field& phi) {
  auto g = gradient_onb(slice, phi);
  Field out(phi.size(), 0.0);
  for (const Field& comp : g)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += comp[i] * comp[i];
  return out;
}

std::vector<Field> hessian_onb(const MetricSlice& slice, const Field& phi) {
  const Mesh& m = *slice.mesh;
  std::int64_t nn = m.num_nodes();
  if (slice.backend == Backend::Sphere) {
    auto a = m.analyze(phi);
    Field dmu = m.synthesize_dmu(a);
    Field d2mu = m.synthesize_d2mu(a);
    Field h11(nn), h22(nn);
    double r2 = slice.radius * slice.radius;
    for (std::int64_t i = 0; i < nn; ++i) {
      double mu = m.gl_mu[i];
      // d_theta^2 f = -mu f_mu + (1-mu^2) f_mumu ; cot(theta) d_theta f = -mu f_mu
      h11[i] = (-mu * dmu[i] + (1.0 - mu * mu) * d2mu[i]) / r2;
      h22[i] = (-mu * dmu[i]) / r2;
    }
    return {h11, h22};
  }

  int n = m.dim;
  std::int64_t stride[3] = {0, 0, 0};
  std::int64_t s = 1;
  for (int a = n - 1; a >= 0; --a) {
    stride[a] = s;
    s *= m.res[a];
  }
  auto shift = [&](NodeIndex i, int axis, int step) {
    auto c = m.coords_of(i);
    c[axis] += step;
    return m.node_at(c);
  };

  int ncomp = n + n * (n - 1) / 2;
  std::vector<Field> out(ncomp, Field(nn, 0.0));
  bool conf = slice.backend == Backend::Conformal;

  // Coordinate first derivatives of u for the Christoffel terms.
  std::vector<Field> du;
  if (conf) {
    du.assign(n, Field(nn, 0.0));
    for (std::int64_t i = 0; i < nn; ++i) {
      auto c = m.coords_of(i);
      for (int a = 0; a < n; ++a) {
        std::int64_t ip = (c[a] + 1 == m.res[a]) ? i - (m.res[a] - 1) * stride[a] : i + stride[a];
        std::int64_t im = (c[a] == 0) ? i + (m.res[a] - 1) * stride[a] : i - stride[a];
        du[a][i] = (slice.u[ip] - slice.u[im]) / (2.0 * m.spacing(a));
      }
    }
  }

  for (std::int64_t i = 0; i < nn; ++i) {
    auto c = m.coords_of(i);
    double dphi[3] = {0, 0, 0};
    double d2[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (int a = 0; a < n; ++a) {
      double h = m.spacing(a);
      std::int64_t ip = (c[a] + 1 == m.res[a]) ? i - (m.res[a] - 1) * stride[a] : i + stride[a];
      std::int64_t im = (c[a] == 0) ? i + (m.res[a] - 1) * stride[a] : i - stride[a];
      dphi[a] = (phi[ip] - phi[im]) / (2.0 * h);
      d2[a][a] = (phi[ip] - 2.0 * phi[i] + phi[im]) / (h * h);
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        double ha = m.spacing(a), hb = m.spacing(b);
        NodeIndex pp = shift(shift(i, a, 1), b, 1);
        NodeIndex pm = shift(shift(i, a, 1), b, -1);
        NodeIndex mp = shift(shift(i, a, -1), b, 1);
        NodeIndex mm = shift(shift(i, a, -1), b, -1);
        d2[a][b] = d2[b][a] = (phi[pp] - phi[pm] - phi[mp] + phi[mm]) / (4.0 * ha * hb);
      }

    double e2u = conf ? std::exp(-2.0 * slice.u[i]) : 1.0;
    int k = 0;
    // Diagonal components first, then the upper triangle.
    for (int a = 0; a < n; ++a, ++k) {
      double cov = d2[a][a];
      if (conf) {
        // Gamma^a_{aa} = u_a, Gamma^b_{aa} = -u_b (b != a), conformal 2-D metric.
        cov -= du[a][i] * dphi[a];
        for (int b = 0; b < n; ++b)
          if (b != a) cov += du[b][i] * dphi[b];
      }
      out[k][i] = e2u * cov;
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b, ++k) {
        double cov = d2[a][b];
        if (conf) cov -= du[b][i] * dphi[a] + du[a][i] * dphi[b];  // Gamma^a_{ab} = u_b
        out[k][i] = e2u * cov;
      }
  }
  return out;
}

double stencil_anisotropy(int dim) {
  // Worst-case overestimation of the shortest-path metric by the extended
  // stencil: sec of half the largest angular gap between stencil directions.
  if (dim <= 1) return 1.0;
  if (dim == 2) return 1.0 / std::cos(0.5 * std::atan2(1.0, 2.0));  // ~1.0274
  return 1.04;
}

namespace {

struct StencilDir {
  std::array<int, 3> step;
  double flat_len;  // in units of the (isotropic) grid spacing
};

std::vector<StencilDir> box_stencil(const Mesh& m) {
  std::vector<StencilDir> dirs;
  int range = 2;
  std::array<int, 3> d = {0, 0, 0};
  auto gcd3 = [](int a, int b, int c) {
    int g = std::gcd(std::abs(a), std::gcd(std::abs(b), std::abs(c)));
    return g == 0 ? 1 : g;
  };
  for (d[0] = (m.dim > 0 ? -range : 0); d[0] <= (m.dim > 0 ? range : 0); ++d[0])
    for (d[1] = (m.dim > 1 ? -range : 0); d[1] <= (m.dim > 1 ? range : 0); ++d[1])
      for (d[2] = (m.dim > 2 ? -range : 0); d[2] <= (m.dim > 2 ? range : 0); ++d[2]) {
        if (d[0] == 0 && d[1] == 0 && d[2] == 0) continue;
        if (gcd3(d[0], d[1], d[2]) != 1) continue;  // drop colinear duplicates
        double len2 = 0.0;
        for (int a = 0; a < m.dim; ++a) {
          double step = d[a] * m.spacing(a);
          len2 += step * step;
        }
        dirs.push_back({d, std::sqrt(len2)});
      }
  return dirs;
}

}  // namespace

Field distance_field(const MetricSlice& slice, const PointSet& from) {
  const Mesh& m = *slice.mesh;
  if (from.empty()) throw std::invalid_argument("distance from empty set");
  std::int64_t nn = m.num_nodes();
  const double inf = std::numeric_limits<double>::infinity();
  Field dist(nn, inf);

  if (slice.backend == Backend::Sphere) {
    // Exact arc distance between colatitude rings.
    for (std::int64_t i = 0; i < nn; ++i) {
      double best = inf;
      double ti = m.colatitude(i);
      for (NodeIndex j : from.nodes) best = std::min(best, std::abs(ti - m.colatitude(j)));
      dist[i] = slice.radius * best;
    }
    return dist;
  }

  auto dirs = box_stencil(m);
  Field conf(nn, 1.0);
  if (slice.backend == Backend::Conformal)
    for (std::int64_t i = 0; i < nn; ++i) conf[i] = std::exp(slice.u[i]);

  using QE = std::pair<double, NodeIndex>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
  for (NodeIndex i : from.nodes) {
    if (i < 0 || i >= nn) throw std::invalid_argument("point set index out of bounds");
    dist[i] = 0.0;
    pq.push({0.0, i});
  }
  while (!pq.empty()) {
    auto [di, i] = pq.top();
    pq.pop();
    if (di > dist[i]) continue;
    auto c = m.coords_of(i);
    for (const auto& dir : dirs) {
      std::array<int, 3> nc = c;
      for (int a = 0; a < m.dim; ++a) nc[a] += dir.step[a];
      NodeIndex j = m.node_at(nc);
      double w = dir.flat_len * 0.5 * (conf[i] + conf[j]);
      double dj = di + w;
      if (dj < dist[j]) {
        dist[j] = dj;
        pq.push({dj, j});
      }
    }
  }
  return dist;
}

double geodesic_distance(const MetricSlice& slice, const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("set distance of empty set");
  // Overlap short-circuit.
  for (NodeIndex i : a.nodes)
    for (NodeIndex j : b.nodes)
      if (i == j) return 0.0;
  Field d = distance_field(slice, a);
  double best = std::numeric_limits<double>::infinity();
  for (NodeIndex j : b.nodes) best = std::min(best, d[j]);
  return best;
}

PointSet metric_ball(const MetricSlice& slice, NodeIndex x, double r) {
  PointSet src;
  src.nodes = {x};
  src.t = slice.t;
  Field d = distance_field(slice, src);
  PointSet ball;
  ball.t = slice.t;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.size()); ++i)
    if (d[i] <= r) ball.nodes.push_back(i);
  return ball;
}

double ball_volume(const MetricSlice& slice, NodeIndex x, double r) {
  PointSet ball = metric_ball(slice, x, r);
  Field v = volume_weights(slice);
  double vol = 0.0;
  for (NodeIndex i : ball.nodes) vol += v[i];
  return vol;
}

Field frozen_dist_sq(const MetricSlice& slice, NodeIndex x0) {
  const Mesh& m = *slice.mesh;
  std::int64_t nn = m.num_nodes();
  Field d2(nn, 0.0);
  if (slice.backend == Backend::Sphere) {
    double t0 = m.colatitude(x0);
    for (std::int64_t i = 0; i < nn; ++i) {
      double arc = slice.radius * (m.colatitude(i) - t0);
      d2[i] = arc * arc;
    }
    return d2;
  }
  double conf = (slice.backend == Backend::Conformal) ? std::exp(2.0 * slice.u[x0]) : 1.0;
  auto c0 = m.coords_of(x0);
  for (std::int64_t i = 0; i < nn; ++i) {
    auto c = m.coords_of(i);
    double acc = 0.0;
    for (int a = 0; a < m.dim; ++a) {
      double d = m.wrap_delta(c[a] * m.spacing(a), c0[a] * m.spacing(a), a);
      acc += d * d;
    }
    d2[i] = conf * acc;
  }
  return d2;
}

}  // namespace rflab
