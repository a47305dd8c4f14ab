#include "rflab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rflab {

namespace {

// Legendre P_n(x) and derivative via the three-term recurrence.
void legendre_pair(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int l = 1; l < n; ++l) {
    double p2 = ((2 * l + 1) * x * p1 - l * p0) / (l + 1);
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (p0 - x * p1) / (1.0 - x * x);
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre_pair(n, xi, p, dp);
      double dx = -p / dp;
      xi += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre_pair(n, xi, p, dp);
    x[i] = -xi;
    x[n - 1 - i] = xi;
    double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
}

}  // namespace

std::shared_ptr<const Mesh> Mesh::periodic_box(int n, std::array<double, 3> sides,
                                               std::array<int, 3> resolution) {
  if (n < 1 || n > 3) throw std::invalid_argument("periodic box supports n in {1,2,3}");
  auto m = std::make_shared<Mesh>();
  m->dim = n;
  m->topology = Topology::PeriodicBox;
  for (int a = 0; a < n; ++a) {
    if (resolution[a] < 8)
      throw std::invalid_argument("periodic box needs resolution >= 8 per axis");
    if (!(sides[a] > 0.0)) throw std::invalid_argument("box side must be positive");
    m->res[a] = resolution[a];
    m->side[a] = sides[a];
  }
  return m;
}

std::shared_ptr<const Mesh> Mesh::periodic_box(int n, double side, int resolution) {
  return periodic_box(n, {side, side, side}, {resolution, resolution, resolution});
}

std::shared_ptr<const Mesh> Mesh::sphere(int truncation_degree, double radius) {
  if (truncation_degree < 4)
    throw std::invalid_argument("sphere mesh needs truncation degree >= 4");
  if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  auto m = std::make_shared<Mesh>();
  m->dim = 2;
  m->topology = Topology::SphereSpectral;
  m->degree = truncation_degree;
  m->base_radius = radius;
  int nr = m->rings();
  gauss_legendre(nr, m->gl_mu, m->gl_w);

  // Orthonormal Legendre table and its mu-derivative at the nodes.
  int L = truncation_degree;
  m->pbar.assign(static_cast<std::size_t>(L + 1) * nr, 0.0);
  m->pbar_d.assign(static_cast<std::size_t>(L + 1) * nr, 0.0);
  for (int i = 0; i < nr; ++i) {
    double mu = m->gl_mu[i];
    double p0 = 1.0, p1 = mu;
    m->pbar[i] = std::sqrt(0.5) * p0;
    m->pbar_d[i] = 0.0;
    if (L >= 1) {
      m->pbar[nr + i] = std::sqrt(1.5) * p1;
      m->pbar_d[nr + i] = std::sqrt(1.5);
    }
    double pm1 = p0, pl = p1;
    for (int l = 2; l <= L; ++l) {
      double pn = ((2 * l - 1) * mu * pl - (l - 1) * pm1) / l;
      pm1 = pl;
      pl = pn;
      double norm = std::sqrt(l + 0.5);
      m->pbar[static_cast<std::size_t>(l) * nr + i] = norm * pl;
      // (1-mu^2) P_l' = l (P_{l-1} - mu P_l)
      m->pbar_d[static_cast<std::size_t>(l) * nr + i] =
          norm * l * (pm1 - mu * pl) / (1.0 - mu * mu);
    }
  }
  return m;
}

double Mesh::min_spacing() const {
  if (topology == Topology::SphereSpectral) {
    // Coarsest angular gap between adjacent rings, in length units.
    double worst = 0.0;
    for (int i = 0; i + 1 < rings(); ++i)
      worst = std::max(worst, std::acos(gl_mu[i + 1]) - std::acos(gl_mu[i]));
    return base_radius * worst;
  }
  double h = spacing(0);
  for (int a = 1; a < dim; ++a) h = std::min(h, spacing(a));
  return h;
}

NodeIndex Mesh::center_node() const {
  if (topology == Topology::SphereSpectral) return 0;  // ring nearest the north pole
  std::array<int, 3> c = {0, 0, 0};
  for (int a = 0; a < dim; ++a) c[a] = res[a] / 2;
  return node_at(c);
}

double Mesh::colatitude(NodeIndex ring) const { return std::acos(gl_mu[ring]); }

std::vector<double> Mesh::analyze(const std::vector<double>& v) const {
  int nr = rings();
  std::vector<double> a(degree + 1, 0.0);
  for (int l = 0; l <= degree; ++l) {
    const double* row = &pbar[static_cast<std::size_t>(l) * nr];
    double s = 0.0;
    for (int i = 0; i < nr; ++i) s += v[i] * row[i] * gl_w[i];
    a[l] = s;
  }
  return a;
}

std::vector<double> Mesh::synthesize(const std::vector<double>& a) const {
  int nr = rings();
  std::vector<double> v(nr, 0.0);
  int L = std::min<int>(degree, static_cast<int>(a.size()) - 1);
  for (int l = 0; l <= L; ++l) {
    const double* row = &pbar[static_cast<std::size_t>(l) * nr];
    for (int i = 0; i < nr; ++i) v[i] += a[l] * row[i];
  }
  return v;
}

std::vector<double> Mesh::synthesize_dmu(const std::vector<double>& a) const {
  int nr = rings();
  std::vector<double> v(nr, 0.0);
  int L = std::min<int>(degree, static_cast<int>(a.size()) - 1);
  for (int l = 1; l <= L; ++l) {
    const double* row = &pbar_d[static_cast<std::size_t>(l) * nr];
    for (int i = 0; i < nr; ++i) v[i] += a[l] * row[i];
  }
  return v;
}

std::vector<double> Mesh::synthesize_d2mu(const std::vector<double>& a) const {
  // Legendre ODE: (1-mu^2) P'' = 2 mu P' - l(l+1) P.
  int nr = rings();
  std::vector<double> v(nr, 0.0);
  int L = std::min<int>(degree, static_cast<int>(a.size()) - 1);
  for (int l = 1; l <= L; ++l) {
    const double* p = &pbar[static_cast<std::size_t>(l) * nr];
    const double* dp = &pbar_d[static_cast<std::size_t>(l) * nr];
    double ll1 = static_cast<double>(l) * (l + 1);
    for (int i = 0; i < nr; ++i) {
      double mu = gl_mu[i];
      v[i] += a[l] * (2.0 * mu * dp[i] - ll1 * p[i]) / (1.0 - mu * mu);
    }
  }
  return v;
}

}  // namespace rflab
