#include "rflab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rflab {

std::size_t FlowHistory::index_of(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return times.size() - 1;
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  if (k > 0 && std::abs(times[k - 1] - t) < std::abs(times[k] - t)) return k - 1;
  return k;
}

void FlowHistory::validate() const {
  if (times.empty() || times.size() != slices.size())
    throw std::invalid_argument("flow history: empty or inconsistent slice list");
  if (times.back() != 0.0) throw std::invalid_argument("flow history must end at t = 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("flow history times must strictly increase");
}

double StepPolicy::step_for(const MetricSlice& s) const {
  double h = s.mesh->min_spacing();
  double scale = 1.0;
  if (s.backend == Backend::Conformal) {
    double umin = *std::min_element(s.u.begin(), s.u.end());
    scale = std::exp(2.0 * umin);
  }
  double c = cfl;
  if (s.mesh->dim >= 3) c = std::min(c, 1.0 / 8.0);
  return c * h * h * scale;
}

namespace {

void record_diagnostics(FlowHistory& h) {
  h.min_curvature.reserve(h.slices.size());
  h.volume.reserve(h.slices.size());
  for (const auto& s : h.slices) {
    h.min_curvature.push_back(min_scalar_curvature(s));
    h.volume.push_back(total_volume(s));
  }
}

}  // namespace

FlowHistory make_flat_torus(int n, std::array<double, 3> sides, std::array<int, 3> resolution,
                            double T, std::int64_t slices) {
  if (!(T > 0.0)) throw std::invalid_argument("flow horizon T must be positive");
  auto mesh = Mesh::periodic_box(n, sides, resolution);
  FlowHistory h;
  h.mesh = mesh;
  h.backend = Backend::Flat;
  if (slices <= 0) {
    StepPolicy pol;
    double dt = pol.step_for(MetricSlice::flat(mesh, 0.0));
    slices = std::max<std::int64_t>(8, static_cast<std::int64_t>(std::ceil(T / dt)));
    slices = std::min<std::int64_t>(slices, pol.max_steps);
  }
  for (std::int64_t k = 0; k <= slices; ++k) {
    double t = -T + T * static_cast<double>(k) / slices;
    if (k == slices) t = 0.0;
    h.times.push_back(t);
    h.slices.push_back(MetricSlice::flat(mesh, t));
  }
  record_diagnostics(h);
  h.validate();
  return h;
}

FlowHistory make_flat_torus(int n, double side, int resolution, double T, std::int64_t slices) {
  return make_flat_torus(n, {side, side, side}, {resolution, resolution, resolution}, T, slices);
}

FlowHistory make_shrinking_sphere(double r0, double T, int degree, std::int64_t slices) {
  if (!(r0 > 0.0) || !(T > 0.0)) throw std::invalid_argument("need r0 > 0 and T > 0");
  if (!(r0 * r0 > 2.0 * T))
    throw std::invalid_argument("flow singular before t=0: requires r0^2 > 2T");
  auto mesh = Mesh::sphere(degree, r0);
  FlowHistory h;
  h.mesh = mesh;
  h.backend = Backend::Sphere;
  for (std::int64_t k = 0; k <= slices; ++k) {
    double t = -T + T * static_cast<double>(k) / slices;
    if (k == slices) t = 0.0;
    double r2 = r0 * r0 - 2.0 * t;
    h.times.push_back(t);
    h.slices.push_back(MetricSlice::sphere(mesh, t, std::sqrt(r2)));
  }
  record_diagnostics(h);
  h.validate();
  return h;
}

FlowHistory evolve_conformal_torus(std::shared_ptr<const Mesh> mesh, const Field& u0,
                                   double T, StepPolicy policy) {
  if (mesh->dim != 2 || mesh->topology != Topology::PeriodicBox)
    throw std::invalid_argument("conformal flow needs a 2-D periodic box");
  if (static_cast<std::int64_t>(u0.size()) != mesh->num_nodes())
    throw std::invalid_argument("initial conformal factor has wrong size");
  for (double v : u0)
    if (!std::isfinite(v)) throw std::invalid_argument("initial data must be finite");
  if (!(T > 0.0)) throw std::invalid_argument("flow horizon T must be positive");

  FlowHistory h;
  h.mesh = mesh;
  h.backend = Backend::Conformal;

  Field u = u0;
  double t = -T;
  h.times.push_back(t);
  h.slices.push_back(MetricSlice::conformal(mesh, t, u));

  double dt_floor = T / static_cast<double>(policy.max_steps);
  while (t < 0.0) {
    double dt = policy.step_for(h.slices.back());
    if (dt < dt_floor)
      throw SolveError("CFL violation: adaptive step underflow in conformal flow");
    if (t + dt > 0.0) dt = -t;
    Field lap = flat_laplacian(*mesh, u);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt * std::exp(-2.0 * u[i]) * lap[i];
    t = (t + dt >= -1e-15 * T) ? 0.0 : t + dt;
    double umax = 0.0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    if (umax > policy.blowup_cap)
      throw SolveError("blow-up: |u| exceeded the configured cap");
    h.times.push_back(t);
    h.slices.push_back(MetricSlice::conformal(mesh, t, u));
    if (static_cast<std::int64_t>(h.times.size()) > policy.max_steps)
      throw SolveError("conformal flow exceeded the step cap");
  }
  record_diagnostics(h);
  h.validate();
  return h;
}

FlowHistory parabolic_rescale(const FlowHistory& h, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("rescale factor must be positive");
  FlowHistory out;
  out.backend = h.backend;
  double il2 = 1.0 / (lambda * lambda);

  std::shared_ptr<const Mesh> mesh;
  switch (h.backend) {
    case Backend::Flat: {
      std::array<double, 3> sides = h.mesh->side;
      for (int a = 0; a < h.mesh->dim; ++a) sides[a] /= lambda;
      mesh = Mesh::periodic_box(h.mesh->dim, sides, h.mesh->res);
      break;
    }
    case Backend::Sphere:
      mesh = Mesh::sphere(h.mesh->degree, h.mesh->base_radius / lambda);
      break;
    case Backend::Conformal:
      mesh = h.mesh;  // coordinates unchanged; the factor shifts
      break;
  }
  out.mesh = mesh;

  double log_l = std::log(lambda);
  for (std::size_t k = 0; k < h.num_slices(); ++k) {
    double t = h.times[k] * il2;
    if (k + 1 == h.num_slices()) t = 0.0;
    out.times.push_back(t);
    const MetricSlice& s = h.slices[k];
    switch (h.backend) {
      case Backend::Flat:
        out.slices.push_back(MetricSlice::flat(mesh, t));
        break;
      case Backend::Sphere:
        out.slices.push_back(MetricSlice::sphere(mesh, t, s.radius / lambda));
        break;
      case Backend::Conformal: {
        Field u = s.u;
        for (double& v : u) v -= log_l;
        out.slices.push_back(MetricSlice::conformal(mesh, t, std::move(u)));
        break;
      }
    }
  }
  record_diagnostics(out);
  out.validate();
  return out;
}

Field band_limited_field(const Mesh& mesh, int kmax, double eps, std::uint64_t seed) {
  if (mesh.topology != Topology::PeriodicBox)
    throw std::invalid_argument("band-limited fields live on box meshes");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
  };
  std::int64_t nn = mesh.num_nodes();
  Field u(nn, 0.0);
  std::array<int, 3> k = {0, 0, 0};
  for (k[0] = (mesh.dim > 0 ? -kmax : 0); k[0] <= (mesh.dim > 0 ? kmax : 0); ++k[0])
    for (k[1] = (mesh.dim > 1 ? -kmax : 0); k[1] <= (mesh.dim > 1 ? kmax : 0); ++k[1])
      for (k[2] = (mesh.dim > 2 ? -kmax : 0); k[2] <= (mesh.dim > 2 ? kmax : 0); ++k[2]) {
        if (k[0] == 0 && k[1] == 0 && k[2] == 0) continue;
        double amp = uniform() - 0.5;
        double phase = 2.0 * M_PI * uniform();
        for (std::int64_t i = 0; i < nn; ++i) {
          auto c = mesh.coords_of(i);
          double arg = phase;
          for (int a = 0; a < mesh.dim; ++a)
            arg += 2.0 * M_PI * k[a] * c[a] / static_cast<double>(mesh.res[a]);
          u[i] += amp * std::cos(arg);
        }
      }
  double umax = 0.0;
  for (double v : u) umax = std::max(umax, std::abs(v));
  if (umax > 0.0)
    for (double& v : u) v *= eps / umax;
  return u;
}

}  // namespace rflab
