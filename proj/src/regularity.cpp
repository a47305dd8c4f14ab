#include "rflab/regularity.hpp"

#include "rflab/parallel.hpp"
#include "rflab/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rflab {

namespace {

// sup |Rm| over stored slices in the window (t - r^2, t]; |Rm| = |R|/2.
double sup_rm_window(const FlowHistory& h, const Field& dist, double t, double r) {
  double sup = 0.0;
  std::size_t kt = h.index_of(t);
  for (std::size_t k = kt + 1; k-- > 0;) {
    if (h.times[k] <= t - r * r - 1e-15) break;
    const MetricSlice& slice = h.slices[k];
    if (slice.backend == Backend::Flat) continue;
    if (slice.backend == Backend::Sphere) {
      sup = std::max(sup, 1.0 / (slice.radius * slice.radius));
      continue;
    }
    Field R = scalar_curvature(slice);
    for (std::size_t i = 0; i < R.size(); ++i)
      if (dist[i] <= r) sup = std::max(sup, 0.5 * std::abs(R[i]));
  }
  return sup;
}

}  // namespace

double regularity_scale(const FlowHistory& h, NodeIndex x, double t) {
  double T = h.horizon();
  double cap = std::sqrt(std::max(0.0, t + T));
  if (cap == 0.0) return 0.0;
  const MetricSlice& slice_t = h.slice_at(t);
  PointSet src{{x}, t};
  Field dist = distance_field(slice_t, src);

  auto ok = [&](double r) { return sup_rm_window(h, dist, t, r) <= 1.0 / (r * r); };
  if (ok(cap)) return cap;
  double lo = 1e-9, hi = cap;
  if (!ok(lo)) return lo;
  double tol = 0.25 * h.mesh->min_spacing();
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

ScanResult eps_regularity_scan(const FlowHistory& h, double s, ScanOptions opts) {
  const Mesh& m = *h.mesh;
  double T = h.horizon();
  if (!(s < 0.0) || !(-s <= T)) throw std::invalid_argument("scan needs s in [-T, 0)");

  std::vector<NodeIndex> grid;
  if (m.topology == Topology::SphereSpectral) {
    grid.push_back(0);  // every point of the round sphere is equivalent
  } else {
    std::array<int, 3> c = {0, 0, 0};
    int n = m.dim;
    for (c[0] = 0; c[0] < (n > 0 ? m.res[0] : 1); c[0] += opts.stride)
      for (c[1] = 0; c[1] < (n > 1 ? m.res[1] : 1); c[1] += opts.stride)
        for (c[2] = 0; c[2] < (n > 2 ? m.res[2] : 1); c[2] += opts.stride)
          grid.push_back(m.node_at(c));
  }

  ScanResult out;
  out.records.resize(grid.size());
  parallel_for(static_cast<std::int64_t>(grid.size()), opts.workers, [&](std::int64_t gi) {
    NodeIndex x = grid[gi];
    KernelHistory k = solve_conjugate_kernel(h, x, opts.kernel);
    RegularityRecord rec;
    rec.x = x;
    KernelSlice ks = eval_kernel(h, k, s, false);
    const MetricSlice slice = kernel_metric_slice(h, k, ks);
    rec.W = pointed_w(slice, ks);
    rec.N = pointed_nash_moment(slice, ks);
    rec.r_rm = regularity_scale(h, x, 0.0);
    rec.r2_over_s = rec.r_rm * rec.r_rm / (-s);
    rec.t_of_x = -std::min(T, rec.r_rm * rec.r_rm);
    double s_for_t = std::min(rec.t_of_x, k.latest_s());
    s_for_t = std::max(s_for_t, std::max(-T, k.earliest_s()));
    KernelSlice kst = eval_kernel(h, k, s_for_t, false);
    rec.N_at_t_of_x = pointed_nash_moment(kernel_metric_slice(h, k, kst), kst);
    out.records[gi] = rec;
  });

  // eps* = min over records of max(-N_x, r^2/|s|): by construction no scanned
  // point can satisfy N_x >= -eps* while r^2 < eps* |s|.
  double eps_star = std::numeric_limits<double>::infinity();
  for (const auto& rec : out.records)
    eps_star = std::min(eps_star, std::max(-rec.N, rec.r2_over_s));
  out.summary.eps_star = eps_star;
  out.summary.min_ratio = eps_star;

  // Hypothesis constants at scale |s|: scalar curvature and entropy control.
  const MetricSlice& slice_s = h.slice_at(s);
  double tau = -s;
  double c_curv = std::max(0.0, -min_scalar_curvature(slice_s) * tau);
  MuResult mu = mu_entropy_inf(slice_s, 0.05 * tau, 2.0 * tau, 6, opts.mu);
  double c_mu = std::max(0.0, -mu.lower());
  out.summary.C = std::max(c_curv, c_mu);
  out.summary.hypothesis_ok = mu.residual * mu.interval_scale <= 0.1;
  return out;
}

std::string scan_to_csv(const ScanResult& scan) {
  std::string out = "x_index,N,W,r2_over_s,t_of_x,N_at_t_of_x\n";
  for (const auto& r : scan.records) {
    out += std::to_string(r.x) + "," + format_double(r.N) + "," + format_double(r.W) +
           "," + format_double(r.r2_over_s) + "," + format_double(r.t_of_x) + "," +
           format_double(r.N_at_t_of_x) + "\n";
  }
  return out;
}

std::string scan_summary_to_json(const ScanResult& scan, double s) {
  std::string out = "{\n";
  out += "  \"s\": " + format_double(s) + ",\n";
  out += "  \"eps_star\": " + format_double(scan.summary.eps_star) + ",\n";
  out += "  \"C\": " + format_double(scan.summary.C) + ",\n";
  out += "  \"hypothesis_ok\": ";
  out += scan.summary.hypothesis_ok ? "true" : "false";
  out += ",\n  \"points\": " + std::to_string(scan.records.size()) + "\n}\n";
  return out;
}

}  // namespace rflab
