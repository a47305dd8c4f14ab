#pragma once

#include "rflab/entropy.hpp"

#include <vector>

namespace rflab {

/// Space-time ball B_r(x,t) x (t - r^2, t].
struct ParabolicBall {
  NodeIndex center = 0;
  double t = 0.0;
  double r = 0.0;
};

/// Largest r with |Rm| <= r^{-2} on the parabolic ball at (x, t), capped by
/// the time window r <= sqrt(t + T). Surfaces use the norm convention
/// |Rm| = |K| = |R|/2; flat backends have |Rm| = 0 in every dimension.
double regularity_scale(const FlowHistory& h, NodeIndex x, double t);

struct RegularityRecord {
  NodeIndex x = 0;
  double r_rm = 0.0;       // regularity scale at (x, 0)
  double r2_over_s = 0.0;  // r_rm^2 / |s|
  double W = 0.0, N = 0.0; // pointed entropies at the scan scale
  double t_of_x = 0.0;     // normalized time-scale -min(T, r_rm^2)
  double N_at_t_of_x = 0.0;
};

struct ScanSummary {
  double eps_star = 0.0;   // largest eps with: N_x >= -eps implies r^2 >= eps |s|
  double C = 0.0;          // measured hypothesis constant
  bool hypothesis_ok = false;
  double min_ratio = 0.0;  // min over records of max(-N, r^2/|s|)
};

struct ScanResult {
  std::vector<RegularityRecord> records;
  ScanSummary summary;
};

struct ScanOptions {
  int stride = 4;        // base-point grid stride (box meshes)
  int workers = 0;
  KernelOptions kernel;
  MuOptions mu;
};

/// Scan every grid base point: pointed entropies at scale |s| against the
/// curvature regularity scale, plus the largest eps for which the scan-wide
/// implication predicate holds (its defining property, assertable exactly).
ScanResult eps_regularity_scan(const FlowHistory& h, double s, ScanOptions opts = {});

std::string scan_to_csv(const ScanResult& scan);
std::string scan_summary_to_json(const ScanResult& scan, double s);

}  // namespace rflab
