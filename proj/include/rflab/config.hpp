#pragma once

#include "rflab/flow.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rflab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat sectioned key-value experiment description; no code execution, so a
/// config plus a seed pins the whole run.
struct ExperimentConfig {
  // [flow]
  std::string backend = "conformal";
  int n = 2;
  double side = 6.283185307179586;
  int resolution = 64;
  int degree = 128;
  double radius = 1.0;
  double T = 0.5;
  double epsilon = 0.1;
  int kmax = 3;
  std::uint64_t seed = 42;
  double cfl = 1.0 / 6.0;
  std::int64_t max_steps = 100000;
  double blowup_cap = 10.0;
  std::int64_t slices = 0;

  // [kernel]
  std::int64_t basepoint = -1;  // -1 means the mesh center
  int samples = 12;
  int store_stride = 0;

  // [verify]
  std::vector<std::string> checks;  // empty = the default set
  std::vector<double> s_values = {-0.25, -0.125};
  int battery = 100;
  int pairs = 50;
  double tolerance_scale = 1.0;
  double C = 1.0;

  // [scan]
  int scan_stride = 4;
  double scan_s = -0.25;

  // [output]
  std::string out_dir = "out";
  int workers = 0;

  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_text(const std::string& text, const std::string& name);

  std::string canonical_text() const;
  std::uint64_t hash() const;

  FlowHistory build_flow() const;
  NodeIndex resolve_basepoint(const Mesh& mesh) const;
  StepPolicy step_policy() const;
  std::vector<std::string> enabled_checks() const;
};

}  // namespace rflab
