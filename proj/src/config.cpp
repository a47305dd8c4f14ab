#include "rflab/config.hpp"

#include "rflab/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rflab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

[[noreturn]] void fail(const std::string& name, int lineno, const std::string& what) {
  throw ConfigError(name + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(const std::string& text,
                                              const std::string& name) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(name, lineno, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(name, lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (section == "flow") {
        if (key == "backend") {
          backend_from_name(val);  // validates
          c.backend = val;
        } else if (key == "n") c.n = std::stoi(val);
        else if (key == "side") c.side = std::stod(val);
        else if (key == "resolution") c.resolution = std::stoi(val);
        else if (key == "degree") c.degree = std::stoi(val);
        else if (key == "radius") c.radius = std::stod(val);
        else if (key == "T") c.T = std::stod(val);
        else if (key == "epsilon") c.epsilon = std::stod(val);
        else if (key == "kmax") c.kmax = std::stoi(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "cfl") c.cfl = std::stod(val);
        else if (key == "max_steps") c.max_steps = std::stoll(val);
        else if (key == "blowup_cap") c.blowup_cap = std::stod(val);
        else if (key == "slices") c.slices = std::stoll(val);
        else fail(name, lineno, "unknown key in [flow]: " + key);
      } else if (section == "kernel") {
        if (key == "basepoint") c.basepoint = std::stoll(val);
        else if (key == "samples") c.samples = std::stoi(val);
        else if (key == "store_stride") c.store_stride = std::stoi(val);
        else fail(name, lineno, "unknown key in [kernel]: " + key);
      } else if (section == "verify") {
        if (key == "checks") c.checks = split_list(val);
        else if (key == "s_values") {
          c.s_values.clear();
          for (const auto& t : split_list(val)) c.s_values.push_back(std::stod(t));
        } else if (key == "battery") c.battery = std::stoi(val);
        else if (key == "pairs") c.pairs = std::stoi(val);
        else if (key == "tolerance_scale") c.tolerance_scale = std::stod(val);
        else if (key == "C") c.C = std::stod(val);
        else fail(name, lineno, "unknown key in [verify]: " + key);
      } else if (section == "scan") {
        if (key == "stride") c.scan_stride = std::stoi(val);
        else if (key == "s") c.scan_s = std::stod(val);
        else fail(name, lineno, "unknown key in [scan]: " + key);
      } else if (section == "output") {
        if (key == "dir") c.out_dir = val;
        else if (key == "workers") c.workers = std::stoi(val);
        else fail(name, lineno, "unknown key in [output]: " + key);
      } else {
        fail(name, lineno, "key outside a known section: " + key);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(name, lineno, std::string("bad value for ") + key + ": " + e.what());
    }
  }
  // Cross-field validation with the same line-anchored error style.
  if (c.tolerance_scale <= 0.0) throw ConfigError(name + ": tolerance_scale must be positive");
  if (c.T <= 0.0) throw ConfigError(name + ": T must be positive");
  if (c.backend == "sphere" && !(c.radius * c.radius > 2.0 * c.T))
    throw ConfigError(name + ": flow singular before t=0: requires radius^2 > 2T");
  for (double s : c.s_values)
    if (!(s < 0.0) || s < -c.T)
      throw ConfigError(name + ": verify s_values must lie in [-T, 0)");
  return c;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_text(buf.str(), path);
}

std::string ExperimentConfig::canonical_text() const {
  std::string t;
  t += "[flow]\n";
  t += "backend = " + backend + "\n";
  t += "n = " + std::to_string(n) + "\n";
  t += "side = " + format_double(side) + "\n";
  t += "resolution = " + std::to_string(resolution) + "\n";
  t += "degree = " + std::to_string(degree) + "\n";
  t += "radius = " + format_double(radius) + "\n";
  t += "T = " + format_double(T) + "\n";
  t += "epsilon = " + format_double(epsilon) + "\n";
  t += "kmax = " + std::to_string(kmax) + "\n";
  t += "seed = " + std::to_string(seed) + "\n";
  t += "cfl = " + format_double(cfl) + "\n";
  t += "max_steps = " + std::to_string(max_steps) + "\n";
  t += "blowup_cap = " + format_double(blowup_cap) + "\n";
  t += "slices = " + std::to_string(slices) + "\n";
  t += "[kernel]\n";
  t += "basepoint = " + std::to_string(basepoint) + "\n";
  t += "samples = " + std::to_string(samples) + "\n";
  t += "store_stride = " + std::to_string(store_stride) + "\n";
  t += "[verify]\n";
  t += "checks =";
  for (const auto& c : enabled_checks()) t += " " + c;
  t += "\n";
  t += "s_values =";
  for (double s : s_values) t += " " + format_double(s);
  t += "\n";
  t += "battery = " + std::to_string(battery) + "\n";
  t += "pairs = " + std::to_string(pairs) + "\n";
  t += "tolerance_scale = " + format_double(tolerance_scale) + "\n";
  t += "C = " + format_double(C) + "\n";
  t += "[scan]\n";
  t += "stride = " + std::to_string(scan_stride) + "\n";
  t += "s = " + format_double(scan_s) + "\n";
  return t;
}

std::uint64_t ExperimentConfig::hash() const {
  // FNV-1a over the canonical text.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

FlowHistory ExperimentConfig::build_flow() const {
  Backend b = backend_from_name(backend);
  switch (b) {
    case Backend::Flat:
      return make_flat_torus(n, side, resolution, T, slices);
    case Backend::Sphere:
      return make_shrinking_sphere(radius, T, degree, slices > 0 ? slices : 512);
    case Backend::Conformal: {
      auto mesh = Mesh::periodic_box(2, side, resolution);
      Field u0 = band_limited_field(*mesh, kmax, epsilon, seed);
      return evolve_conformal_torus(mesh, u0, T, step_policy());
    }
  }
  throw ConfigError("unreachable backend");
}

NodeIndex ExperimentConfig::resolve_basepoint(const Mesh& mesh) const {
  if (basepoint < 0) return mesh.center_node();
  if (basepoint >= mesh.num_nodes()) throw ConfigError("basepoint outside mesh");
  return basepoint;
}

StepPolicy ExperimentConfig::step_policy() const {
  StepPolicy p;
  p.cfl = cfl;
  p.max_steps = max_steps;
  p.blowup_cap = blowup_cap;
  return p;
}

std::vector<std::string> ExperimentConfig::enabled_checks() const {
  if (!checks.empty()) return checks;
  return {"poincare",    "logsobolev", "concentration", "herbst",
          "nash",        "moments",    "zhang",         "kernel_bounds",
          "collapse",    "homotopy",   "duality",       "mass_growth",
          "monotonicity"};
}

}  // namespace rflab
