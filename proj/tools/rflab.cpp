// Experiment runner: build model flows, solve conjugate kernels, run the
// verification batteries, emit reports.

#include "rflab/config.hpp"
#include "rflab/entropy.hpp"
#include "rflab/inequalities.hpp"
#include "rflab/parallel.hpp"
#include "rflab/regularity.hpp"
#include "rflab/serialize.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace rflab;

namespace {

constexpr const char* kToolVersion = "rflab 0.1.0";

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, const std::vector<std::string>& outputs) {
  std::string j = "{\n";
  j += "  \"tool\": \"" + std::string(kToolVersion) + "\",\n";
  j += "  \"command\": \"" + command + "\",\n";
  j += "  \"config_hash\": \"" + hex64(cfg.hash()) + "\",\n";
  j += "  \"outputs\": [";
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    j += "\"" + outputs[i] + "\"";
    if (i + 1 < outputs.size()) j += ", ";
  }
  j += "]\n}\n";
  write_file(dir / "manifest.json", j);
}

struct VerifyContext {
  const ExperimentConfig& cfg;
  const FlowHistory& flow;
  const KernelHistory& kernel;
  double h2dt;         // discretization scale h^2 + dt
  double tol_scale;
  int workers;

  double tol_disc() const { return 5.0 * h2dt * tol_scale; }
  double tol_tight() const { return 1e-9 * tol_scale; }
  double tol_kernel() const { return kernel.analytic ? tol_tight() : tol_disc(); }
};

void run_check(const std::string& name, const VerifyContext& vc,
               std::vector<CheckReport>& reports) {
  const FlowHistory& h = vc.flow;
  const KernelHistory& k = vc.kernel;
  const ExperimentConfig& cfg = vc.cfg;

  if (name == "poincare" || name == "logsobolev") {
    for (double s : cfg.s_values) {
      auto batch = (name == "poincare")
                       ? poincare_battery(h, k, s, cfg.battery, cfg.seed, vc.tol_kernel())
                       : logsobolev_battery(h, k, s, cfg.battery, cfg.seed, vc.tol_kernel());
      CheckReport worst = batch.front();
      for (const auto& r : batch)
        if (r.slack < worst.slack) worst = r;
      worst.name = name + "_battery";
      worst.note = std::to_string(batch.size()) + " test functions, worst slack kept";
      reports.push_back(worst);
    }
  } else if (name == "concentration") {
    for (double s : cfg.s_values) {
      auto batch = concentration_battery(h, k, s, cfg.pairs, cfg.seed, vc.tol_kernel());
      CheckReport worst = batch.front();
      for (const auto& r : batch)
        if (r.slack < worst.slack) worst = r;
      worst.name = "concentration_battery";
      worst.note = std::to_string(batch.size()) + " set pairs, worst slack kept";
      reports.push_back(worst);
    }
  } else if (name == "herbst") {
    for (double s : cfg.s_values) {
      KernelSlice ks = eval_kernel(h, k, s, false);
      const MetricSlice& slice = h.slice_at(k.base_time + ks.s);
      TestFunction tf{battery_test_field(*h.mesh, cfg.seed + 7), TestFunction::Normalization::Raw};
      std::vector<double> grid;
      for (int j = 1; j <= 20; ++j) grid.push_back(0.1 * j);
      auto res = herbst_transform(slice, ks, tf, grid, 1e-3 * vc.tol_scale);
      reports.push_back(res.derivative_report);
      reports.push_back(res.mgf_report);
    }
  } else if (name == "nash") {
    for (double s : cfg.s_values) {
      NashPair np = nash_entropy(h, k, s);
      double tol = (k.analytic ? 1e-6 : 1e-3) * vc.tol_scale;
      CheckReport r = CheckReport::make("nash_identity", np.discrepancy, tol, 0.0, s,
                                        k.basepoint);
      r.note = "time-average vs moment formula, relative";
      reports.push_back(r);
    }
  } else if (name == "moments") {
    for (double s : cfg.s_values) {
      auto batch = moment_bounds_check(h, k, s, cfg.C, vc.tol_kernel());
      for (auto& r : batch) reports.push_back(std::move(r));
    }
  } else if (name == "zhang") {
    double s = cfg.s_values.front();
    HeatField u = forward_kernel(h, k.basepoint, s);
    reports.push_back(
        zhang_gradient_check(h, u, u.times.front(), 0.0, 10.0 * vc.h2dt * vc.tol_scale));
  } else if (name == "kernel_bounds") {
    auto res = kernel_bounds_check(h, k, cfg.s_values, 10.0 * vc.h2dt * vc.tol_scale + 1e-9);
    reports.push_back(res.upper);
    reports.push_back(res.lower);
  } else if (name == "collapse") {
    const MetricSlice& slice = h.final_slice();
    double r = 0.25 * std::sqrt(-cfg.s_values.front()) * 2.0;
    reports.push_back(no_local_collapse_check(h, 0.0, k.basepoint, r, cfg.C));
  } else if (name == "homotopy") {
    double s = cfg.s_values.front();
    Field u(h.mesh->num_nodes(), 2.0);
    Field bump = battery_test_field(*h.mesh, cfg.seed + 11);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.5 * bump[i];
    KernelOptions ko;
    ko.policy = cfg.step_policy();
    reports.push_back(homotopy_identity_check(h, k.basepoint, u, s,
                                              HomotopyVariant::Square,
                                              1e-2 * vc.tol_scale, ko));
    reports.push_back(homotopy_identity_check(h, k.basepoint, u, s,
                                              HomotopyVariant::XLogX,
                                              1e-2 * vc.tol_scale, ko));
  } else if (name == "duality") {
    double s = cfg.s_values.front();
    double tol = (h.backend == Backend::Conformal ? 1e-2 : 1e-3) * vc.tol_scale;
    KernelOptions ko;
    ko.force_numeric = true;
    ko.policy = cfg.step_policy();
    NodeIndex y = (k.basepoint + h.mesh->num_nodes() / 3) % h.mesh->num_nodes();
    reports.push_back(duality_check(h, k.basepoint, 0.0, y, s, tol, ko));
  } else if (name == "mass_growth") {
    double s = cfg.s_values.front();
    reports.push_back(mass_growth_check(h, k.basepoint, s,
                                        std::max(1e-9, vc.h2dt) * vc.tol_scale));
  } else if (name == "monotonicity") {
    EntropyCurve curve = pointed_entropy_curve(h, k);
    double viol_w = 0.0, viol_n = 0.0;
    for (std::size_t j = 0; j + 1 < curve.dense_s.size(); ++j) {
      viol_w = std::max(viol_w, curve.dense_W[j] - curve.dense_W[j + 1]);
      viol_n = std::max(viol_n, curve.dense_N[j] - curve.dense_N[j + 1]);
    }
    double tol = vc.tol_disc();
    reports.push_back(CheckReport::make("monotonicity_W", viol_w, tol, 0.0,
                                        curve.dense_s.front(), k.basepoint));
    reports.push_back(CheckReport::make("monotonicity_N", viol_n, tol, 0.0,
                                        curve.dense_s.front(), k.basepoint));
  } else {
    throw ConfigError("unknown check: " + name);
  }
}

int cmd_flow_run(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  FlowHistory h = cfg.build_flow();
  std::string hist_path = (fs::path(cfg.out_dir) / "history.rflab").string();
  write_container(hist_path, h);
  write_manifest(cfg.out_dir, cfg, "flow-run", {"history.rflab"});
  std::cout << "flow-run: " << h.num_slices() << " slices on ["
            << format_double(h.times.front()) << ", 0], backend "
            << backend_name(h.backend) << "\n";
  return 0;
}

int cmd_kernel_solve(const ExperimentConfig& cfg, const std::string& history_file,
                     const std::string& basepoints_arg) {
  fs::create_directories(cfg.out_dir);
  FlowHistory h = history_file.empty() ? cfg.build_flow()
                                       : read_container(history_file).flow;
  std::vector<NodeIndex> points;
  if (!basepoints_arg.empty()) {
    std::stringstream ss(basepoints_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) points.push_back(std::stoll(tok));
  } else {
    points.push_back(cfg.resolve_basepoint(*h.mesh));
  }
  KernelOptions ko;
  ko.policy = cfg.step_policy();
  ko.store_stride = cfg.store_stride;
  std::vector<KernelHistory> kernels(points.size());
  parallel_for(static_cast<std::int64_t>(points.size()), cfg.workers,
               [&](std::int64_t i) { kernels[i] = solve_conjugate_kernel(h, points[i], ko); });

  std::string path = (fs::path(cfg.out_dir) / "kernels.rflab").string();
  write_container(path, h, kernels);

  std::vector<std::string> outputs = {"kernels.rflab"};
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    EntropyCurve curve = pointed_entropy_curve(h, kernels[i]);
    std::string cpath = "curve_" + std::to_string(points[i]) + ".csv";
    write_file(fs::path(cfg.out_dir) / cpath, curve_to_csv(curve));
    outputs.push_back(cpath);
  }
  write_manifest(cfg.out_dir, cfg, "kernel-solve", outputs);
  std::cout << "kernel-solve: " << kernels.size() << " kernel(s)\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& history_file) {
  fs::create_directories(cfg.out_dir);
  FlowHistory h = history_file.empty() ? cfg.build_flow()
                                       : read_container(history_file).flow;
  KernelOptions ko;
  ko.policy = cfg.step_policy();
  ko.store_stride = cfg.store_stride;
  NodeIndex x0 = cfg.resolve_basepoint(*h.mesh);
  KernelHistory k = solve_conjugate_kernel(h, x0, ko);

  double hmin = h.mesh->min_spacing();
  double dt_typ = (h.num_slices() > 1) ? h.times.back() - h.times[h.num_slices() - 2]
                                       : 0.0;
  VerifyContext vc{cfg, h, k, hmin * hmin + dt_typ, cfg.tolerance_scale, cfg.workers};

  std::vector<CheckReport> reports;
  for (const auto& name : cfg.enabled_checks()) run_check(name, vc, reports);

  write_file(fs::path(cfg.out_dir) / "report.json", reports_to_json(reports));
  write_file(fs::path(cfg.out_dir) / "report.csv", reports_to_csv(reports));
  write_manifest(cfg.out_dir, cfg, "verify", {"report.json", "report.csv"});

  int failures = 0;
  for (const auto& r : reports) {
    std::cout << (r.passed() ? "[pass] " : "[FAIL] ") << r.name
              << "  slack=" << format_double(r.slack)
              << " tol=" << format_double(r.tolerance) << "\n";
    if (!r.passed()) ++failures;
  }
  std::cout << (failures == 0 ? "verify: all checks passed\n"
                              : "verify: " + std::to_string(failures) + " failure(s)\n");
  return failures == 0 ? 0 : 1;
}

int cmd_scan(const ExperimentConfig& cfg, const std::string& history_file) {
  fs::create_directories(cfg.out_dir);
  FlowHistory h = history_file.empty() ? cfg.build_flow()
                                       : read_container(history_file).flow;
  ScanOptions so;
  so.stride = cfg.scan_stride;
  so.workers = cfg.workers;
  so.kernel.policy = cfg.step_policy();
  so.kernel.store_stride = cfg.store_stride;
  ScanResult scan = eps_regularity_scan(h, cfg.scan_s, so);
  write_file(fs::path(cfg.out_dir) / "scan.csv", scan_to_csv(scan));
  write_file(fs::path(cfg.out_dir) / "scan_summary.json",
             scan_summary_to_json(scan, cfg.scan_s));
  write_manifest(cfg.out_dir, cfg, "scan", {"scan.csv", "scan_summary.json"});
  std::cout << "scan: " << scan.records.size()
            << " base points, eps* = " << format_double(scan.summary.eps_star)
            << ", C = " << format_double(scan.summary.C) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ricci-flow entropy laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, history_file, basepoints;
  int workers = -1;
  double tolerance_scale = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--workers", workers, "worker pool size");
    sub->add_option("--tolerance-scale", tolerance_scale, "multiply all tolerances");
  };

  CLI::App* run = app.add_subcommand("flow-run", "build and store a flow history");
  add_common(run);
  CLI::App* solve = app.add_subcommand("kernel-solve", "solve conjugate kernels");
  add_common(solve);
  solve->add_option("--history", history_file, "read the flow from this container");
  solve->add_option("--basepoints", basepoints, "comma-separated node indices");
  CLI::App* verify = app.add_subcommand("verify", "run the verification batteries");
  add_common(verify);
  verify->add_option("--history", history_file, "read the flow from this container");
  CLI::App* scan = app.add_subcommand("scan", "entropy vs regularity-scale scan");
  add_common(scan);
  scan->add_option("--history", history_file, "read the flow from this container");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (workers >= 0) cfg.workers = workers;
    if (tolerance_scale > 0.0) cfg.tolerance_scale = tolerance_scale;

    if (run->parsed()) return cmd_flow_run(cfg);
    if (solve->parsed()) return cmd_kernel_solve(cfg, history_file, basepoints);
    if (verify->parsed()) return cmd_verify(cfg, history_file);
    if (scan->parsed()) return cmd_scan(cfg, history_file);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
