#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rflab {

/// Outcome of one named verification: LHS <= RHS is the asserted direction,
/// slack = RHS - LHS, pass iff slack >= -tolerance. Skipped means the check's
/// hypotheses could not be certified, not that it failed.
struct CheckReport {
  enum class Status { Pass, Fail, Skipped };

  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  Status status = Status::Pass;
  double s = 0.0;
  std::int64_t basepoint = -1;
  std::string note;

  bool passed() const { return status != Status::Fail; }

  static CheckReport make(std::string name, double lhs, double rhs, double tolerance,
                          double s = 0.0, std::int64_t basepoint = -1,
                          std::string note = "");
  static CheckReport skipped(std::string name, std::string why);
};

std::string status_name(CheckReport::Status s);

/// JSON array of reports (stable field order, %.17g numbers).
std::string reports_to_json(const std::vector<CheckReport>& reports);
/// CSV rows: check,s,lhs,rhs,slack,tolerance,status
std::string reports_to_csv(const std::vector<CheckReport>& reports);

bool all_passed(const std::vector<CheckReport>& reports);

/// Number formatting used by every emitter (deterministic, round-trip exact).
std::string format_double(double v);

}  // namespace rflab
