#include "rflab/report.hpp"

#include <cstdio>

namespace rflab {

CheckReport CheckReport::make(std::string name, double lhs, double rhs, double tolerance,
                              double s, std::int64_t basepoint, std::string note) {
  CheckReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.tolerance = tolerance;
  r.status = (r.slack >= -tolerance) ? Status::Pass : Status::Fail;
  r.s = s;
  r.basepoint = basepoint;
  r.note = std::move(note);
  return r;
}

CheckReport CheckReport::skipped(std::string name, std::string why) {
  CheckReport r;
  r.name = std::move(name);
  r.status = Status::Skipped;
  r.note = std::move(why);
  return r;
}

std::string status_name(CheckReport::Status s) {
  switch (s) {
    case CheckReport::Status::Pass: return "pass";
    case CheckReport::Status::Fail: return "fail";
    case CheckReport::Status::Skipped: return "skipped";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {
std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}
}  // namespace

std::string reports_to_json(const std::vector<CheckReport>& reports) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CheckReport& r = reports[i];
    out += "  {\"check\":\"" + json_escape(r.name) + "\"";
    out += ",\"lhs\":" + format_double(r.lhs);
    out += ",\"rhs\":" + format_double(r.rhs);
    out += ",\"slack\":" + format_double(r.slack);
    out += ",\"tolerance\":" + format_double(r.tolerance);
    out += ",\"status\":\"" + status_name(r.status) + "\"";
    out += ",\"s\":" + format_double(r.s);
    out += ",\"basepoint\":" + std::to_string(r.basepoint);
    out += ",\"note\":\"" + json_escape(r.note) + "\"}";
    out += (i + 1 < reports.size()) ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

std::string reports_to_csv(const std::vector<CheckReport>& reports) {
  std::string out = "check,s,lhs,rhs,slack,tolerance,status\n";
  for (const CheckReport& r : reports) {
    out += r.name + "," + format_double(r.s) + "," + format_double(r.lhs) + "," +
           format_double(r.rhs) + "," + format_double(r.slack) + "," +
           format_double(r.tolerance) + "," + status_name(r.status) + "\n";
  }
  return out;
}

bool all_passed(const std::vector<CheckReport>& reports) {
  for (const auto& r : reports)
    if (!r.passed()) return false;
  return true;
}

}  // namespace rflab
