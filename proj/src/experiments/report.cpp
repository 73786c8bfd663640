#include <algorithm>
#include <map>
#include <ostream>

#include "hmt/experiments.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

void VerificationReport::add_upper(const std::string& suite, const std::string& case_id, double measured, double bound, double tolerance) {
  double margin = bound + tolerance - measured;
  rows.push_back({suite, case_id, measured, bound, margin, margin >= 0});
}

void VerificationReport::add_lower(const std::string& suite, const std::string& case_id, double measured, double bound, double tolerance) {
  double margin = measured - (bound - tolerance);
  rows.push_back({suite, case_id, measured, bound, margin, margin >= 0});
}

void VerificationReport::add_range(const std::string& suite, const std::string& case_id, double measured, double lo, double hi) {
  double margin = std::min(measured - lo, hi - measured);
  rows.push_back({suite, case_id + " in [" + stats::format_double(lo) + "," + stats::format_double(hi) + "]", measured, hi, margin, margin >= 0});
}

void VerificationReport::add_flag(const std::string& suite, const std::string& case_id, bool pass, double measured, double reference) {
  rows.push_back({suite, case_id, measured, reference, pass ? 1.0 : -1.0, pass});
}

void VerificationReport::append(const VerificationReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

std::size_t VerificationReport::violations() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.pass; }));
}

std::size_t VerificationReport::violations(const std::string& suite) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.suite == suite && !r.pass; }));
}

std::size_t VerificationReport::cases(const std::string& suite) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.suite == suite; }));
}

const ReportRow* VerificationReport::find(const std::string& suite, const std::string& case_id) const {
  for (const ReportRow& r : rows) {
    if (r.suite == suite && r.case_id.rfind(case_id, 0) == 0) return &r;
  }
  return nullptr;
}

void VerificationReport::finalize(double seconds) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_suite;
  for (const ReportRow& r : rows) {
    auto& c = per_suite[r.suite];
    ++c.first;
    if (!r.pass) ++c.second;
  }
  nlohmann::json suites = nlohmann::json::object();
  for (const auto& [name, c] : per_suite) suites[name] = {{"cases", c.first}, {"violations", c.second}};
  summary["kind"] = kind;
  summary["cases"] = rows.size();
  summary["violations"] = violations();
  summary["suites"] = suites;
  summary["runtime_seconds"] = seconds;
}

void write_csv(std::ostream& out, const VerificationReport& report) {
  stats::write_csv_row(out, {"suite", "case", "measured", "bound_or_reference", "margin", "pass"});
  for (const ReportRow& r : report.rows) {
    stats::write_csv_row(out, {r.suite, r.case_id, stats::format_double(r.measured), stats::format_double(r.bound), stats::format_double(r.margin),
                               r.pass ? "true" : "false"});
  }
}

nlohmann::json summary_json(const VerificationReport& report) { return report.summary; }

}  // namespace hmt::exp
