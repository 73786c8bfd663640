#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmt/model.hpp"

namespace hmt::exp {

// One batch configuration. `thresholds` and `knobs` start from the defaults of
// the kind; a config file may only override keys that exist there.
struct ExperimentConfig {
  std::string kind;
  model::ModelSpec spec;
  model::Theta theta;
  std::vector<std::size_t> depths;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  nlohmann::json thresholds = nlohmann::json::object();
  nlohmann::json knobs = nlohmann::json::object();
  int threads = 1;

  double threshold(const std::string& key) const;
  template <class T>
  T knob(const std::string& key) const {
    return knobs.at(key).get<T>();
  }
};

inline constexpr const char* kConfigSchema = "hmt-experiment/1";

// Kinds: consistency, score-clt, mle-clt, observed-info, contrast, coupling,
// ergodic, and bounds (with knobs.suite naming the inequality suite).
std::vector<std::string> experiment_kinds();
std::vector<std::string> bound_suites();
ExperimentConfig default_config(const std::string& kind);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct ReportRow {
  std::string suite;
  std::string case_id;
  double measured = 0;
  double bound = 0;
  double margin = 0;  // positive when the check passes with room
  bool pass = true;
};

struct VerificationReport {
  std::string kind;
  std::vector<ReportRow> rows;
  nlohmann::json summary = nlohmann::json::object();

  // measured <= bound + tolerance.
  void add_upper(const std::string& suite, const std::string& case_id, double measured, double bound, double tolerance = 0);
  // measured >= bound - tolerance.
  void add_lower(const std::string& suite, const std::string& case_id, double measured, double bound, double tolerance = 0);
  // lo <= measured <= hi.
  void add_range(const std::string& suite, const std::string& case_id, double measured, double lo, double hi);
  void add_flag(const std::string& suite, const std::string& case_id, bool pass, double measured = 0, double reference = 0);
  void append(const VerificationReport& other);

  std::size_t violations() const;
  std::size_t violations(const std::string& suite) const;
  std::size_t cases(const std::string& suite) const;
  const ReportRow* find(const std::string& suite, const std::string& case_id) const;
  // Fills in counts per suite.
  void finalize(double seconds);
};

void write_csv(std::ostream& out, const VerificationReport& report);
nlohmann::json summary_json(const VerificationReport& report);

VerificationReport run_bounds(const ExperimentConfig& cfg);
VerificationReport run_consistency(const ExperimentConfig& cfg);
VerificationReport run_score_clt(const ExperimentConfig& cfg);
VerificationReport run_mle_clt(const ExperimentConfig& cfg);
VerificationReport run_observed_info(const ExperimentConfig& cfg);
VerificationReport run_contrast(const ExperimentConfig& cfg);
VerificationReport run_coupling(const ExperimentConfig& cfg);
VerificationReport run_ergodic(const ExperimentConfig& cfg);

// Dispatches on cfg.kind.
VerificationReport run(const ExperimentConfig& cfg);

}  // namespace hmt::exp
