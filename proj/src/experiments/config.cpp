#include <fstream>

#include "hmt/error.hpp"
#include "hmt/experiments.hpp"

namespace hmt::exp {

namespace {

using nlohmann::json;

json default_model() { return {{"states", 2}, {"emission", {{"family", "gaussian"}}}, {"epsilon_floor", 1e-3}}; }

json default_theta() {
  return {{"transition", {{0.6, 0.4}, {0.45, 0.55}}}, {"emission", {{"mu", {-1.0, 1.0}}, {"sigma", {1.0, 1.0}}}}};
}

json base(const std::string& kind, std::vector<std::size_t> depths, std::size_t reps, std::uint64_t seed) {
  return {{"schema", kConfigSchema}, {"kind", kind},         {"model", default_model()}, {"theta", default_theta()},
          {"depths", depths},        {"replicates", reps}, {"seed", seed},             {"thresholds", json::object()},
          {"knobs", json::object()}};
}

json default_json(const std::string& kind) {
  if (kind == "bounds") {
    json j = base(kind, {}, 1, 101);
    j["thresholds"] = {{"probability_tolerance", 1e-12}, {"log_tolerance", 1e-9}};
    j["knobs"] = {{"suite", "all"},          {"random_models", true},   {"forgetting_cases", 1000}, {"cauchy_cases", 500},
                  {"backward_cases", 500},   {"two_vertex_cases", 500}, {"kernel_pairs", 10000},    {"telescoping_cases", 200},
                  {"block_cases", 200},      {"max_depth", 5},          {"max_extension", 4}};
    return j;
  }
  if (kind == "consistency") {
    json j = base(kind, {4, 6, 8, 10}, 100, 202);
    j["thresholds"] = {{"ratio_low", 0.35}, {"ratio_high", 0.75}};
    j["knobs"] = {{"root_laws", json::array({"stationary", "dirac:0"})}, {"root_state", 0}, {"random_starts", 2},
                  {"max_iter", 500},                        {"tol", 1e-8},     {"packed_box", nullptr}};
    j["thresholds"]["agreement_p"] = 0.01;
    return j;
  }
  if (kind == "score-clt") {
    json j = base(kind, {8}, 500, 303);
    j["thresholds"] = {{"mean_se", 4.0}, {"covariance_rel", 0.15}, {"ks_p", 0.01}};
    j["knobs"] = {{"root_state", "true"}, {"fisher_k", 6}, {"fisher_reps", 50000}};
    return j;
  }
  if (kind == "mle-clt") {
    json j = base(kind, {8}, 500, 404);
    j["thresholds"] = {{"coverage_low", 0.91},    {"coverage_high", 0.98},       {"whitened_covariance", 0.15}, {"two_sample_p", 0.01},
                       {"information_rel", 0.10}, {"mc_error_multiplier", 2.0}, {"identity_se", 3.0},          {"max_condition", 1e8}};
    j["knobs"] = {{"root_laws", json::array({"stationary", "dirac:0"})}, {"root_state", 0}, {"init", "moment"},   {"random_starts", 1},
                  {"max_iter", 500},                        {"tol", 1e-8},     {"fisher_k", 6},       {"fisher_reps", 50000},
                  {"identity_root_state", "true"}};
    return j;
  }
  if (kind == "observed-info") {
    json j = base(kind, {6, 8, 10}, 100, 505);
    j["thresholds"] = {{"information_rel", 0.10}, {"mc_error_multiplier", 2.0}, {"identity_se", 3.0}};
    j["knobs"] = {{"root_state", "true"}, {"fisher_k", 6}, {"fisher_reps", 50000}, {"deltas", {0.2, 0.1, 0.05}}, {"ball_points", 8},
                  {"identity_reps", 300}};
    return j;
  }
  if (kind == "contrast") {
    json j = base(kind, {4, 6, 8, 10}, 20000, 606);
    j["thresholds"] = {{"se_multiplier", 2.0}, {"permutation_tolerance", 1e-9}};
    j["knobs"] = {{"k", 6}, {"grid_size", 20}, {"grid_scale", 0.3}, {"root_state", "true"}, {"likelihood_reps", 20}};
    return j;
  }
  if (kind == "coupling") {
    json j = base(kind, {20}, 10000, 707);
    j["theta"]["transition"] = {{0.6, 0.4}, {0.4, 0.6}};
    j["thresholds"] = {{"offspring_mean_tolerance", 0.05}, {"chi2_alpha", 1e-3}, {"finite_fraction", 0.99}};
    j["knobs"] = {{"zeta", "dirac:0"}, {"root_coupling", "maximal"}, {"contrast_transition", {{0.8, 0.2}, {0.2, 0.8}}}};
    return j;
  }
  if (kind == "ergodic") {
    json j = base(kind, {4, 5, 6, 7, 8, 9, 10}, 200, 808);
    j["thresholds"] = {{"r2", 0.9}, {"iid_slope_tolerance", 0.1}};
    j["knobs"] = {{"increment_k", 2}, {"increment_x", 0},          {"shape_k", 2},
                  {"limit_reps", 100000}, {"histogram_max_level", 4}, {"iid_check", true}};
    return j;
  }
  throw Error(ErrorCode::invalid_argument, "unknown experiment kind '" + kind + "'");
}

void merge_known(json& target, const json& source, const std::string& where) {
  if (!source.is_object()) throw Error(ErrorCode::invalid_argument, where + " must be an object");
  for (auto it = source.begin(); it != source.end(); ++it) {
    if (!target.contains(it.key())) throw Error(ErrorCode::invalid_argument, "unknown key '" + it.key() + "' in " + where);
    target[it.key()] = it.value();
  }
}

}  // namespace

double ExperimentConfig::threshold(const std::string& key) const {
  if (!thresholds.contains(key)) throw Error(ErrorCode::invalid_argument, "missing threshold '" + key + "'");
  return thresholds.at(key).get<double>();
}

std::vector<std::string> experiment_kinds() {
  return {"bounds", "consistency", "score-clt", "mle-clt", "observed-info", "contrast", "coupling", "ergodic"};
}

std::vector<std::string> bound_suites() { return {"forgetting", "cauchy", "backward", "two-vertex", "dobrushin", "telescoping", "block"}; }

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "config must be a JSON object");
  if (!j.contains("schema") || j.at("schema") != kConfigSchema)
    throw Error(ErrorCode::invalid_argument, std::string("config schema must be \"") + kConfigSchema + "\"");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw Error(ErrorCode::invalid_argument, "config needs a string \"kind\"");
  json full = default_json(j.at("kind").get<std::string>());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!full.contains(it.key())) throw Error(ErrorCode::invalid_argument, "unknown config key '" + it.key() + "'");
    if (it.key() == "thresholds" || it.key() == "knobs") {
      merge_known(full[it.key()], it.value(), it.key());
    } else {
      full[it.key()] = it.value();
    }
  }
  ExperimentConfig cfg;
  try {
    cfg.kind = full.at("kind").get<std::string>();
    cfg.spec = model::model_from_json(full.at("model"));
    cfg.theta = model::theta_from_json(cfg.spec, full.at("theta"));
    cfg.depths = full.at("depths").get<std::vector<std::size_t>>();
    long long reps = full.at("replicates").get<long long>();
    if (reps < 1) throw Error(ErrorCode::invalid_argument, "replicates must be at least 1");
    cfg.replicates = static_cast<std::size_t>(reps);
    cfg.seed = full.at("seed").get<std::uint64_t>();
    cfg.thresholds = full.at("thresholds");
    cfg.knobs = full.at("knobs");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed config: ") + e.what());
  }
  for (auto it = cfg.thresholds.begin(); it != cfg.thresholds.end(); ++it) {
    if (!it.value().is_number() || !(it.value().get<double>() > 0))
      throw Error(ErrorCode::invalid_argument, "threshold '" + it.key() + "' must be a positive number");
  }
  model::validate_theta(cfg.spec, cfg.theta);
  return cfg;
}

ExperimentConfig default_config(const std::string& kind) { return config_from_json(default_json(kind)); }

ExperimentConfig load_config(const std::string& path) { return config_from_json(model::read_json_file(path)); }

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"schema", kConfigSchema},    {"kind", cfg.kind},         {"model", model::to_json(cfg.spec)},
          {"theta", model::to_json(cfg.spec, cfg.theta)}, {"depths", cfg.depths}, {"replicates", cfg.replicates},
          {"seed", cfg.seed},           {"thresholds", cfg.thresholds}, {"knobs", cfg.knobs}};
}

}  // namespace hmt::exp
