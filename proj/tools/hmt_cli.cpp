#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hmt/error.hpp"
#include "hmt/estimation.hpp"
#include "hmt/experiments.hpp"
#include "hmt/inference.hpp"
#include "hmt/model.hpp"
#include "hmt/simulate.hpp"

using namespace hmt;

namespace {

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  std::uint64_t s = seed ? *seed : entropy_seed();
  std::cerr << "seed: " << s << "\n";
  return s;
}

model::ModelSpec load_model(const std::string& path) {
  try {
    return model::model_from_json(model::read_json_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

// Accepts a theta document or a fit result carrying "theta_hat".
model::Theta load_theta(const model::ModelSpec& spec, const std::string& path) {
  try {
    nlohmann::json j = model::read_json_file(path);
    if (j.is_object() && j.contains("theta_hat")) j = j.at("theta_hat");
    model::Theta theta = model::theta_from_json(spec, j);
    model::validate_theta(spec, theta);
    return theta;
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

sim::Sample load_sample(const model::ModelSpec& spec, const std::string& path) {
  try {
    return sim::read_jsonl_file(path, spec);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

sim::RootLaw parse_root_law(const std::string& text, int states) {
  if (text == "stationary") return sim::RootLaw::stationary();
  if (text.rfind("dirac:", 0) == 0) {
    try {
      return sim::RootLaw::dirac(std::stoi(text.substr(6)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::invalid_root_law, "--root-law: bad dirac state in '" + text + "'");
    }
  }
  if (text.rfind("custom:", 0) == 0) {
    std::string path = text.substr(7);
    nlohmann::json j = model::read_json_file(path);
    if (!j.is_array() || static_cast<int>(j.size()) != states) throw Error(ErrorCode::invalid_root_law, path + ": expected an array of " + std::to_string(states) + " weights");
    Eigen::RowVectorXd w(states);
    for (int s = 0; s < states; ++s) w[s] = j.at(static_cast<std::size_t>(s)).get<double>();
    return sim::RootLaw::custom(w);
  }
  throw Error(ErrorCode::invalid_root_law, "--root-law: expected stationary, dirac:<x> or custom:<path>, got '" + text + "'");
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text << "\n";
  } else {
    model::write_text_file(out, text + "\n");
  }
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::string summary_path(const std::string& out) {
  std::string base = out;
  if (base.size() > 4 && base.compare(base.size() - 4, 4, ".csv") == 0) base.resize(base.size() - 4);
  return base + ".summary.json";
}

int write_report(const exp::VerificationReport& report, const std::string& out) {
  std::string summary = model::dump_json(exp::summary_json(report), 2);
  if (out.empty()) {
    exp::write_csv(std::cout, report);
    std::cerr << summary << "\n";
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error(ErrorCode::io, "cannot write " + out);
    exp::write_csv(f, report);
    model::write_text_file(summary_path(out), summary + "\n");
  }
  std::cerr << report.kind << ": " << report.rows.size() << " cases, " << report.violations() << " violations\n";
  return report.violations() == 0 ? 0 : 2;
}

exp::ExperimentConfig resolve_config(const std::string& kind, const std::string& path, const std::optional<std::uint64_t>& seed, int threads) {
  exp::ExperimentConfig cfg = path.empty() ? exp::default_config(kind) : exp::load_config(path);
  if (cfg.kind != kind) throw Error(ErrorCode::invalid_argument, path + ": config kind '" + cfg.kind + "' does not match '" + kind + "'");
  if (seed) cfg.seed = *seed;
  cfg.threads = threads;
  std::cerr << "seed: " << cfg.seed << "\n";
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov trees: simulation, estimation and verification"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string model_path, theta_path, data_path, out, root_law = "stationary", init = "moment", method = "louis", suite, kind, config;
  std::size_t depth = 0;
  int root_state = 0, max_iter = 500, random_starts = 0;
  double tol = 1e-8;
  bool no_polish = false, normalized = false;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "Simulate observations on T_n");
  simulate->add_option("--model", model_path, "model.json")->required();
  simulate->add_option("--theta", theta_path, "theta.json")->required();
  simulate->add_option("--depth", depth, "Tree depth n")->required();
  simulate->add_option("--root-law", root_law, "stationary | dirac:<x> | custom:<path>");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--out", out, "Output JSONL path")->required();

  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit");
  fit->add_option("--data", data_path, "Sample JSONL")->required();
  fit->add_option("--model", model_path, "model.json")->required();
  fit->add_option("--root-state", root_state, "Conditioning root state x");
  fit->add_option("--init", init, "random:<seed> | random | moment | file:<path>");
  fit->add_option("--max-iter", max_iter, "EM iterations")->check(CLI::PositiveNumber);
  fit->add_option("--tol", tol, "EM tolerance on log-likelihood improvement")->check(CLI::PositiveNumber);
  fit->add_option("--random-starts", random_starts, "Additional random starts");
  fit->add_option("--seed", seed, "Seed for random starts");
  fit->add_flag("--no-polish", no_polish, "Skip the quasi-Newton refinement");
  fit->add_option("--out", out, "Output fit.json path");

  auto* score = app.add_subcommand("score", "Score vector of the log-likelihood");
  score->add_option("--data", data_path, "Sample JSONL")->required();
  score->add_option("--model", model_path, "model.json")->required();
  score->add_option("--theta", theta_path, "theta.json or fit.json")->required();
  score->add_option("--root-state", root_state, "Conditioning root state x");
  score->add_option("--out", out, "Output path (stdout if omitted)");

  auto* info = app.add_subcommand("info", "Observed information matrix");
  info->add_option("--data", data_path, "Sample JSONL")->required();
  info->add_option("--model", model_path, "model.json")->required();
  info->add_option("--theta", theta_path, "theta.json or fit.json")->required();
  info->add_option("--root-state", root_state, "Conditioning root state x");
  info->add_option("--method", method, "louis | finite-diff")->check(CLI::IsMember({"louis", "finite-diff"}));
  info->add_flag("--normalized", normalized, "Divide by |T_n|");
  info->add_option("--out", out, "Output path (stdout if omitted)");

  auto* verify = app.add_subcommand("verify", "Run an inequality suite");
  verify->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(exp::bound_suites()));
  verify->add_option("--config", config, "Experiment config (kind bounds)");
  verify->add_option("--seed", seed, "Override the config seed");
  verify->add_option("--out", out, "Report CSV path");

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  std::vector<std::string> kinds;
  for (const auto& k : exp::experiment_kinds())
    if (k != "bounds") kinds.push_back(k);
  experiment->add_option("--kind", kind, "Experiment kind")->required()->check(CLI::IsMember(kinds));
  experiment->add_option("--config", config, "Experiment config");
  experiment->add_option("--seed", seed, "Override the config seed");
  experiment->add_option("--out", out, "Report CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) {
      model::ModelSpec spec = load_model(model_path);
      model::Theta theta = load_theta(spec, theta_path);
      sim::RootLaw law = parse_root_law(root_law, spec.states);
      sim::Sample s = sim::sample(spec, theta, depth, law, resolve_seed(seed));
      sim::write_jsonl_file(out, spec, s);
      return 0;
    }
    if (*fit) {
      model::ModelSpec spec = load_model(model_path);
      sim::Sample s = load_sample(spec, data_path);
      est::Init start = est::Init::moment();
      if (init == "random" || init.rfind("random:", 0) == 0) {
        std::optional<std::uint64_t> init_seed;
        if (init.size() > 7) init_seed = std::stoull(init.substr(7));
        start = est::Init::random(resolve_seed(init_seed ? init_seed : seed));
      } else if (init.rfind("file:", 0) == 0) {
        start = est::Init::given(load_theta(spec, init.substr(5)));
      } else if (init != "moment") {
        throw Error(ErrorCode::invalid_argument, "--init: expected random:<seed>, random, moment or file:<path>, got '" + init + "'");
      }
      est::FitOptions options;
      options.max_iter = max_iter;
      options.tol = tol;
      options.polish = !no_polish;
      options.extra_random_starts = random_starts;
      if (random_starts > 0) options.start_seed = resolve_seed(seed);
      est::FitResult result = est::fit_mle(s, root_state, spec, start, options);
      emit(out, model::dump_json(est::to_json(spec, result), 2));
      std::cerr << "loglik: " << result.loglik << (result.converged ? "" : " (not converged)") << "\n";
      return 0;
    }
    if (*score || *info) {
      model::ModelSpec spec = load_model(model_path);
      model::Theta theta = load_theta(spec, theta_path);
      sim::Sample s = load_sample(spec, data_path);
      model::Evaluator ev(spec, theta, true);
      nlohmann::json j = {{"names", model::coordinate_names(spec)}, {"x_root", root_state}};
      if (*score) {
        Eigen::VectorXd g = est::score(ev, s, root_state).total;
        j["score"] = std::vector<double>(g.data(), g.data() + g.size());
        j["loglik"] = infer::log_likelihood(ev, s, root_state);
      } else {
        auto m = est::observed_information(ev, s, root_state, method == "louis" ? est::InfoMethod::louis : est::InfoMethod::finite_diff);
        if (normalized) m.matrix /= static_cast<double>(s.size());
        j["method"] = method;
        j["normalized"] = normalized;
        j["matrix"] = matrix_json(m.matrix);
      }
      emit(out, model::dump_json(j, 2));
      return 0;
    }
    if (*verify) {
      exp::ExperimentConfig cfg = resolve_config("bounds", config, seed, threads);
      cfg.knobs["suite"] = suite;
      return write_report(exp::run_bounds(cfg), out);
    }
    if (*experiment) {
      exp::ExperimentConfig cfg = resolve_config(kind, config, seed, threads);
      return write_report(exp::run(cfg), out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
