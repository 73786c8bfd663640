#include <cmath>

#include "common.hpp"
#include "hmt/ergodic.hpp"
#include "hmt/parallel.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

namespace {

double stationary_mean(const ExperimentConfig& cfg) {
  Eigen::RowVectorXd pi = model::stationary_distribution(cfg.theta.transition);
  return pi.dot(cfg.theta.mu.transpose());
}

double parent_product_mean(const ExperimentConfig& cfg) {
  Eigen::RowVectorXd pi = model::stationary_distribution(cfg.theta.transition);
  double sum = 0;
  for (int a = 0; a < cfg.spec.states; ++a)
    for (int b = 0; b < cfg.spec.states; ++b) sum += pi[a] * cfg.theta.transition(a, b) * cfg.theta.mu[a] * cfg.theta.mu[b];
  return sum;
}

void rate_rows(VerificationReport& report, const ergodic::RateReport& rate, double r2_min) {
  const std::string suite = "rate-" + rate.function;
  if (rate.exact) {
    report.add_flag(suite, "all squared errors vanish", true, rate.points.back().mean_sq_error, 0.0);
    return;
  }
  double slope = rate.slope.value_or(std::numeric_limits<double>::quiet_NaN());
  double r2 = rate.r2.value_or(std::numeric_limits<double>::quiet_NaN());
  report.add_upper(suite, "log-linear slope", slope, 0.0);
  report.add_lower(suite, "log-linear R2", r2, r2_min);
  report.add_flag(suite, "geometric envelope rate < 1", rate.envelope_ok, rate.envelope_rate, 1.0);
}

nlohmann::json rate_json(const ergodic::RateReport& rate) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : rate.points) pts.push_back({{"depth", p.depth}, {"mean_sq_error", p.mean_sq_error}, {"se", p.se}});
  nlohmann::json j = {{"function", rate.function}, {"limit", rate.limit}, {"points", pts}, {"exact", rate.exact}};
  if (rate.slope) j["slope"] = *rate.slope;
  if (rate.r2) j["r2"] = *rate.r2;
  j["envelope_constant"] = rate.envelope_constant;
  j["envelope_rate"] = rate.envelope_rate;
  return j;
}

}  // namespace

VerificationReport run_ergodic(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "ergodic";
  if (cfg.spec.family != model::Family::gaussian) throw Error(ErrorCode::invalid_argument, "the ergodic battery uses a gaussian model");
  if (cfg.depths.empty()) throw Error(ErrorCode::invalid_argument, "ergodic needs depths");
  const std::size_t deepest = cfg.depths.back();

  // Shape histogram over G_n and over T_n \ T_{k-1}.
  const auto max_level = cfg.knob<std::size_t>("histogram_max_level");
  for (std::size_t k = 0; k <= max_level && k <= deepest; ++k) {
    for (std::size_t n = k; n <= deepest; ++n) {
      std::vector<std::uint64_t> counts(tree::generation_size(k), 0);
      for (const auto& u : tree::generation(n).vertices) ++counts[tree::shape_of(u, k).index()];
      bool uniform = true;
      for (auto c : counts) uniform = uniform && c == tree::generation_size(n - k);
      report.add_flag("shape-histogram", "G_" + std::to_string(n) + " level " + std::to_string(k) + " uniform", uniform);
    }
    sim::Sample blank;
    blank.depth = deepest;
    blank.y.assign(tree::tree_size(deepest), 0.0);
    bool exact = true;
    for (std::uint64_t j = 0; j < tree::generation_size(k); ++j) {
      double avg = ergodic::empirical_average(ergodic::shape_indicator(k, j), blank, ergodic::Region::below_level());
      exact = exact && avg == std::ldexp(1.0, -static_cast<int>(k));
    }
    report.add_flag("shape-histogram", "T_" + std::to_string(deepest) + " minus T_{k-1}, level " + std::to_string(k) + " average equals 2^-k", exact);
  }

  const double r2_min = cfg.threshold("r2");
  const std::size_t reps = cfg.replicates;
  nlohmann::json rates = nlohmann::json::array();

  auto constant = ergodic::constant_function(2.5);
  auto cl = ergodic::limit_estimate(constant, cfg.spec, cfg.theta, 100, derive_seed(cfg.seed, "constant"), cfg.threads);
  report.add_flag("constant", "limit exact with zero SE", cl.value == 2.5 && cl.standard_error == 0.0, cl.value, 2.5);
  auto cr = ergodic::rate_check(constant, cfg.spec, cfg.theta, cfg.depths, std::min<std::size_t>(reps, 20), derive_seed(cfg.seed, "constant-rate"), 2.5,
                                cfg.threads);
  rate_rows(report, cr, r2_min);
  rates.push_back(rate_json(cr));

  auto mean_f = ergodic::mean_function();
  auto mr = ergodic::rate_check(mean_f, cfg.spec, cfg.theta, cfg.depths, reps, derive_seed(cfg.seed, "mean"), stationary_mean(cfg), cfg.threads);
  rate_rows(report, mr, r2_min);
  rates.push_back(rate_json(mr));

  auto prod_f = ergodic::parent_product_function();
  auto pr = ergodic::rate_check(prod_f, cfg.spec, cfg.theta, cfg.depths, reps, derive_seed(cfg.seed, "product"), parent_product_mean(cfg), cfg.threads);
  rate_rows(report, pr, r2_min);
  rates.push_back(rate_json(pr));

  const auto shape_k = cfg.knob<std::size_t>("shape_k");
  auto shape_f = ergodic::shape_indicator(shape_k, 0);
  auto sr = ergodic::rate_check(shape_f, cfg.spec, cfg.theta, cfg.depths, std::min<std::size_t>(reps, 20), derive_seed(cfg.seed, "shape"),
                                std::ldexp(1.0, -static_cast<int>(shape_k)), cfg.threads);
  rate_rows(report, sr, r2_min);
  rates.push_back(rate_json(sr));

  const auto inc_k = cfg.knob<std::size_t>("increment_k");
  auto inc_f = ergodic::increment_function(cfg.spec, cfg.theta, inc_k, cfg.knob<int>("increment_x"));
  auto inc_limit = ergodic::limit_estimate(inc_f, cfg.spec, cfg.theta, cfg.knob<std::size_t>("limit_reps"), derive_seed(cfg.seed, "increment-limit"),
                                           cfg.threads);
  auto ir = ergodic::rate_check(inc_f, cfg.spec, cfg.theta, cfg.depths, reps, derive_seed(cfg.seed, "increment"), inc_limit.value, cfg.threads);
  rate_rows(report, ir, r2_min);
  rates.push_back(rate_json(ir));

  // Region average of the increment at the deepest level against the limit.
  std::vector<double> region(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    sim::Sample s = sim::sample(cfg.spec, cfg.theta, deepest, sim::RootLaw::stationary(), derive_seed(derive_seed(cfg.seed, "region"), r));
    region[r] = ergodic::empirical_average(inc_f, s, ergodic::Region::below_level());
  });
  stats::MeanSe rm = stats::mean_se(region);
  double tol = 3.0 * std::sqrt(rm.se * rm.se + inc_limit.standard_error * inc_limit.standard_error);
  report.add_upper("increment-limit", "|mean region average - limit| at n=" + std::to_string(deepest), std::abs(rm.mean - inc_limit.value), tol);

  if (cfg.knob<bool>("iid_check")) {
    model::Theta flat = cfg.theta;
    flat.transition.setConstant(1.0 / cfg.spec.states);
    Eigen::RowVectorXd pi = model::stationary_distribution(flat.transition);
    auto fr = ergodic::rate_check(mean_f, cfg.spec, flat, cfg.depths, reps, derive_seed(cfg.seed, "iid"), pi.dot(flat.mu.transpose()), cfg.threads);
    double slope = fr.slope.value_or(std::numeric_limits<double>::quiet_NaN());
    report.add_upper("iid-rate", "|slope + log 2| for uniform transitions", std::abs(slope + std::log(2.0)), cfg.threshold("iid_slope_tolerance"));
    nlohmann::json j = rate_json(fr);
    j["function"] = "mean_uniform_transitions";
    rates.push_back(j);
  }

  report.finalize(clock.seconds());
  report.summary["rates"] = rates;
  report.summary["increment_limit"] = {{"value", inc_limit.value}, {"se", inc_limit.standard_error}};
  return report;
}

VerificationReport run(const ExperimentConfig& cfg) {
  if (cfg.kind == "bounds") return run_bounds(cfg);
  if (cfg.kind == "consistency") return run_consistency(cfg);
  if (cfg.kind == "score-clt") return run_score_clt(cfg);
  if (cfg.kind == "mle-clt") return run_mle_clt(cfg);
  if (cfg.kind == "observed-info") return run_observed_info(cfg);
  if (cfg.kind == "contrast") return run_contrast(cfg);
  if (cfg.kind == "coupling") return run_coupling(cfg);
  if (cfg.kind == "ergodic") return run_ergodic(cfg);
  throw Error(ErrorCode::invalid_argument, "unknown experiment kind '" + cfg.kind + "'");
}

}  // namespace hmt::exp
