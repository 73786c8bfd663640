#include <cmath>

#include "common.hpp"
#include "hmt/estimation.hpp"
#include "hmt/parallel.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

namespace {

struct Fitted {
  double error = 0;
  bool monotone = true;
  bool converged = false;
};

}  // namespace

VerificationReport run_consistency(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "consistency";
  const auto laws = detail::root_laws(cfg);
  const int x_root = detail::root_state_knob(cfg, "root_state");
  if (x_root < 0) throw Error(ErrorCode::invalid_argument, "consistency fits need a fixed root_state");
  for (std::size_t i = 1; i < cfg.depths.size(); ++i) {
    if (cfg.depths[i] <= cfg.depths[i - 1]) throw Error(ErrorCode::invalid_argument, "depths must be strictly increasing");
  }
  est::FitOptions options;
  options.max_iter = cfg.knob<int>("max_iter");
  options.tol = cfg.knob<double>("tol");
  options.extra_random_starts = cfg.knob<int>("random_starts");
  if (!cfg.knobs.at("packed_box").is_null()) options.packed_box = cfg.knob<double>("packed_box");
  const Eigen::VectorXd truth = model::natural_coordinates(cfg.spec, cfg.theta);
  const double lo = cfg.threshold("ratio_low"), hi = cfg.threshold("ratio_high");

  nlohmann::json per_law = nlohmann::json::object();
  std::vector<std::vector<double>> last_errors;
  for (std::size_t li = 0; li < laws.size(); ++li) {
    const std::string law = laws[li].describe();
    const std::string suite = "consistency-" + law;
    std::vector<double> medians, rmses;
    nlohmann::json depth_rows = nlohmann::json::array();
    std::size_t non_monotone = 0;
    for (std::size_t n : cfg.depths) {
      std::vector<Fitted> fits(cfg.replicates);
      const std::uint64_t base = derive_seed(derive_seed(cfg.seed, law), n);
      parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        const std::uint64_t rep = derive_seed(base, r);
        sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, laws[li], derive_seed(rep, "data"));
        est::FitOptions opt = options;
        opt.start_seed = derive_seed(rep, "starts");
        est::FitResult fit = est::fit_mle(s, x_root, cfg.spec, est::Init::moment(), opt);
        auto perm = model::best_alignment(cfg.spec, fit.theta_hat, cfg.theta);
        model::Theta aligned = model::permute(cfg.spec, fit.theta_hat, perm);
        Fitted f;
        f.error = (model::natural_coordinates(cfg.spec, aligned) - truth).norm();
        f.converged = fit.converged;
        for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
          if (fit.loglik_trace[t] < fit.loglik_trace[t - 1] - 1e-10) f.monotone = false;
        }
        fits[r] = f;
      });
      std::vector<double> errors;
      double sq = 0;
      std::size_t converged = 0;
      for (const Fitted& f : fits) {
        errors.push_back(f.error);
        sq += f.error * f.error;
        if (!f.monotone) ++non_monotone;
        if (f.converged) ++converged;
      }
      medians.push_back(stats::median(errors));
      rmses.push_back(std::sqrt(sq / static_cast<double>(errors.size())));
      depth_rows.push_back({{"depth", n}, {"median_error", medians.back()}, {"rmse", rmses.back()}, {"converged", converged}});
      if (n == cfg.depths.back()) last_errors.push_back(errors);
    }
    for (std::size_t i = 1; i < cfg.depths.size(); ++i) {
      std::string step = "n=" + std::to_string(cfg.depths[i - 1]) + "->" + std::to_string(cfg.depths[i]);
      report.rows.push_back({suite, "median decreasing " + step, medians[i], medians[i - 1], medians[i - 1] - medians[i], medians[i] < medians[i - 1]});
      report.add_range(suite, "rmse ratio " + step, rmses[i] / rmses[i - 1], lo, hi);
    }
    report.add_upper(suite, "non-monotone EM traces", static_cast<double>(non_monotone), 0.0);
    per_law[law] = depth_rows;
  }
  if (last_errors.size() >= 2) {
    for (std::size_t li = 1; li < last_errors.size(); ++li) {
      stats::KsResult ks = stats::ks_two_sample(last_errors[0], last_errors[li]);
      report.add_lower("consistency-agreement", laws[0].describe() + " vs " + laws[li].describe() + " error law at n=" + std::to_string(cfg.depths.back()),
                       ks.p_value, cfg.threshold("agreement_p"));
    }
  }
  report.finalize(clock.seconds());
  report.summary["per_root_law"] = per_law;
  report.summary["rho"] = model::mixing_profile(cfg.theta.transition).rho;
  return report;
}

}  // namespace hmt::exp
