#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "common.hpp"
#include "hmt/estimation.hpp"
#include "hmt/inference.hpp"
#include "hmt/parallel.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

VerificationReport run_contrast(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "contrast";
  const auto k = cfg.knob<std::size_t>("k");
  if (k < 2) throw Error(ErrorCode::invalid_argument, "contrast needs k >= 2");
  const int x_knob = detail::root_state_knob(cfg, "root_state");
  const auto grid_size = cfg.knob<std::size_t>("grid_size");
  const double scale = cfg.knob<double>("grid_scale");
  const int d = cfg.spec.dimension();
  const int states = cfg.spec.states;

  // Candidates: θ*, its nontrivial relabelings, then the perturbation grid.
  std::vector<model::Theta> thetas{cfg.theta};
  std::vector<std::vector<int>> perms{{}};
  std::vector<int> perm(static_cast<std::size_t>(states));
  std::iota(perm.begin(), perm.end(), 0);
  while (std::next_permutation(perm.begin(), perm.end())) {
    thetas.push_back(model::permute(cfg.spec, cfg.theta, perm));
    perms.push_back(perm);
  }
  const std::size_t first_grid = thetas.size();
  const Eigen::VectorXd center = model::pack(cfg.spec, cfg.theta).values;
  Stream grid_rng(derive_seed(cfg.seed, "grid"));
  std::normal_distribution<double> normal;
  for (std::size_t g = 0; g < grid_size; ++g) {
    Eigen::VectorXd p = center;
    for (int i = 0; i < d; ++i) p[i] += scale * normal(grid_rng);
    thetas.push_back(model::unpack(cfg.spec, p));
  }
  std::vector<model::Evaluator> evals;
  for (const auto& t : thetas) evals.emplace_back(cfg.spec, t);

  // Increment h_{U_k,k,x}(θ) for every candidate on common samples.
  const std::size_t reps = cfg.replicates;
  Eigen::MatrixXd h(static_cast<Eigen::Index>(thetas.size()), static_cast<Eigen::Index>(reps));
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    std::uint64_t rep = derive_seed(cfg.seed, r);
    sim::Sample s = sim::sample(cfg.spec, cfg.theta, k, sim::RootLaw::stationary(), rep);
    Stream pick(derive_seed(rep, "vertex"));
    std::uint64_t u = tree::tree_size(k - 1) + pick() % tree::generation_size(k);
    int x = detail::resolve_root(x_knob, s);
    for (std::size_t c = 0; c < thetas.size(); ++c) {
      int xc = c > 0 && c < first_grid ? est::relabeled_state(perms[c], x) : x;
      h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = infer::increment_value(evals[c], s, u, k, xc);
    }
  });

  auto row = [&](std::size_t c) {
    std::vector<double> v(reps);
    for (std::size_t r = 0; r < reps; ++r) v[r] = h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
    return v;
  };
  const std::vector<double> star = row(0);
  const stats::MeanSe star_stats = stats::mean_se(star);
  const double mult = cfg.threshold("se_multiplier");
  nlohmann::json contrasts = nlohmann::json::array();
  for (std::size_t c = 1; c < thetas.size(); ++c) {
    std::vector<double> other = row(c), diff(reps);
    for (std::size_t r = 0; r < reps; ++r) diff[r] = star[r] - other[r];
    stats::MeanSe m = stats::mean_se(diff);
    contrasts.push_back(stats::mean_se(other).mean);
    if (c < first_grid) {
      report.add_upper("contrast-permutation", "relabeling " + std::to_string(c) + " |difference|", std::abs(m.mean), mult * m.se,
                       cfg.threshold("permutation_tolerance"));
    } else {
      report.add_lower("contrast-grid", "grid point " + std::to_string(c - first_grid) + " truth minus candidate", m.mean, 0.0, mult * m.se);
    }
  }

  // |ℓ_{n,x}(θ)/|T_n| − ℓ̂(θ)| across depths, for θ* and the first grid point.
  const auto lreps = cfg.knob<std::size_t>("likelihood_reps");
  nlohmann::json convergence = nlohmann::json::array();
  for (std::size_t c : {std::size_t{0}, first_grid}) {
    if (c >= thetas.size()) continue;
    double limit = stats::mean_se(row(c)).mean;
    std::vector<double> gaps;
    for (std::size_t n : cfg.depths) {
      std::vector<double> dev(lreps);
      parallel_for(lreps, cfg.threads, [&](std::size_t r) {
        sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, sim::RootLaw::stationary(), derive_seed(derive_seed(cfg.seed, "likelihood"), n * 1000003 + r));
        dev[r] = std::abs(infer::log_likelihood(evals[c], s, detail::resolve_root(x_knob, s)) / static_cast<double>(s.size()) - limit);
      });
      gaps.push_back(stats::mean_se(dev).mean);
    }
    std::string who = c == 0 ? "truth" : "grid point 0";
    for (std::size_t i = 1; i < gaps.size(); ++i) {
      report.add_flag("contrast-convergence",
                      who + " n=" + std::to_string(cfg.depths[i - 1]) + "->" + std::to_string(cfg.depths[i]) + " mean |l_n/|T_n| - contrast| decreasing",
                      gaps[i] < gaps[i - 1], gaps[i], gaps[i - 1]);
    }
    convergence.push_back({{"candidate", who}, {"contrast", limit}, {"mean_abs_gap", gaps}});
  }

  report.finalize(clock.seconds());
  report.summary["contrast_truth"] = star_stats.mean;
  report.summary["contrast_truth_se"] = star_stats.se;
  report.summary["contrast_candidates"] = contrasts;
  report.summary["likelihood_convergence"] = convergence;
  return report;
}

}  // namespace hmt::exp
