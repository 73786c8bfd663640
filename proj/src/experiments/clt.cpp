#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "common.hpp"
#include "hmt/estimation.hpp"
#include "hmt/inference.hpp"
#include "hmt/parallel.hpp"
#include "hmt/stats.hpp"

namespace hmt::exp {

namespace {

using detail::fmt;

Eigen::MatrixXd sym_power(const Eigen::MatrixXd& m, double power) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() <= 0) throw Error(ErrorCode::singular_information, "matrix is not positive definite");
  return eig.eigenvectors() * values.array().pow(power).matrix().asDiagonal() * eig.eigenvectors().transpose();
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

// Columns are observations.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& z) {
  Eigen::VectorXd mean = z.rowwise().mean();
  Eigen::MatrixXd c = z.colwise() - mean;
  return c * c.transpose() / static_cast<double>(z.cols() - 1);
}

std::vector<double> row_values(const Eigen::MatrixXd& z, Eigen::Index i) {
  std::vector<double> v(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index r = 0; r < z.cols(); ++r) v[static_cast<std::size_t>(r)] = z(i, r);
  return v;
}

// Smallest per-coordinate KS p-value times the dimension (Bonferroni).
double whitened_ks(const Eigen::MatrixXd& z) {
  double p = 1.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) p = std::min(p, stats::ks_standard_normal(row_values(z, i)).p_value);
  return std::min(1.0, p * static_cast<double>(z.rows()));
}

double two_sample_ks(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double p = 1.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) p = std::min(p, stats::ks_two_sample(row_values(a, i), row_values(b, i)).p_value);
  return std::min(1.0, p * static_cast<double>(a.rows()));
}

std::string entry(const std::vector<std::string>& names, Eigen::Index i, Eigen::Index j) {
  return "(" + names[static_cast<std::size_t>(i)] + "," + names[static_cast<std::size_t>(j)] + ")";
}

// Entrywise |estimate - reference| / sqrt(ref_ii ref_jj) <= rel + slack_ij / sqrt(ref_ii ref_jj).
void compare_matrix(VerificationReport& report, const std::string& suite, const std::string& label, const std::vector<std::string>& names,
                    const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference, double rel, const Eigen::MatrixXd& slack) {
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    for (Eigen::Index j = i; j < reference.cols(); ++j) {
      double scale = std::sqrt(reference(i, i) * reference(j, j));
      report.add_upper(suite, label + " " + entry(names, i, j), std::abs(estimate(i, j) - reference(i, j)) / scale, rel + slack(i, j) / scale);
    }
  }
}

struct Limit {
  Eigen::MatrixXd info;
  Eigen::MatrixXd se;
};

Limit fisher_limit(const ExperimentConfig& cfg) {
  auto fl = est::fisher_limit_estimate(cfg.spec, cfg.theta, cfg.knob<std::size_t>("fisher_k"), cfg.knob<std::size_t>("fisher_reps"),
                                       derive_seed(cfg.seed, "fisher-limit"), cfg.threads);
  return {fl.mean, fl.standard_error};
}

void hypothesis_note(VerificationReport& report, const ExperimentConfig& cfg, double limit) {
  double rho = model::mixing_profile(cfg.theta.transition).rho;
  report.summary["rho"] = rho;
  report.summary["rho_hypothesis"] = limit;
  report.summary["exploratory"] = rho >= limit;
}

// Score and Hessian of ℓ_{n,x}(θ*) on one sample.
struct AtTruth {
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
};

}  // namespace

VerificationReport run_score_clt(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "score-clt";
  if (cfg.depths.size() != 1) throw Error(ErrorCode::invalid_argument, "score-clt takes exactly one depth");
  const std::size_t n = cfg.depths[0];
  const int x_knob = detail::root_state_knob(cfg, "root_state");
  const int d = cfg.spec.dimension();
  const auto names = model::coordinate_names(cfg.spec);
  model::Evaluator ev(cfg.spec, cfg.theta, true);

  Limit lim = fisher_limit(cfg);
  const double norm = std::sqrt(static_cast<double>(tree::tree_size(n)));
  Eigen::MatrixXd z(d, static_cast<Eigen::Index>(cfg.replicates));
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, sim::RootLaw::stationary(), derive_seed(cfg.seed, r));
    z.col(static_cast<Eigen::Index>(r)) = est::score(ev, s, detail::resolve_root(x_knob, s)).total / norm;
  });

  const double k_se = cfg.threshold("mean_se");
  for (Eigen::Index i = 0; i < d; ++i) {
    stats::MeanSe m = stats::mean_se(row_values(z, i));
    report.add_upper("score-mean", "coordinate " + names[static_cast<std::size_t>(i)] + " |mean|/SE", std::abs(m.mean) / m.se, k_se);
  }
  Eigen::MatrixXd cov = sample_covariance(z);
  compare_matrix(report, "score-covariance", "relative error", names, cov, lim.info, cfg.threshold("covariance_rel"), Eigen::MatrixXd::Zero(d, d));
  Eigen::MatrixXd whitened = sym_power(lim.info, -0.5) * z;
  report.add_lower("score-normality", "whitened KS p (Bonferroni)", whitened_ks(whitened), cfg.threshold("ks_p"));

  report.finalize(clock.seconds());
  hypothesis_note(report, cfg, 1.0 / std::sqrt(2.0));
  report.summary["fisher_limit"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<double> row(lim.info.row(i).data(), lim.info.row(i).data() + d);
    report.summary["fisher_limit"].push_back(row);
  }
  return report;
}

VerificationReport run_mle_clt(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "mle-clt";
  if (cfg.depths.size() != 1) throw Error(ErrorCode::invalid_argument, "mle-clt takes exactly one depth");
  const std::size_t n = cfg.depths[0];
  const auto laws = detail::root_laws(cfg);
  const int x_fit = detail::root_state_knob(cfg, "root_state");
  if (x_fit < 0) throw Error(ErrorCode::invalid_argument, "mle-clt fits need a fixed root_state");
  const int x_identity = detail::root_state_knob(cfg, "identity_root_state");
  const int d = cfg.spec.dimension();
  const auto names = model::coordinate_names(cfg.spec);
  const double size = static_cast<double>(tree::tree_size(n));
  const Eigen::VectorXd truth = model::pack(cfg.spec, cfg.theta).values;
  const double z95 = stats::normal_quantile(0.975);

  Limit lim = fisher_limit(cfg);
  if (condition_number(lim.info) > cfg.threshold("max_condition"))
    throw Error(ErrorCode::singular_information, "Fisher information condition number exceeds " + fmt(cfg.threshold("max_condition")));

  est::FitOptions options;
  options.max_iter = cfg.knob<int>("max_iter");
  options.tol = cfg.knob<double>("tol");
  options.extra_random_starts = cfg.knob<int>("random_starts");
  const std::string init = cfg.knob<std::string>("init");
  if (init != "moment" && init != "truth") throw Error(ErrorCode::invalid_argument, "mle-clt init must be \"moment\" or \"truth\"");
  model::Evaluator at_truth(cfg.spec, cfg.theta, true);

  std::vector<Eigen::MatrixXd> standardized;
  nlohmann::json per_law = nlohmann::json::object();
  for (std::size_t li = 0; li < laws.size(); ++li) {
    const std::string law = laws[li].describe();
    const std::size_t reps = cfg.replicates;
    Eigen::MatrixXd z(d, static_cast<Eigen::Index>(reps));
    std::vector<Eigen::MatrixXd> info(reps);
    std::vector<char> covered(reps * static_cast<std::size_t>(d), 0);
    std::vector<char> singular(reps, 0);
    std::vector<AtTruth> truth_terms(reps);
    const std::uint64_t base = derive_seed(cfg.seed, law);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      const std::uint64_t rep = derive_seed(base, r);
      sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, laws[li], derive_seed(rep, "data"));
      est::FitOptions opt = options;
      opt.start_seed = derive_seed(rep, "starts");
      est::Init start = init == "truth" ? est::Init::given(cfg.theta) : est::Init::moment();
      est::FitResult fit = est::fit_mle(s, x_fit, cfg.spec, start, opt);
      auto perm = model::best_alignment(cfg.spec, fit.theta_hat, cfg.theta);
      model::Theta aligned = model::permute(cfg.spec, fit.theta_hat, perm);
      int x_aligned = est::relabeled_state(perm, x_fit);
      model::Evaluator ev(cfg.spec, aligned, true);
      Eigen::MatrixXd j = est::fisher_estimate(ev, s, x_aligned).matrix;
      info[r] = j;
      Eigen::VectorXd err = model::pack(cfg.spec, aligned).values - truth;
      const auto ri = static_cast<Eigen::Index>(r);
      if (condition_number(j) > cfg.threshold("max_condition")) {
        singular[r] = 1;
        z.col(ri).setConstant(std::numeric_limits<double>::quiet_NaN());
        return;
      }
      Eigen::MatrixXd inv = j.inverse();
      for (int i = 0; i < d; ++i) covered[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = std::abs(err[i]) <= z95 * std::sqrt(inv(i, i) / size);
      z.col(ri) = sym_power(j, 0.5) * err * std::sqrt(size);
      if (li == 0) {
        est::Derivatives der = est::likelihood_derivatives(at_truth, s, detail::resolve_root(x_identity, s));
        truth_terms[r] = {der.gradient, der.hessian};
      }
    });

    std::size_t bad = 0;
    for (char c : singular) bad += c ? 1 : 0;
    const std::string suite = "mle-" + law;
    report.add_upper(suite, "singular observed information", static_cast<double>(bad), 0.0);
    for (int i = 0; i < d; ++i) {
      std::size_t hits = 0;
      for (std::size_t r = 0; r < reps; ++r) hits += covered[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] ? 1 : 0;
      report.add_range("coverage-" + law, "Wald 95% coverage " + names[static_cast<std::size_t>(i)], static_cast<double>(hits) / reps,
                       cfg.threshold("coverage_low"), cfg.threshold("coverage_high"));
    }
    // Drop singular replicates from the distributional checks.
    Eigen::MatrixXd zz(d, static_cast<Eigen::Index>(reps - bad));
    for (std::size_t r = 0, c = 0; r < reps; ++r) {
      if (!singular[r]) zz.col(static_cast<Eigen::Index>(c++)) = z.col(static_cast<Eigen::Index>(r));
    }
    standardized.push_back(zz);
    Eigen::MatrixXd cov = sample_covariance(zz);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    compare_matrix(report, suite, "whitened covariance vs identity", names, cov, id, cfg.threshold("whitened_covariance"), Eigen::MatrixXd::Zero(d, d));
    report.add_lower(suite, "standardized error KS p (Bonferroni)", whitened_ks(zz), cfg.threshold("two_sample_p"));

    if (li == 0) {
      // Normalized observed information at the estimate vs the limit.
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d), second = Eigen::MatrixXd::Zero(d, d);
      std::size_t used = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        if (singular[r]) continue;
        mean += info[r];
        second += info[r].cwiseProduct(info[r]);
        ++used;
      }
      const double u = static_cast<double>(used);
      mean /= u;
      Eigen::MatrixXd var = (second / u - mean.cwiseProduct(mean)) * (u / (u - 1.0));
      Eigen::MatrixXd se = (var / u).cwiseSqrt();
      Eigen::MatrixXd slack = cfg.threshold("mc_error_multiplier") * (se.cwiseProduct(se) + lim.se.cwiseProduct(lim.se)).cwiseSqrt();
      compare_matrix(report, "observed-information", "at estimate, relative error", names, mean, lim.info, cfg.threshold("information_rel"), slack);

      // E[∇ℓ∇ℓᵀ] + E[∇²ℓ] = 0 at the truth.
      Eigen::MatrixXd dmean = Eigen::MatrixXd::Zero(d, d), dsecond = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t r = 0; r < reps; ++r) {
        Eigen::MatrixXd diff = (truth_terms[r].score * truth_terms[r].score.transpose() + truth_terms[r].hessian) / size;
        dmean += diff;
        dsecond += diff.cwiseProduct(diff);
      }
      const double rr = static_cast<double>(reps);
      dmean /= rr;
      Eigen::MatrixXd dse = ((dsecond / rr - dmean.cwiseProduct(dmean)) * (rr / (rr - 1.0)) / rr).cwiseSqrt();
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
          report.add_upper("fisher-identity", "|mean|/SE " + entry(names, i, j), std::abs(dmean(i, j)) / dse(i, j), cfg.threshold("identity_se"));
        }
      }
    }
    per_law[law] = {{"replicates", reps}, {"singular", bad}};
  }
  for (std::size_t li = 1; li < standardized.size(); ++li) {
    report.add_lower("mle-root-law", laws[0].describe() + " vs " + laws[li].describe() + " two-sample KS p (Bonferroni)",
                     two_sample_ks(standardized[0], standardized[li]), cfg.threshold("two_sample_p"));
  }
  report.finalize(clock.seconds());
  report.summary["per_root_law"] = per_law;
  hypothesis_note(report, cfg, 0.5);
  return report;
}

VerificationReport run_observed_info(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "observed-info";
  if (cfg.depths.empty()) throw Error(ErrorCode::invalid_argument, "observed-info needs depths");
  const int x_knob = detail::root_state_knob(cfg, "root_state");
  const int d = cfg.spec.dimension();
  const auto names = model::coordinate_names(cfg.spec);
  model::Evaluator at_truth(cfg.spec, cfg.theta, true);
  Limit lim = fisher_limit(cfg);
  const Eigen::VectorXd center = model::pack(cfg.spec, cfg.theta).values;

  nlohmann::json trajectory = nlohmann::json::array();
  for (std::size_t n : cfg.depths) {
    std::vector<Eigen::MatrixXd> truth_info(cfg.replicates), hat_info(cfg.replicates);
    const std::uint64_t base = derive_seed(cfg.seed, n);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, sim::RootLaw::stationary(), derive_seed(base, r));
      int x = detail::resolve_root(x_knob, s);
      truth_info[r] = est::fisher_estimate(at_truth, s, x).matrix;
      est::FitResult fit = est::fit_mle(s, x, cfg.spec, est::Init::given(cfg.theta));
      hat_info[r] = est::fisher_estimate(model::Evaluator(cfg.spec, fit.theta_hat, true), s, x).matrix;
    });
    for (int which = 0; which < 2; ++which) {
      const auto& mats = which == 0 ? truth_info : hat_info;
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d), second = Eigen::MatrixXd::Zero(d, d);
      for (const auto& m : mats) {
        mean += m;
        second += m.cwiseProduct(m);
      }
      const double u = static_cast<double>(mats.size());
      mean /= u;
      Eigen::MatrixXd se = ((second / u - mean.cwiseProduct(mean)) * (u / (u - 1.0)) / u).cwiseSqrt();
      double worst = 0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(mean(i, j) - lim.info(i, j)) / std::sqrt(lim.info(i, i) * lim.info(j, j)));
      trajectory.push_back({{"depth", n}, {"at", which == 0 ? "truth" : "estimate"}, {"max_relative_error", worst}});
      if (n == cfg.depths.back()) {
        Eigen::MatrixXd slack = cfg.threshold("mc_error_multiplier") * (se.cwiseProduct(se) + lim.se.cwiseProduct(lim.se)).cwiseSqrt();
        compare_matrix(report, which == 0 ? "info-at-truth" : "info-at-estimate", "n=" + std::to_string(n) + " relative error", names, mean, lim.info,
                       cfg.threshold("information_rel"), slack);
      }
    }
  }

  // Fisher identity at the deepest level.
  const std::size_t n = cfg.depths.back();
  const double size = static_cast<double>(tree::tree_size(n));
  const auto reps = cfg.knob<std::size_t>("identity_reps");
  std::vector<Eigen::MatrixXd> diffs(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    sim::Sample s = sim::sample(cfg.spec, cfg.theta, n, sim::RootLaw::stationary(), derive_seed(derive_seed(cfg.seed, "identity"), r));
    est::Derivatives der = est::likelihood_derivatives(at_truth, s, detail::resolve_root(x_knob, s));
    diffs[r] = (der.gradient * der.gradient.transpose() + der.hessian) / size;
  });
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d), second = Eigen::MatrixXd::Zero(d, d);
  for (const auto& m : diffs) {
    mean += m;
    second += m.cwiseProduct(m);
  }
  const double rr = static_cast<double>(reps);
  mean /= rr;
  Eigen::MatrixXd se = ((second / rr - mean.cwiseProduct(mean)) * (rr / (rr - 1.0)) / rr).cwiseSqrt();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      report.add_upper("fisher-identity", "|mean|/SE " + entry(names, i, j), std::abs(mean(i, j)) / se(i, j), cfg.threshold("identity_se"));

  // Local uniformity: sup over a δ-ball of the deviation of the normalized observed information.
  auto deltas = cfg.knob<std::vector<double>>("deltas");
  const auto points = cfg.knob<std::size_t>("ball_points");
  const std::size_t ball_samples = std::min<std::size_t>(cfg.replicates, 10);
  std::vector<sim::Sample> samples;
  for (std::size_t r = 0; r < ball_samples; ++r)
    samples.push_back(sim::sample(cfg.spec, cfg.theta, n, sim::RootLaw::stationary(), derive_seed(derive_seed(cfg.seed, "ball"), r)));
  std::vector<Eigen::MatrixXd> base_info;
  for (const auto& s : samples) base_info.push_back(est::fisher_estimate(at_truth, s, detail::resolve_root(x_knob, s)).matrix);
  Stream dir_rng(derive_seed(cfg.seed, "directions"));
  std::vector<Eigen::VectorXd> directions;
  for (std::size_t p = 0; p < points; ++p) {
    Eigen::VectorXd v(d);
    std::normal_distribution<double> normal;
    for (int i = 0; i < d; ++i) v[i] = normal(dir_rng);
    directions.push_back(v.normalized());
  }
  std::vector<double> sups;
  for (double delta : deltas) {
    double sup = 0;
    for (const auto& dir : directions) {
      model::Evaluator ev(cfg.spec, model::unpack(cfg.spec, center + delta * dir), true);
      double dev = 0;
      for (std::size_t r = 0; r < samples.size(); ++r) {
        Eigen::MatrixXd j = est::fisher_estimate(ev, samples[r], detail::resolve_root(x_knob, samples[r])).matrix;
        dev += (j - base_info[r]).cwiseAbs().maxCoeff();
      }
      sup = std::max(sup, dev / static_cast<double>(samples.size()));
    }
    sups.push_back(sup);
  }
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    bool shrinking = deltas[i] < deltas[i - 1] ? sups[i] < sups[i - 1] : sups[i] > sups[i - 1];
    report.add_flag("local-uniformity", "sup deviation delta=" + fmt(deltas[i - 1]) + "->" + fmt(deltas[i]), shrinking, sups[i], sups[i - 1]);
  }
  report.finalize(clock.seconds());
  report.summary["trajectory"] = trajectory;
  report.summary["ball_sup_deviation"] = sups;
  hypothesis_note(report, cfg, 0.5);
  return report;
}

}  // namespace hmt::exp
