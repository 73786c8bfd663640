#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "hmt/estimation.hpp"
#include "hmt/inference.hpp"
#include "hmt/parallel.hpp"

namespace hmt::exp {

namespace {

using detail::fmt;
using tree::VertexId;

struct CaseModel {
  model::ModelSpec spec;
  model::Theta theta;       // parameter being evaluated
  model::Theta data_theta;  // parameter generating the data
  double rho = 0;
};

CaseModel case_model(const ExperimentConfig& cfg, Stream& rng) {
  CaseModel m;
  if (cfg.knob<bool>("random_models")) {
    auto r = detail::random_model(rng);
    m.spec = r.spec;
    m.theta = r.theta;
  } else {
    m.spec = cfg.spec;
    m.theta = cfg.theta;
  }
  m.data_theta = rng.uniform() < 0.3 ? detail::random_theta(m.spec, rng) : m.theta;
  m.rho = model::mixing_profile(m.theta.transition).rho;
  return m;
}

std::size_t pick(Stream& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

int pick_state(Stream& rng, int s) { return static_cast<int>(rng() % static_cast<std::uint64_t>(s)); }

// Uniform vertex of T(w, k).
VertexId pick_in_subtree(Stream& rng, const VertexId& w, std::size_t k) {
  std::uint64_t i = rng() % tree::tree_size(k);
  VertexId rel = VertexId::from_index(i);
  return VertexId::from_bits(w.path() + rel.path());
}

// Vertex of T(p^k(u), k) other than u. Mostly drawn from T(p^j(u), j) with
// j < k, where the clamped anchor does not separate it from u.
VertexId pick_near(Stream& rng, const VertexId& u, std::size_t k) {
  std::size_t j = k >= 2 && rng.uniform() < 0.8 ? 1 + pick(rng, k - 1) : k;
  VertexId w = tree::ancestor(u, j);
  VertexId v = pick_in_subtree(rng, w, j);
  while (v == u) v = pick_in_subtree(rng, w, j);
  return v;
}

std::string model_tag(const CaseModel& m) {
  return "S=" + std::to_string(m.spec.states) + (m.spec.family == model::Family::gaussian ? ",gauss" : ",cat") + ",rho=" + fmt(m.rho);
}

// Rows of one suite, gathered per case so the output does not depend on the thread count.
template <class F>
void run_cases(VerificationReport& report, std::size_t cases, int threads, F&& one_case) {
  std::vector<VerificationReport> parts(cases);
  parallel_for(cases, threads, [&](std::size_t i) { one_case(i, parts[i]); });
  for (const auto& p : parts) report.append(p);
}

double log_b_plus(const CaseModel& m) {
  double sup = 1.0;
  for (int s = 0; s < m.spec.states; ++s) sup = std::max(sup, model::emission_sup(m.spec, m.theta, s));
  return std::log(sup);
}

double log_b_minus(const CaseModel& m, double y) {
  double sum = 0;
  for (int s = 0; s < m.spec.states; ++s) sum += std::exp(model::log_emission(m.spec, m.theta, s, y));
  return std::log(sum / m.spec.states);
}

void forgetting_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("probability_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "forgetting");
  const auto max_depth = cfg.knob<std::size_t>("max_depth");
  run_cases(report, cfg.knob<std::size_t>("forgetting_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    std::size_t n = pick(rng, max_depth + 1);
    sim::Sample s = sim::sample(m.spec, m.data_theta, n, sim::RootLaw::stationary(), rng());
    VertexId u = VertexId::from_index(rng() % s.size());
    int x = pick_state(rng, m.spec.states);
    int x2 = (x + 1 + pick_state(rng, m.spec.states - 1)) % m.spec.states;
    model::Evaluator ev(m.spec, m.theta);
    double gap = infer::filter_tv_gap(ev, s, u, x, x2, tree::tree_up_to(n));
    out.add_upper("forgetting", "case " + std::to_string(i) + " " + model_tag(m) + " n=" + std::to_string(n) + " u='" + u.path() + "'", gap,
                  std::pow(m.rho, static_cast<double>(u.height())), tol);
  });
}

void cauchy_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("log_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "cauchy");
  const auto max_depth = cfg.knob<std::size_t>("max_depth");
  const auto max_ext = cfg.knob<std::size_t>("max_extension");
  run_cases(report, cfg.knob<std::size_t>("cauchy_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    std::size_t n = pick(rng, max_depth + 1);
    std::size_t e = 1 + pick(rng, max_ext);
    sim::ExtendedSample ext = sim::sample_extended(m.spec, m.data_theta, n, e, rng());
    VertexId u = VertexId::from_index(rng() % tree::tree_size(n));
    std::size_t top = u.height() + e;
    std::size_t k1 = 1 + pick(rng, top), k2 = 1 + pick(rng, top);
    int x1 = pick_state(rng, m.spec.states), x2 = pick_state(rng, m.spec.states);
    model::Evaluator ev(m.spec, m.theta);
    double h1 = infer::increment(ev, ext, u, k1, x1).value;
    double h2 = infer::increment(ev, ext, u, k2, x2).value;
    std::string id = "case " + std::to_string(i) + " " + model_tag(m) + " u='" + u.path() + "' k=" + std::to_string(k1) + "," + std::to_string(k2);
    double bound = std::pow(m.rho, static_cast<double>(std::min(k1, k2)) - 1.0) / (1.0 - m.rho);
    out.add_upper("cauchy", id, std::abs(h1 - h2), bound, tol);
    double y = ext.original().y_at(u);
    double cap = std::max(log_b_plus(m), std::abs(std::log(model::mixing_profile(m.theta.transition).sigma_minus) + log_b_minus(m, y)));
    out.add_upper("cauchy-bounded", id + " first", std::abs(h1), cap, tol);
    out.add_upper("cauchy-bounded", id + " second", std::abs(h2), cap, tol);
  });
}

void backward_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("probability_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "backward");
  const auto max_depth = std::max<std::size_t>(1, cfg.knob<std::size_t>("max_depth"));
  run_cases(report, cfg.knob<std::size_t>("backward_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    std::size_t n = 1 + pick(rng, max_depth);
    sim::Sample s = sim::sample(m.spec, m.data_theta, n, sim::RootLaw::stationary(), rng());
    VertexId u = VertexId::from_index(1 + rng() % (s.size() - 1));
    std::size_t k = 1 + pick(rng, u.height());
    VertexId v = pick_near(rng, u, k);
    int x = pick_state(rng, m.spec.states);
    model::Evaluator ev(m.spec, m.theta);
    double gap = infer::backward_tv_gap(ev, s, u, k, v, x);
    std::size_t d = tree::mrca_and_distance(u, v).distance;
    out.add_upper("backward", "case " + std::to_string(i) + " " + model_tag(m) + " u='" + u.path() + "' k=" + std::to_string(k) + " v='" + v.path() + "'",
                  gap, std::pow(m.rho, static_cast<double>(d) - 1.0), tol);
  });
}

void two_vertex_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("probability_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "two-vertex");
  const auto max_depth = std::max<std::size_t>(1, cfg.knob<std::size_t>("max_depth"));
  run_cases(report, cfg.knob<std::size_t>("two_vertex_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    std::size_t n = 1 + pick(rng, max_depth);
    sim::Sample s = sim::sample(m.spec, m.data_theta, n, sim::RootLaw::stationary(), rng());
    model::Evaluator ev(m.spec, m.theta);
    std::string tag = "case " + std::to_string(i) + " " + model_tag(m);

    VertexId a = VertexId::from_index(rng() % s.size());
    VertexId b = VertexId::from_index(rng() % s.size());
    int x = pick_state(rng, m.spec.states);
    int x2 = (x + 1 + pick_state(rng, m.spec.states - 1)) % m.spec.states;
    double fwd = infer::forward_pair_tv_gap(ev, s, a, b, x, x2, tree::tree_up_to(n));
    out.add_upper("two-vertex-forward", tag + " u='" + a.path() + "' v='" + b.path() + "'", fwd,
                  2.0 * std::pow(m.rho, static_cast<double>(std::min(a.height(), b.height()))), tol);

    VertexId u = VertexId::from_index(1 + rng() % (s.size() - 1));
    std::size_t k = 1 + pick(rng, u.height());
    VertexId v1 = pick_near(rng, u, k), v2 = pick_near(rng, u, k);
    int xb = pick_state(rng, m.spec.states);
    double bwd = infer::backward_pair_tv_gap(ev, s, u, k, v1, v2, xb);
    std::size_t d = std::min(tree::mrca_and_distance(u, v1).distance, tree::mrca_and_distance(u, v2).distance);
    out.add_upper("two-vertex-backward", tag + " u='" + u.path() + "' k=" + std::to_string(k) + " v='" + v1.path() + "' w='" + v2.path() + "'", bwd,
                  2.0 * std::pow(m.rho, static_cast<double>(d) - 1.0), tol);
  });
}

void kernel_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("probability_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "dobrushin");
  run_cases(report, cfg.knob<std::size_t>("kernel_pairs"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    int s = 2 + static_cast<int>(rng() % 4);
    bool zeros = rng.uniform() < 0.3;
    Eigen::MatrixXd k = detail::random_kernel(s, rng, zeros);
    Eigen::MatrixXd r = detail::random_kernel(s, rng, zeros);
    std::string tag = "pair " + std::to_string(i) + " S=" + std::to_string(s);
    out.add_upper("dobrushin", tag, model::dobrushin(k * r), model::dobrushin(k) * model::dobrushin(r), tol);
    out.add_upper("doeblin", tag, model::dobrushin(k), 1.0 - s * k.minCoeff(), tol);
    if (!zeros) {
      Eigen::RowVectorXd pi = model::stationary_distribution(k);
      out.add_upper("stationary", tag, (pi * k - pi).lpNorm<1>(), 1e-12);
    }
  });
}

void telescoping_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("log_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "telescoping");
  run_cases(report, cfg.knob<std::size_t>("telescoping_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    std::size_t n = pick(rng, 7);
    sim::Sample s = sim::sample(m.spec, m.data_theta, n, sim::RootLaw::stationary(), rng());
    int x = pick_state(rng, m.spec.states);
    model::Evaluator ev(m.spec, m.theta, true);
    double sum = 0;
    for (std::uint64_t u = 0; u < s.size(); ++u) sum += infer::increment_value(ev, s, u, tree::index::height(u), x);
    double ll = infer::log_likelihood(ev, s, x);
    std::string tag = "case " + std::to_string(i) + " " + model_tag(m) + " n=" + std::to_string(n) + " x=" + std::to_string(x);
    out.add_upper("telescoping", tag, std::abs(sum - ll), 0.0, tol);
    est::ScoreVector sc = est::score(ev, s, x, true);
    double gap = (sc.increments.rowwise().sum() - sc.total).cwiseAbs().maxCoeff();
    out.add_upper("score-telescoping", tag, gap, 0.0, tol * std::max(1.0, sc.total.cwiseAbs().maxCoeff()));
  });
}

void block_suite(const ExperimentConfig& cfg, VerificationReport& report) {
  const double tol = cfg.threshold("log_tolerance");
  const std::uint64_t seed = derive_seed(cfg.seed, "block");
  run_cases(report, cfg.knob<std::size_t>("block_cases"), cfg.threads, [&](std::size_t i, VerificationReport& out) {
    Stream rng(derive_seed(seed, i));
    CaseModel m = case_model(cfg, rng);
    model::Evaluator ev(m.spec, m.theta);
    std::size_t block = 1 + pick(rng, 2);  // m
    std::size_t period = block + 1;
    std::size_t blocks = 1 + pick(rng, block == 1 ? 4 : 2);  // n, so that n(m+1)-1 <= 7
    std::size_t depth = blocks * period - 1;
    sim::Sample s = sim::sample(m.spec, m.data_theta, depth, sim::RootLaw::stationary(), rng());
    int x = pick_state(rng, m.spec.states);
    double sum = 0;
    for (std::size_t j = 0; j < blocks; ++j) {
      for (const VertexId& u : tree::generation(j * period).vertices) sum += infer::block_increment(ev, s, u, block, j, x);
    }
    std::string tag = "case " + std::to_string(i) + " " + model_tag(m) + " m=" + std::to_string(block) + " n=" + std::to_string(blocks);
    out.add_upper("block-telescoping", tag, std::abs(sum - infer::log_likelihood(ev, s, x)), 0.0, tol);

    // Cauchy and boundedness on the spine-extended tree.
    std::size_t ext_blocks = 1 + pick(rng, 2);
    sim::ExtendedSample ext = sim::sample_extended(m.spec, m.data_theta, depth, ext_blocks * period, rng());
    std::size_t j = pick(rng, blocks);
    auto level = tree::generation(j * period);
    VertexId u = level.vertices[pick(rng, level.size())];
    std::size_t top = j + ext_blocks;
    std::size_t k1 = 1 + pick(rng, top), k2 = 1 + pick(rng, top);
    int x1 = pick_state(rng, m.spec.states), x2 = pick_state(rng, m.spec.states);
    double h1 = infer::block_increment(ev, ext, u, block, k1, x1);
    double h2 = infer::block_increment(ev, ext, u, block, k2, x2);
    double rho = m.rho;
    double bound = std::pow(rho, static_cast<double>(std::min(k1, k2) * period) - 1.0) /
                   std::pow(1.0 - rho, static_cast<double>(tree::tree_size(block)));
    std::string id = tag + " u='" + u.path() + "' k=" + std::to_string(k1) + "," + std::to_string(k2);
    out.add_upper("block-cauchy", id, std::abs(h1 - h2), bound, tol);
    double log_sigma_minus = std::log(model::mixing_profile(m.theta.transition).sigma_minus);
    double lower = 0;
    sim::Sample original = ext.original();
    for (const VertexId& w : tree::subtree(u, block).vertices) lower += log_sigma_minus + log_b_minus(m, original.y_at(w));
    double cap = std::max(static_cast<double>(tree::tree_size(block)) * log_b_plus(m), std::abs(lower));
    out.add_upper("block-bounded", id + " first", std::abs(h1), cap, tol);
    out.add_upper("block-bounded", id + " second", std::abs(h2), cap, tol);
  });
}

}  // namespace

VerificationReport run_bounds(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  VerificationReport report;
  report.kind = "bounds";
  std::string suite = cfg.knob<std::string>("suite");
  auto want = [&](const char* name) { return suite == "all" || suite == name; };
  auto suites = bound_suites();
  if (suite != "all" && std::find(suites.begin(), suites.end(), suite) == suites.end())
    throw Error(ErrorCode::invalid_argument, "unknown bound suite '" + suite + "'");
  if (want("forgetting")) forgetting_suite(cfg, report);
  if (want("cauchy")) cauchy_suite(cfg, report);
  if (want("backward")) backward_suite(cfg, report);
  if (want("two-vertex")) two_vertex_suite(cfg, report);
  if (want("dobrushin")) kernel_suite(cfg, report);
  if (want("telescoping")) telescoping_suite(cfg, report);
  if (want("block")) block_suite(cfg, report);
  report.finalize(clock.seconds());
  report.summary["suite"] = suite;
  return report;
}

}  // namespace hmt::exp
