#include "hmt/estimation.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmt/error.hpp"
#include "hmt/parallel.hpp"
#include "hmt/rng.hpp"

namespace hmt::est {

namespace {

constexpr double kVarianceFloor = 1e-8;
constexpr double kEmissionFloor = 1e-10;

void require_derivatives(const model::Evaluator& model) {
  if (!model.has_derivatives()) throw Error(ErrorCode::invalid_argument, "evaluator was built without derivatives");
}

// argmax of Σ n_b log q_b over {q : Σ q = 1, q_b >= floor}.
Eigen::VectorXd floored_proportions(const Eigen::VectorXd& n, double floor) {
  const auto s = n.size();
  std::vector<bool> fixed(static_cast<std::size_t>(s), false);
  double lambda = 0;
  for (Eigen::Index pass = 0; pass <= s; ++pass) {
    double free_sum = 0;
    Eigen::Index free_count = 0;
    for (Eigen::Index b = 0; b < s; ++b) {
      if (!fixed[static_cast<std::size_t>(b)]) {
        free_sum += n[b];
        ++free_count;
      }
    }
    double free_mass = 1.0 - floor * static_cast<double>(s - free_count);
    if (free_sum <= 0) {
      Eigen::VectorXd q(s);
      for (Eigen::Index b = 0; b < s; ++b) q[b] = fixed[static_cast<std::size_t>(b)] ? floor : free_mass / static_cast<double>(free_count);
      return q;
    }
    lambda = free_sum / free_mass;
    bool changed = false;
    for (Eigen::Index b = 0; b < s; ++b) {
      if (!fixed[static_cast<std::size_t>(b)] && n[b] / lambda < floor) {
        fixed[static_cast<std::size_t>(b)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  Eigen::VectorXd q(s);
  for (Eigen::Index b = 0; b < s; ++b) q[b] = fixed[static_cast<std::size_t>(b)] ? floor : n[b] / lambda;
  return q / q.sum();
}

}  // namespace

Derivatives problem_derivatives(const model::Evaluator& model, const infer::Problem& problem, bool with_hessian) {
  require_derivatives(model);
  const int d = model.dimension();
  const int s = model.states();
  const int m = problem.size();
  const int x = problem.anchor_state;
  infer::MessagePass pass(model, problem);

  Derivatives out;
  out.log_density = pass.log_evidence();
  out.gradient = Eigen::VectorXd::Zero(d);
  if (problem.observed[0]) model.add_grad_log_g(x, problem.y[0], 1.0, out.gradient);

  std::vector<Eigen::MatrixXd> edges(static_cast<std::size_t>(m));
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(s, s);
  for (int v = 1; v < m; ++v) {
    edges[static_cast<std::size_t>(v)] = pass.edge_posterior(v);
    counts += edges[static_cast<std::size_t>(v)];
    if (problem.observed[static_cast<std::size_t>(v)]) {
      Eigen::RowVectorXd gamma = edges[static_cast<std::size_t>(v)].colwise().sum();
      for (int b = 0; b < s; ++b) model.add_grad_log_g(b, problem.y[static_cast<std::size_t>(v)], gamma[b], out.gradient);
    }
  }
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) out.gradient += counts(a, b) * model.grad_log_q(a, b);
  }
  if (!with_hessian) return out;

  out.expected_curvature = Eigen::MatrixXd::Zero(d, d);
  if (problem.observed[0]) model.add_hess_log_g(x, problem.y[0], 1.0, out.expected_curvature);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) out.expected_curvature += counts(a, b) * model.hess_log_q(a, b);
  }
  for (int v = 1; v < m; ++v) {
    if (!problem.observed[static_cast<std::size_t>(v)]) continue;
    Eigen::RowVectorXd gamma = edges[static_cast<std::size_t>(v)].colwise().sum();
    for (int b = 0; b < s; ++b) model.add_hess_log_g(b, problem.y[static_cast<std::size_t>(v)], gamma[b], out.expected_curvature);
  }

  // Conditional variance of F = Σ_v φ_v(X_p(v), X_v). down[v].col(t) is the
  // conditional mean of the part of F inside T(v) given X_v = t; branch[v].col(a)
  // adds the edge into v given X_p(v) = a; outside[v].col(t) is the mean of the
  // rest of F given X_v = t.
  std::vector<Eigen::MatrixXd> emission(static_cast<std::size_t>(m));
  auto phi = [&](int v, int a, int b) -> Eigen::VectorXd {
    Eigen::VectorXd f = model.grad_log_q(a, b);
    if (problem.observed[static_cast<std::size_t>(v)]) f += emission[static_cast<std::size_t>(v)].col(b);
    return f;
  };
  for (int v = 1; v < m; ++v) {
    auto& e = emission[static_cast<std::size_t>(v)];
    e = Eigen::MatrixXd::Zero(d, s);
    if (!problem.observed[static_cast<std::size_t>(v)]) continue;
    for (int b = 0; b < s; ++b) model.add_grad_log_g(b, problem.y[static_cast<std::size_t>(v)], 1.0, e.col(b));
  }

  std::vector<Eigen::MatrixXd> down(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(d, s));
  std::vector<Eigen::MatrixXd> branch(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(d, s));
  for (int v = m - 1; v >= 1; --v) {
    const int p = problem.parent[static_cast<std::size_t>(v)];
    auto& br = branch[static_cast<std::size_t>(v)];
    for (int t = 0; t < s; ++t) {
      for (int u = 0; u < s; ++u) {
        double w = model.q(t, u) * std::exp(pass.beta(v, u) - pass.up(v, t));
        if (w == 0.0) continue;
        br.col(t) += w * (phi(v, t, u) + down[static_cast<std::size_t>(v)].col(u));
      }
    }
    down[static_cast<std::size_t>(p)] += br;
  }

  std::vector<Eigen::MatrixXd> outside(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(d, s));
  for (int v = 1; v < m; ++v) {
    const int p = problem.parent[static_cast<std::size_t>(v)];
    const auto& dp = down[static_cast<std::size_t>(p)];
    const auto& op = outside[static_cast<std::size_t>(p)];
    const auto& br = branch[static_cast<std::size_t>(v)];
    auto& ov = outside[static_cast<std::size_t>(v)];
    for (int t = 0; t < s; ++t) {
      for (int a = 0; a < s; ++a) {
        double w = model.q(a, t) * std::exp(pass.alpha(p, a) + pass.beta(p, a) - pass.up(v, a) - pass.alpha(v, t));
        if (w == 0.0) continue;
        ov.col(t) += w * (phi(v, a, t) + op.col(a) + dp.col(a) - br.col(a));
      }
    }
  }

  const Eigen::VectorXd mean_f = down[0].col(x);
  out.conditional_variance = Eigen::MatrixXd::Zero(d, d);
  for (int v = 1; v < m; ++v) {
    const int p = problem.parent[static_cast<std::size_t>(v)];
    const auto& xi = edges[static_cast<std::size_t>(v)];
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) {
        if (xi(a, b) == 0.0) continue;
        Eigen::VectorXd f = phi(v, a, b);
        Eigen::VectorXd given = f + down[static_cast<std::size_t>(v)].col(b) + outside[static_cast<std::size_t>(p)].col(a) +
                                down[static_cast<std::size_t>(p)].col(a) - branch[static_cast<std::size_t>(v)].col(a) - mean_f;
        out.conditional_variance.noalias() += xi(a, b) * f * given.transpose();
      }
    }
  }
  out.conditional_variance = 0.5 * (out.conditional_variance + out.conditional_variance.transpose()).eval();
  out.hessian = out.expected_curvature + out.conditional_variance;
  return out;
}

Eigen::VectorXd score_increment(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t u, std::size_t k, int x) {
  require_derivatives(model);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model.dimension());
  if (k == 0) {
    model.add_grad_log_g(x, sample.y[u], 1.0, g);
    return g;
  }
  std::uint64_t w = tree::index::ancestor(u, k);
  std::vector<std::uint64_t> past = tree::index::delta(u, k);
  g = problem_derivatives(model, infer::make_problem(sample, w, x, past), false).gradient;
  past.pop_back();
  g -= problem_derivatives(model, infer::make_problem(sample, w, x, past), false).gradient;
  return g;
}

ScoreVector score(const model::Evaluator& model, const sim::Sample& sample, int x_root, bool with_increments) {
  ScoreVector out;
  out.total = problem_derivatives(model, infer::full_tree_problem(sample, x_root), false).gradient;
  if (with_increments) {
    out.increments.resize(model.dimension(), static_cast<Eigen::Index>(sample.size()));
    for (std::uint64_t u = 0; u < sample.size(); ++u) {
      out.increments.col(static_cast<Eigen::Index>(u)) = score_increment(model, sample, u, tree::index::height(u), x_root);
    }
  }
  return out;
}

Derivatives likelihood_derivatives(const model::Evaluator& model, const sim::Sample& sample, int x_root) {
  return problem_derivatives(model, infer::full_tree_problem(sample, x_root), true);
}

InfoMatrix observed_information(const model::Evaluator& model, const sim::Sample& sample, int x_root, InfoMethod method, const InfoOptions& options) {
  require_derivatives(model);
  InfoMatrix out;
  out.method = method;
  if (method == InfoMethod::louis) {
    if (sample.depth > options.louis_max_depth) {
      throw Error(ErrorCode::method_unavailable, "Louis assembly disabled above depth " + std::to_string(options.louis_max_depth));
    }
    out.matrix = -likelihood_derivatives(model, sample, x_root).hessian;
    return out;
  }
  const model::ModelSpec& spec = model.spec();
  const Eigen::VectorXd center = model::pack(spec, model.theta()).values;
  const int d = model.dimension();
  Eigen::MatrixXd h(d, d);
  for (int j = 0; j < d; ++j) {
    double step = 1e-5 * (1.0 + std::abs(center[j]));
    Eigen::VectorXd plus = center;
    Eigen::VectorXd minus = center;
    plus[j] += step;
    minus[j] -= step;
    model::Evaluator mp(spec, model::unpack(spec, plus), true);
    model::Evaluator mm(spec, model::unpack(spec, minus), true);
    h.col(j) = (score(mp, sample, x_root).total - score(mm, sample, x_root).total) / (2.0 * step);
  }
  out.matrix = -0.5 * (h + h.transpose());
  return out;
}

InfoMatrix fisher_estimate(const model::Evaluator& model, const sim::Sample& sample, int x_root) {
  InfoMatrix info = observed_information(model, sample, x_root, InfoMethod::louis);
  info.matrix /= static_cast<double>(sample.size());
  info.normalized = true;
  return info;
}

FisherLimit fisher_limit_estimate(const model::ModelSpec& spec, const model::Theta& theta, std::size_t k, std::size_t reps, std::uint64_t seed, int threads) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "fisher_limit_estimate needs k >= 1");
  if (reps < 2) throw Error(ErrorCode::invalid_argument, "fisher_limit_estimate needs at least 2 replicates");
  model::Evaluator model(spec, theta, true);
  const int d = model.dimension();
  Eigen::MatrixXd h(d, static_cast<Eigen::Index>(reps));
  parallel_for(reps, threads, [&](std::size_t r) {
    std::uint64_t rep_seed = derive_seed(seed, r);
    sim::Sample s = sim::sample(spec, theta, k, sim::RootLaw::stationary(), rep_seed);
    Stream pick(derive_seed(rep_seed, "vertex"));
    std::uint64_t u = tree::tree_size(k - 1) + pick() % tree::generation_size(k);
    h.col(static_cast<Eigen::Index>(r)) = score_increment(model, s, u, k, s.x[0]);
  });
  FisherLimit out;
  out.k = k;
  out.reps = reps;
  const auto n = static_cast<double>(reps);
  out.mean = h * h.transpose() / n;
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < h.cols(); ++r) {
    Eigen::MatrixXd outer = h.col(r) * h.col(r).transpose() - out.mean;
    second += outer.cwiseProduct(outer);
  }
  out.standard_error = (second / (n - 1.0) / n).cwiseSqrt();
  return out;
}

ExpectedCounts expected_counts(const model::Evaluator& model, const sim::Sample& sample, int x_root, double* loglik) {
  infer::Problem problem = infer::full_tree_problem(sample, x_root);
  infer::MessagePass pass(model, problem);
  const int s = model.states();
  ExpectedCounts out;
  out.transitions = Eigen::MatrixXd::Zero(s, s);
  out.state_weight.resize(static_cast<Eigen::Index>(sample.size()), s);
  out.state_weight.row(0) = pass.marginal(0);
  for (int v = 1; v < problem.size(); ++v) {
    Eigen::MatrixXd xi = pass.edge_posterior(v);
    out.transitions += xi;
    out.state_weight.row(v) = xi.colwise().sum();
  }
  if (loglik != nullptr) *loglik = pass.log_evidence();
  return out;
}

ExpectedCounts hard_counts(const model::ModelSpec& spec, const sim::Sample& sample) {
  if (!sample.has_states()) throw Error(ErrorCode::invalid_argument, "sample carries no hidden states");
  const int s = spec.states;
  ExpectedCounts out;
  out.transitions = Eigen::MatrixXd::Zero(s, s);
  out.state_weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sample.size()), s);
  for (std::uint64_t i = 0; i < sample.size(); ++i) {
    out.state_weight(static_cast<Eigen::Index>(i), sample.x[i]) = 1.0;
    if (i > 0) out.transitions(sample.x[tree::index::parent(i)], sample.x[i]) += 1.0;
  }
  return out;
}

model::Theta maximize_counts(const model::ModelSpec& spec, const model::Theta& current, const sim::Sample& sample, const ExpectedCounts& counts,
                             bool* degenerate_variance) {
  const int s = spec.states;
  model::Theta next = current;
  for (int a = 0; a < s; ++a) {
    next.transition.row(a) = floored_proportions(counts.transitions.row(a).transpose(), spec.epsilon_floor).transpose();
  }
  const Eigen::Map<const Eigen::VectorXd> y(sample.y.data(), static_cast<Eigen::Index>(sample.y.size()));
  bool degenerate = false;
  for (int a = 0; a < s; ++a) {
    const auto w = counts.state_weight.col(a);
    double total = w.sum();
    if (spec.family == model::Family::gaussian) {
      if (total <= 1e-300) continue;
      double mu = w.dot(y) / total;
      double var = w.dot((y.array() - mu).square().matrix()) / total;
      if (!(var > kVarianceFloor)) {
        var = kVarianceFloor;
        degenerate = true;
      }
      next.mu[a] = mu;
      next.sigma[a] = std::sqrt(var);
    } else {
      Eigen::VectorXd outcome = Eigen::VectorXd::Zero(spec.outcomes);
      for (Eigen::Index i = 0; i < y.size(); ++i) outcome[static_cast<Eigen::Index>(y[i])] += w[i];
      if (total <= 1e-300) continue;
      next.emission_rows.row(a) = floored_proportions(outcome, kEmissionFloor).transpose();
    }
  }
  if (degenerate_variance != nullptr) *degenerate_variance = degenerate;
  return next;
}

EmStep em_step(const model::Evaluator& model, const sim::Sample& sample, int x_root) {
  EmStep step;
  ExpectedCounts counts = expected_counts(model, sample, x_root, &step.loglik_before);
  step.theta = maximize_counts(model.spec(), model.theta(), sample, counts, &step.degenerate_variance);
  return step;
}

model::Theta initial_theta(const model::ModelSpec& spec, const sim::Sample& sample, const Init& init) {
  const int s = spec.states;
  const double eps = spec.epsilon_floor;
  if (init.kind == Init::Kind::given) {
    model::validate_theta(spec, init.theta);
    return init.theta;
  }
  model::Theta theta;
  theta.transition.resize(s, s);
  std::vector<double> ys = sample.y;
  double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double var = 0;
  for (double y : ys) var += (y - mean) * (y - mean);
  double sd = std::sqrt(std::max(var / static_cast<double>(ys.size()), 1e-6));

  if (init.kind == Init::Kind::moment) {
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) theta.transition(a, b) = (1.0 - s * eps) * ((a == b ? 0.5 : 0.0) + 0.5 / s) + eps;
    }
    if (spec.family == model::Family::gaussian) {
      std::sort(ys.begin(), ys.end());
      theta.mu.resize(s);
      theta.sigma.resize(s);
      const std::size_t n = ys.size();
      for (int a = 0; a < s; ++a) {
        std::size_t lo = n * static_cast<std::size_t>(a) / static_cast<std::size_t>(s);
        std::size_t hi = std::max(lo + 1, n * static_cast<std::size_t>(a + 1) / static_cast<std::size_t>(s));
        double m = 0, v = 0;
        for (std::size_t i = lo; i < hi; ++i) m += ys[i];
        m /= static_cast<double>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) v += (ys[i] - m) * (ys[i] - m);
        theta.mu[a] = m;
        theta.sigma[a] = std::max(std::sqrt(v / static_cast<double>(hi - lo)), 0.25 * sd);
      }
    } else {
      Eigen::VectorXd freq = Eigen::VectorXd::Constant(spec.outcomes, 1.0);
      for (double y : ys) freq[static_cast<Eigen::Index>(y)] += 1.0;
      freq /= freq.sum();
      theta.emission_rows.resize(s, spec.outcomes);
      for (int a = 0; a < s; ++a) {
        Eigen::VectorXd row = freq;
        row[a % spec.outcomes] += 0.5;
        theta.emission_rows.row(a) = (row / row.sum()).transpose();
      }
    }
    return theta;
  }

  Stream rng(derive_seed(init.seed, "init"));
  for (int a = 0; a < s; ++a) {
    Eigen::VectorXd p(s);
    for (int b = 0; b < s; ++b) p[b] = 0.2 + 0.8 * rng.uniform();
    p /= p.sum();
    theta.transition.row(a) = ((1.0 - s * eps) * p.array() + eps).matrix().transpose();
  }
  if (spec.family == model::Family::gaussian) {
    theta.mu.resize(s);
    theta.sigma.resize(s);
    for (int a = 0; a < s; ++a) {
      theta.mu[a] = sample.y[rng() % sample.y.size()];
      theta.sigma[a] = sd * (0.5 + rng.uniform());
    }
  } else {
    theta.emission_rows.resize(s, spec.outcomes);
    for (int a = 0; a < s; ++a) {
      Eigen::VectorXd row(spec.outcomes);
      for (int j = 0; j < spec.outcomes; ++j) row[j] = 0.2 + 0.8 * rng.uniform();
      theta.emission_rows.row(a) = (row / row.sum()).transpose();
    }
  }
  return theta;
}

namespace {

struct PolishContext {
  const model::ModelSpec* spec;
  const sim::Sample* sample;
  int x_root;
};

constexpr double kPenalty = 1e300;

bool evaluate(const PolishContext& ctx, const gsl_vector* z, double* f, gsl_vector* grad) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z->size));
  for (std::size_t i = 0; i < z->size; ++i) v[static_cast<Eigen::Index>(i)] = gsl_vector_get(z, i);
  try {
    model::Evaluator m(*ctx.spec, model::unpack(*ctx.spec, v), grad != nullptr);
    if (grad == nullptr) {
      *f = -infer::log_likelihood(m, *ctx.sample, ctx.x_root);
    } else {
      Derivatives d = problem_derivatives(m, infer::full_tree_problem(*ctx.sample, ctx.x_root), false);
      *f = -d.log_density;
      for (std::size_t i = 0; i < z->size; ++i) gsl_vector_set(grad, i, -d.gradient[static_cast<Eigen::Index>(i)]);
    }
    return std::isfinite(*f);
  } catch (const Error&) {
    *f = kPenalty;
    if (grad != nullptr) gsl_vector_set_zero(grad);
    return false;
  }
}

double polish_f(const gsl_vector* z, void* params) {
  double f = 0;
  evaluate(*static_cast<PolishContext*>(params), z, &f, nullptr);
  return f;
}

void polish_df(const gsl_vector* z, void* params, gsl_vector* g) {
  double f = 0;
  evaluate(*static_cast<PolishContext*>(params), z, &f, g);
}

void polish_fdf(const gsl_vector* z, void* params, double* f, gsl_vector* g) { evaluate(*static_cast<PolishContext*>(params), z, f, g); }

// Returns the polished packed vector, or nothing if no improvement was found.
std::optional<Eigen::VectorXd> polish(const model::ModelSpec& spec, const sim::Sample& sample, int x_root, const Eigen::VectorXd& start) {
  PolishContext ctx{&spec, &sample, x_root};
  const auto d = static_cast<std::size_t>(start.size());
  gsl_multimin_function_fdf fn;
  fn.n = d;
  fn.f = &polish_f;
  fn.df = &polish_df;
  fn.fdf = &polish_fdf;
  fn.params = &ctx;
  gsl_vector* z = gsl_vector_alloc(d);
  for (std::size_t i = 0; i < d; ++i) gsl_vector_set(z, i, start[static_cast<Eigen::Index>(i)]);
  gsl_multimin_fdfminimizer* solver = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, d);
  gsl_multimin_fdfminimizer_set(solver, &fn, z, 0.01, 0.1);
  for (int it = 0; it < 200; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(solver->gradient, 1e-7) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd out(start.size());
  for (std::size_t i = 0; i < d; ++i) out[static_cast<Eigen::Index>(i)] = gsl_vector_get(solver->x, i);
  gsl_multimin_fdfminimizer_free(solver);
  gsl_vector_free(z);
  if (!out.allFinite()) return std::nullopt;
  return out;
}

FitResult fit_single(const sim::Sample& sample, int x_root, const model::ModelSpec& spec, const model::Theta& start, const FitOptions& options) {
  FitResult fit;
  fit.x_root = x_root;
  model::Theta theta = start;
  try {
    for (int it = 0; it < options.max_iter; ++it) {
      EmStep step = em_step(model::Evaluator(spec, theta), sample, x_root);
      if (!fit.loglik_trace.empty() && step.loglik_before - fit.loglik_trace.back() < options.tol) {
        fit.loglik_trace.push_back(step.loglik_before);
        fit.converged = true;
        break;
      }
      fit.loglik_trace.push_back(step.loglik_before);
      fit.degenerate_variance = fit.degenerate_variance || step.degenerate_variance;
      theta = step.theta;
      fit.iterations = it + 1;
    }
    if (!fit.converged) fit.loglik_trace.push_back(infer::log_likelihood(model::Evaluator(spec, theta), sample, x_root));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::non_finite) throw;
    fit.non_finite = true;
  }
  fit.theta_hat = theta;
  fit.loglik = fit.loglik_trace.empty() ? -std::numeric_limits<double>::infinity() : fit.loglik_trace.back();
  fit.packed = model::pack(spec, theta).values;

  if (options.polish && !fit.non_finite) {
    gsl_set_error_handler_off();
    if (auto polished = polish(spec, sample, x_root, fit.packed)) {
      bool inside = !options.packed_box || polished->cwiseAbs().maxCoeff() <= *options.packed_box;
      if (inside) {
        model::Theta candidate = model::unpack(spec, *polished);
        double ll = infer::log_likelihood(model::Evaluator(spec, candidate), sample, x_root);
        if (std::isfinite(ll) && ll >= fit.loglik) {
          fit.theta_hat = candidate;
          fit.packed = *polished;
          fit.loglik = ll;
          fit.loglik_trace.push_back(ll);
          fit.polished = true;
          fit.converged = true;
        }
      }
    }
  }
  return fit;
}

}  // namespace

FitResult fit_mle(const sim::Sample& sample, int x_root, const model::ModelSpec& spec, const Init& init, const FitOptions& options) {
  if (sample.depth < 1) throw Error(ErrorCode::invalid_argument, "fitting needs a sample of depth >= 1");
  if (x_root < 0 || x_root >= spec.states) throw Error(ErrorCode::invalid_argument, "root state out of range");
  std::vector<model::Theta> starts{initial_theta(spec, sample, init)};
  for (int i = 0; i < options.extra_random_starts; ++i) {
    starts.push_back(initial_theta(spec, sample, Init::random(derive_seed(options.start_seed, static_cast<std::uint64_t>(i)))));
  }
  FitResult best;
  bool have = false;
  for (const auto& start : starts) {
    FitResult fit = fit_single(sample, x_root, spec, start, options);
    if (!have || (!fit.non_finite && (best.non_finite || fit.loglik > best.loglik))) {
      best = std::move(fit);
      have = true;
    }
  }
  return best;
}

nlohmann::json to_json(const model::ModelSpec& spec, const FitResult& fit) {
  return {{"theta_hat", model::to_json(spec, fit.theta_hat)},
          {"loglik_trace", fit.loglik_trace},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"x_root", fit.x_root}};
}

int relabeled_state(const std::vector<int>& perm, int x) {
  auto it = std::find(perm.begin(), perm.end(), x);
  if (it == perm.end()) throw Error(ErrorCode::invalid_argument, "state missing from permutation");
  return static_cast<int>(it - perm.begin());
}

}  // namespace hmt::est
