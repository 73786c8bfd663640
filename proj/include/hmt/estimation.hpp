#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmt/inference.hpp"
#include "hmt/model.hpp"
#include "hmt/simulate.hpp"

namespace hmt::est {

// Gradient and Hessian of a masked log-density, from one message pass.
struct Derivatives {
  double log_density = 0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;           // ∇² log p, zero unless requested
  Eigen::MatrixXd expected_curvature;  // conditional mean of Σ ∇² log[q g] plus the anchor term
  Eigen::MatrixXd conditional_variance;  // conditional variance of Σ ∇ log[q g]
};

// Derivatives of log p(observations | X_anchor = anchor_state) for a problem.
// The model must carry derivatives.
Derivatives problem_derivatives(const model::Evaluator& model, const infer::Problem& problem, bool with_hessian);

struct ScoreVector {
  Eigen::VectorXd total;
  // Column j is ḣ_{u,h(u),x} for the vertex with breadth-first index j (if requested).
  Eigen::MatrixXd increments;
};

ScoreVector score(const model::Evaluator& model, const sim::Sample& sample, int x_root, bool with_increments = false);
// ḣ_{u,k,x}: gradient of the increment h_{u,k,x}.
Eigen::VectorXd score_increment(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t u, std::size_t k, int x);

enum class InfoMethod { louis, finite_diff };

struct InfoMatrix {
  Eigen::MatrixXd matrix;
  InfoMethod method = InfoMethod::louis;
  bool normalized = false;  // divided by |T_n|
};

struct InfoOptions {
  // Louis assembly is refused above this depth.
  std::size_t louis_max_depth = 20;
};

// −∇²ℓ_{n,x}(θ).
InfoMatrix observed_information(const model::Evaluator& model, const sim::Sample& sample, int x_root, InfoMethod method,
                                const InfoOptions& options = {});
// Louis pieces for ℓ_{n,x}: ∇²ℓ = expected_curvature + conditional_variance.
Derivatives likelihood_derivatives(const model::Evaluator& model, const sim::Sample& sample, int x_root);
// −|T_n|⁻¹ ∇²ℓ_{n,x}(θ).
InfoMatrix fisher_estimate(const model::Evaluator& model, const sim::Sample& sample, int x_root);

struct FisherLimit {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd standard_error;
  std::size_t k = 0;
  std::size_t reps = 0;
};

// Monte Carlo estimate of E[ḣ ḣᵀ] for ḣ = ḣ_{U_k,k,x} on fresh stationary T_k
// samples, U_k uniform on G_k and x the simulated root state.
FisherLimit fisher_limit_estimate(const model::ModelSpec& spec, const model::Theta& theta, std::size_t k, std::size_t reps, std::uint64_t seed,
                                  int threads = 1);

struct EmStep {
  model::Theta theta;
  double loglik_before = 0;  // ℓ at the input parameter
  bool degenerate_variance = false;
};

// Sufficient statistics of the complete-data model: expected transition
// counts and per-state emission weights (soft or hard assignments).
struct ExpectedCounts {
  Eigen::MatrixXd transitions;
  Eigen::MatrixXd state_weight;  // |T_n| × S posterior marginals
};

ExpectedCounts expected_counts(const model::Evaluator& model, const sim::Sample& sample, int x_root, double* loglik = nullptr);
// Counts from known hidden states.
ExpectedCounts hard_counts(const model::ModelSpec& spec, const sim::Sample& sample);
// Maximizer of the expected complete-data log-likelihood within the ε-floored family.
model::Theta maximize_counts(const model::ModelSpec& spec, const model::Theta& current, const sim::Sample& sample, const ExpectedCounts& counts,
                             bool* degenerate_variance = nullptr);

EmStep em_step(const model::Evaluator& model, const sim::Sample& sample, int x_root);

struct Init {
  enum class Kind { random, moment, given };
  Kind kind = Kind::moment;
  std::uint64_t seed = 0;
  model::Theta theta;

  static Init random(std::uint64_t seed) { return {Kind::random, seed, {}}; }
  static Init moment() { return {}; }
  static Init given(model::Theta theta) { return {Kind::given, 0, std::move(theta)}; }
};

model::Theta initial_theta(const model::ModelSpec& spec, const sim::Sample& sample, const Init& init);

struct FitOptions {
  int max_iter = 500;
  double tol = 1e-8;       // stop when one EM step improves ℓ by less than this
  bool polish = true;      // quasi-Newton refinement in packed coordinates
  int extra_random_starts = 0;
  std::uint64_t start_seed = 0;
  // Optional bound on |packed coordinate|; a polish leaving the box is rejected.
  std::optional<double> packed_box;
};

struct FitResult {
  model::Theta theta_hat;
  Eigen::VectorXd packed;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int x_root = 0;
  double loglik = 0;
  bool degenerate_variance = false;
  bool non_finite = false;
  bool polished = false;
};

FitResult fit_mle(const sim::Sample& sample, int x_root, const model::ModelSpec& spec, const Init& init, const FitOptions& options = {});

nlohmann::json to_json(const model::ModelSpec& spec, const FitResult& fit);

// Inverse permutation: position of state x after relabeling by perm.
int relabeled_state(const std::vector<int>& perm, int x);

}  // namespace hmt::est
