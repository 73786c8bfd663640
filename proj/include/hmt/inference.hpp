#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hmt/model.hpp"
#include "hmt/simulate.hpp"
#include "hmt/tree.hpp"

namespace hmt::infer {

// Rooted node set for one sum-product pass. Nodes are breadth-first indices of
// the sample, sorted, so every parent precedes its children; node 0 is the
// anchor vertex w, whose state is fixed to anchor_state.
struct Problem {
  std::vector<std::uint64_t> vertex;
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<double> y;
  std::vector<char> observed;
  std::vector<int> clamp;  // -1 when free
  int anchor_state = 0;

  int size() const { return static_cast<int>(vertex.size()); }
  // Node holding the given sample index, or -1.
  int node_of(std::uint64_t index) const;
};

// Builds the problem for observations `observed` (sorted breadth-first indices)
// anchored at `anchor`, also including the vertices in `extra` as hidden nodes.
Problem make_problem(const sim::Sample& sample, std::uint64_t anchor, int anchor_state, const std::vector<std::uint64_t>& observed,
                     const std::vector<std::uint64_t>& extra = {});
// Problem for the full tree T_n anchored at the root.
Problem full_tree_problem(const sim::Sample& sample, int root_state);

// Upward and downward log-domain messages for one problem.
class MessagePass {
 public:
  MessagePass(const model::Evaluator& model, const Problem& problem);

  int states() const { return states_; }
  const Problem& problem() const { return *problem_; }
  double log_evidence() const { return log_z_; }

  // log p(observations in T(v) | X_v = s).
  double beta(int node, int s) const { return beta_[idx(node, s)]; }
  // log Σ_t Q(s,t) exp(beta(child, t)): message from a node to its parent in parent state s.
  double up(int node, int s) const { return up_[idx(node, s)]; }
  // log p(X_v = s, observations outside T(v)).
  double alpha(int node, int s) const { return alpha_[idx(node, s)]; }

  Eigen::RowVectorXd marginal(int node) const;
  // P(X_parent = a, X_node = b | observations).
  Eigen::MatrixXd edge_posterior(int node) const;

 private:
  std::size_t idx(int node, int s) const { return static_cast<std::size_t>(node) * static_cast<std::size_t>(states_) + static_cast<std::size_t>(s); }

  const model::Evaluator* model_;
  const Problem* problem_;
  int states_;
  std::vector<double> beta_;
  std::vector<double> up_;
  std::vector<double> alpha_;
  double log_z_ = 0;
};

std::vector<std::uint64_t> indices_of(const tree::VertexSet& set);

// log p(Y_mask | X_anchor = x); zero for an empty mask.
double masked_log_density(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& anchor, int x, const tree::VertexSet& mask);
double masked_log_density(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t anchor, int x, const std::vector<std::uint64_t>& mask);

double log_likelihood(const model::Evaluator& model, const sim::Sample& sample, int x_root);

struct Increment {
  tree::VertexId u;
  std::size_t k = 0;
  int x = 0;
  double value = 0;
  double log_past = 0;         // log p(Y_Δ(u,k) | X_{p^k(u)} = x)
  double log_strict_past = 0;  // log p(Y_Δ*(u,k) | X_{p^k(u)} = x)
};

Increment increment(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, int x);
// For k > h(u): u is an original-tree vertex and the past is read from the virtual tree.
Increment increment(const model::Evaluator& model, const sim::ExtendedSample& sample, const tree::VertexId& u, std::size_t k, int x);
double increment_value(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t u, std::size_t k, int x);

// Address of an original-tree vertex inside the virtual tree of an extended sample.
tree::VertexId to_virtual(const sim::ExtendedSample& sample, const tree::VertexId& v);

Eigen::RowVectorXd posterior_marginal(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& anchor, int x,
                                      const tree::VertexSet& mask);
// Joint law of (X_v, X_w); obtained by clamping X_v and re-running the pass.
Eigen::MatrixXd posterior_pair(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& w,
                               const tree::VertexId& anchor, int x, const tree::VertexSet& mask);
// Joint law of ((X_p(v), X_v), (X_p(w), X_w)) as an S²×S² table; row a*S+b, column c*S+d.
Eigen::MatrixXd posterior_cross_pair(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& w,
                                     const tree::VertexId& anchor, int x, const tree::VertexSet& mask);

double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& r);

// TV between the laws of X_u given the mask under X_∂ = x and X_∂ = x2.
double filter_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, int x, int x2, const tree::VertexSet& mask);
// TV between the laws of X_v given Y_Δ(u,k) and given Y_Δ*(u,k), anchor X_{p^k(u)} = x.
double backward_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, const tree::VertexId& v, int x);
// Two-vertex versions: TV between joint laws of (X_u, X_v).
double forward_pair_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, const tree::VertexId& v, int x, int x2,
                           const tree::VertexSet& mask);
double backward_pair_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, const tree::VertexId& v,
                            const tree::VertexId& w, int x);

// h_{T(u,m),k,x}: log p(Y_{Δ(T(u,m),k)}) − log p(Y_{Δ*(T(u,m),k)}), anchored at p^{k(m+1)}(u).
double block_increment(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t m, std::size_t k, int x);
double block_increment(const model::Evaluator& model, const sim::ExtendedSample& sample, const tree::VertexId& u, std::size_t m, std::size_t k, int x);

}  // namespace hmt::infer
