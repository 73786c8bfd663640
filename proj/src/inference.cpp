#include "hmt/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmt/error.hpp"

namespace hmt::infer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool in_subtree(std::uint64_t v, std::uint64_t w) {
  std::size_t hv = tree::index::height(v);
  std::size_t hw = tree::index::height(w);
  return hv >= hw && tree::index::ancestor(v, hv - hw) == w;
}

void check_sample_vertex(const sim::Sample& sample, const tree::VertexId& v) {
  if (!sample.contains(v)) throw Error(ErrorCode::mask_outside_sample, "vertex '" + v.path() + "' lies outside the sample");
}

// Problem with X_v clamped to each state in turn.
Problem clamped(const Problem& base, int node, int state) {
  Problem p = base;
  p.clamp[static_cast<std::size_t>(node)] = state;
  return p;
}

}  // namespace

int Problem::node_of(std::uint64_t index) const {
  auto it = std::lower_bound(vertex.begin(), vertex.end(), index);
  if (it == vertex.end() || *it != index) return -1;
  return static_cast<int>(it - vertex.begin());
}

Problem make_problem(const sim::Sample& sample, std::uint64_t anchor, int anchor_state, const std::vector<std::uint64_t>& observed,
                     const std::vector<std::uint64_t>& extra) {
  const std::uint64_t n = sample.size();
  if (anchor >= n) throw Error(ErrorCode::mask_outside_sample, "anchor lies outside the sample");
  std::vector<std::uint64_t> nodes;
  nodes.reserve(observed.size() + extra.size() + 1);
  nodes.push_back(anchor);
  auto add_with_ancestors = [&](std::uint64_t v) {
    if (v >= n) throw Error(ErrorCode::mask_outside_sample, "vertex '" + tree::VertexId::from_index(v).path() + "' lies outside the sample");
    if (!in_subtree(v, anchor)) {
      throw Error(ErrorCode::mask_outside_sample, "vertex '" + tree::VertexId::from_index(v).path() + "' is not below the anchor");
    }
    for (std::uint64_t u = v; u != anchor; u = tree::index::parent(u)) nodes.push_back(u);
  };
  for (std::uint64_t v : observed) add_with_ancestors(v);
  for (std::uint64_t v : extra) add_with_ancestors(v);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  Problem p;
  p.vertex = std::move(nodes);
  const auto m = p.vertex.size();
  p.parent.assign(m, -1);
  p.children.assign(m, {});
  p.y.resize(m);
  p.observed.assign(m, 0);
  p.clamp.assign(m, -1);
  p.anchor_state = anchor_state;
  p.clamp[0] = anchor_state;
  for (std::size_t i = 0; i < m; ++i) {
    p.y[i] = sample.y[p.vertex[i]];
    if (i > 0) {
      int par = p.node_of(tree::index::parent(p.vertex[i]));
      p.parent[i] = par;
      p.children[static_cast<std::size_t>(par)].push_back(static_cast<int>(i));
    }
  }
  for (std::uint64_t v : observed) p.observed[static_cast<std::size_t>(p.node_of(v))] = 1;
  return p;
}

Problem full_tree_problem(const sim::Sample& sample, int root_state) {
  Problem p;
  const std::uint64_t n = sample.size();
  p.vertex.resize(n);
  p.parent.assign(n, -1);
  p.children.assign(n, {});
  p.y = sample.y;
  p.observed.assign(n, 1);
  p.clamp.assign(n, -1);
  p.anchor_state = root_state;
  p.clamp[0] = root_state;
  for (std::uint64_t i = 0; i < n; ++i) {
    p.vertex[i] = i;
    if (i > 0) {
      p.parent[i] = static_cast<int>(tree::index::parent(i));
      p.children[tree::index::parent(i)].push_back(static_cast<int>(i));
    }
  }
  return p;
}

MessagePass::MessagePass(const model::Evaluator& model, const Problem& problem)
    : model_(&model), problem_(&problem), states_(model.states()) {
  const int m = problem.size();
  const int s = states_;
  if (problem.anchor_state < 0 || problem.anchor_state >= s) throw Error(ErrorCode::invalid_argument, "anchor state out of range");
  const auto total = static_cast<std::size_t>(m) * static_cast<std::size_t>(s);
  beta_.assign(total, 0.0);
  up_.assign(total, 0.0);
  alpha_.assign(total, 0.0);
  std::vector<double> e(static_cast<std::size_t>(s));

  for (int v = m - 1; v >= 0; --v) {
    double* b = &beta_[idx(v, 0)];
    const auto vi = static_cast<std::size_t>(v);
    for (int a = 0; a < s; ++a) {
      double val = problem.observed[vi] ? model.log_g(a, problem.y[vi]) : 0.0;
      for (int c : problem.children[vi]) val += up_[idx(c, a)];
      if (problem.clamp[vi] >= 0 && problem.clamp[vi] != a) val = kNegInf;
      b[a] = val;
    }
    if (v == 0) break;
    double top = *std::max_element(b, b + s);
    for (int t = 0; t < s; ++t) e[static_cast<std::size_t>(t)] = std::exp(b[t] - top);
    for (int a = 0; a < s; ++a) {
      double acc = 0.0;
      for (int t = 0; t < s; ++t) acc += model.q(a, t) * e[static_cast<std::size_t>(t)];
      up_[idx(v, a)] = top + std::log(acc);
    }
  }
  log_z_ = beta_[idx(0, problem.anchor_state)];
  if (!std::isfinite(log_z_)) throw Error(ErrorCode::non_finite, "log-density is not finite");

  for (int v = 1; v < m; ++v) {
    const int p = problem.parent[static_cast<std::size_t>(v)];
    double top = kNegInf;
    for (int a = 0; a < s; ++a) {
      double val = alpha_[idx(p, a)] + beta_[idx(p, a)] - up_[idx(v, a)];
      e[static_cast<std::size_t>(a)] = val;
      top = std::max(top, val);
    }
    for (int a = 0; a < s; ++a) e[static_cast<std::size_t>(a)] = std::exp(e[static_cast<std::size_t>(a)] - top);
    for (int t = 0; t < s; ++t) {
      double acc = 0.0;
      for (int a = 0; a < s; ++a) acc += e[static_cast<std::size_t>(a)] * model.q(a, t);
      alpha_[idx(v, t)] = top + std::log(acc);
    }
  }
}

Eigen::RowVectorXd MessagePass::marginal(int node) const {
  Eigen::RowVectorXd p(states_);
  for (int a = 0; a < states_; ++a) p[a] = std::exp(alpha_[idx(node, a)] + beta_[idx(node, a)] - log_z_);
  return p;
}

Eigen::MatrixXd MessagePass::edge_posterior(int node) const {
  if (node <= 0) throw Error(ErrorCode::invalid_argument, "the anchor has no incoming edge");
  const int p = problem_->parent[static_cast<std::size_t>(node)];
  Eigen::MatrixXd table(states_, states_);
  for (int a = 0; a < states_; ++a) {
    double left = alpha_[idx(p, a)] + beta_[idx(p, a)] - up_[idx(node, a)] - log_z_;
    for (int b = 0; b < states_; ++b) table(a, b) = model_->q(a, b) * std::exp(left + beta_[idx(node, b)]);
  }
  return table;
}

std::vector<std::uint64_t> indices_of(const tree::VertexSet& set) {
  std::vector<std::uint64_t> out;
  out.reserve(set.size());
  for (const auto& v : set.vertices) out.push_back(v.bfs_index());
  std::sort(out.begin(), out.end());
  return out;
}

double masked_log_density(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t anchor, int x, const std::vector<std::uint64_t>& mask) {
  if (mask.empty()) return 0.0;
  Problem p = make_problem(sample, anchor, x, mask);
  return MessagePass(model, p).log_evidence();
}

double masked_log_density(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& anchor, int x, const tree::VertexSet& mask) {
  check_sample_vertex(sample, anchor);
  return masked_log_density(model, sample, anchor.bfs_index(), x, indices_of(mask));
}

double log_likelihood(const model::Evaluator& model, const sim::Sample& sample, int x_root) {
  Problem p = full_tree_problem(sample, x_root);
  return MessagePass(model, p).log_evidence();
}

double increment_value(const model::Evaluator& model, const sim::Sample& sample, std::uint64_t u, std::size_t k, int x) {
  if (k == 0) return model.log_g(x, sample.y[u]);
  std::uint64_t w = tree::index::ancestor(u, k);
  std::vector<std::uint64_t> past = tree::index::delta(u, k);
  double full = masked_log_density(model, sample, w, x, past);
  past.pop_back();
  return full - masked_log_density(model, sample, w, x, past);
}

Increment increment(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, int x) {
  check_sample_vertex(sample, u);
  if (k > u.height()) throw Error(ErrorCode::spine_required, "k exceeds h(u); use an extended sample");
  Increment inc{u, k, x, 0, 0, 0};
  if (k == 0) {
    inc.value = inc.log_past = model.log_g(x, sample.y_at(u));
    return inc;
  }
  std::uint64_t ui = u.bfs_index();
  std::uint64_t w = tree::index::ancestor(ui, k);
  std::vector<std::uint64_t> past = tree::index::delta(ui, k);
  inc.log_past = masked_log_density(model, sample, w, x, past);
  past.pop_back();
  inc.log_strict_past = masked_log_density(model, sample, w, x, past);
  inc.value = inc.log_past - inc.log_strict_past;
  return inc;
}

tree::VertexId to_virtual(const sim::ExtendedSample& sample, const tree::VertexId& v) {
  return tree::VertexId::from_bits(sample.spine.root_path(sample.spine.size()).path() + v.path());
}

Increment increment(const model::Evaluator& model, const sim::ExtendedSample& sample, const tree::VertexId& u, std::size_t k, int x) {
  if (k > u.height() + sample.spine.size()) throw Error(ErrorCode::spine_required, "spine shorter than k - h(u)");
  Increment inc = increment(model, sample.virtual_tree, to_virtual(sample, u), k, x);
  inc.u = u;
  return inc;
}

Eigen::RowVectorXd posterior_marginal(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& anchor, int x,
                                      const tree::VertexSet& mask) {
  check_sample_vertex(sample, v);
  check_sample_vertex(sample, anchor);
  Problem p = make_problem(sample, anchor.bfs_index(), x, indices_of(mask), {v.bfs_index()});
  MessagePass pass(model, p);
  return pass.marginal(p.node_of(v.bfs_index()));
}

Eigen::MatrixXd posterior_pair(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& w,
                               const tree::VertexId& anchor, int x, const tree::VertexSet& mask) {
  check_sample_vertex(sample, v);
  check_sample_vertex(sample, w);
  check_sample_vertex(sample, anchor);
  Problem base = make_problem(sample, anchor.bfs_index(), x, indices_of(mask), {v.bfs_index(), w.bfs_index()});
  const int nv = base.node_of(v.bfs_index());
  const int nw = base.node_of(w.bfs_index());
  const int s = model.states();
  MessagePass pass(model, base);
  Eigen::RowVectorXd pv = pass.marginal(nv);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(s, s);
  for (int a = 0; a < s; ++a) {
    if (pv[a] == 0.0) continue;
    Problem p = clamped(base, nv, a);
    MessagePass cond(model, p);
    table.row(a) = pv[a] * cond.marginal(nw);
  }
  return table;
}

Eigen::MatrixXd posterior_cross_pair(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& v, const tree::VertexId& w,
                                     const tree::VertexId& anchor, int x, const tree::VertexSet& mask) {
  check_sample_vertex(sample, v);
  check_sample_vertex(sample, w);
  check_sample_vertex(sample, anchor);
  if (v == anchor || w == anchor) throw Error(ErrorCode::invalid_argument, "cross pairs need vertices strictly below the anchor");
  Problem base = make_problem(sample, anchor.bfs_index(), x, indices_of(mask), {v.bfs_index(), w.bfs_index()});
  const int nv = base.node_of(v.bfs_index());
  const int nw = base.node_of(w.bfs_index());
  const int s = model.states();
  Eigen::MatrixXd edge_v = MessagePass(model, base).edge_posterior(nv);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(s * s, s * s);
  const int npv = base.parent[static_cast<std::size_t>(nv)];
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      if (edge_v(a, b) == 0.0) continue;
      Problem p = clamped(clamped(base, npv, a), nv, b);
      Eigen::MatrixXd edge_w = MessagePass(model, p).edge_posterior(nw);
      for (int c = 0; c < s; ++c) {
        for (int d = 0; d < s; ++d) table(a * s + b, c * s + d) = edge_v(a, b) * edge_w(c, d);
      }
    }
  }
  return table;
}

double total_variation(const Eigen::MatrixXd& p, const Eigen::MatrixXd& r) { return 0.5 * (p - r).cwiseAbs().sum(); }

double filter_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, int x, int x2, const tree::VertexSet& mask) {
  auto root = tree::VertexId::root();
  return total_variation(posterior_marginal(model, sample, u, root, x, mask), posterior_marginal(model, sample, u, root, x2, mask));
}

double backward_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, const tree::VertexId& v, int x) {
  if (k > u.height()) throw Error(ErrorCode::spine_required, "k exceeds h(u); use an extended sample");
  tree::VertexId w = tree::ancestor(u, k);
  return total_variation(posterior_marginal(model, sample, v, w, x, tree::delta(u, k)), posterior_marginal(model, sample, v, w, x, tree::delta_star(u, k)));
}

double forward_pair_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, const tree::VertexId& v, int x, int x2,
                           const tree::VertexSet& mask) {
  auto root = tree::VertexId::root();
  return total_variation(posterior_pair(model, sample, u, v, root, x, mask), posterior_pair(model, sample, u, v, root, x2, mask));
}

double backward_pair_tv_gap(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t k, const tree::VertexId& v,
                            const tree::VertexId& w, int x) {
  if (k > u.height()) throw Error(ErrorCode::spine_required, "k exceeds h(u); use an extended sample");
  tree::VertexId anchor = tree::ancestor(u, k);
  return total_variation(posterior_pair(model, sample, v, w, anchor, x, tree::delta(u, k)),
                         posterior_pair(model, sample, v, w, anchor, x, tree::delta_star(u, k)));
}

double block_increment(const model::Evaluator& model, const sim::Sample& sample, const tree::VertexId& u, std::size_t m, std::size_t k, int x) {
  const std::size_t span = k * (m + 1);
  if (span > u.height()) {
    if (u.height() % (m + 1) != 0) throw Error(ErrorCode::block_misaligned, "height of u is not a multiple of m+1");
    throw Error(ErrorCode::spine_required, "k(m+1) exceeds h(u); use an extended sample");
  }
  tree::VertexId anchor = tree::ancestor(u, span);
  tree::VertexSet past = tree::block_past(u, m, k);
  tree::VertexSet full = tree::block_delta(u, m, k);
  for (const auto& v : full.vertices) check_sample_vertex(sample, v);
  return masked_log_density(model, sample, anchor, x, full) - masked_log_density(model, sample, anchor, x, past);
}

double block_increment(const model::Evaluator& model, const sim::ExtendedSample& sample, const tree::VertexId& u, std::size_t m, std::size_t k, int x) {
  if (u.height() % (m + 1) != 0) throw Error(ErrorCode::block_misaligned, "height of u is not a multiple of m+1");
  std::size_t extra = sample.spine.size();
  if (extra % (m + 1) != 0) throw Error(ErrorCode::block_misaligned, "spine length must be a multiple of m+1");
  if (k * (m + 1) > u.height() + extra) throw Error(ErrorCode::spine_required, "spine shorter than k(m+1) - h(u)");
  return block_increment(model, sample.virtual_tree, to_virtual(sample, u), m, k, x);
}

}  // namespace hmt::infer
