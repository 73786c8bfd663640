#pragma once

// Reference computations by explicit enumeration of hidden states. Only the
// vertices on paths from the anchor to queried vertices are enumerated; every
// other hidden vertex sums out because transition rows sum to one.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hmt/model.hpp"

namespace oracle {

inline std::uint64_t parent_index(std::uint64_t i) { return (i - 1) / 2; }

inline bool descends_from(std::uint64_t v, std::uint64_t a) {
  while (v > a) v = parent_index(v);
  return v == a;
}

inline double emission_density(const hmt::model::ModelSpec& spec, const hmt::model::Theta& theta, int s, double y) {
  if (spec.family == hmt::model::Family::gaussian) {
    double z = (y - theta.mu[s]) / theta.sigma[s];
    return std::exp(-0.5 * z * z) / (theta.sigma[s] * std::sqrt(2.0 * std::numbers::pi));
  }
  return theta.emission_rows(s, static_cast<int>(y));
}

struct Enumeration {
  double log_evidence = 0;
  std::map<std::uint64_t, Eigen::RowVectorXd> marginal;
  std::map<std::pair<std::uint64_t, std::uint64_t>, Eigen::MatrixXd> pair;
};

// Evidence of Y on `mask` with X_anchor = x, and posterior marginals of the
// `query` vertices and pair laws of `pairs`.
inline Enumeration enumerate(const hmt::model::ModelSpec& spec, const hmt::model::Theta& theta, const std::vector<double>& y, std::uint64_t anchor, int x,
                             const std::vector<std::uint64_t>& mask, const std::vector<std::uint64_t>& query = {},
                             const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs = {}) {
  const int S = spec.states;
  std::set<std::uint64_t> relevant{anchor};
  auto add_path = [&](std::uint64_t v) {
    if (!descends_from(v, anchor)) throw std::invalid_argument("vertex outside the anchor subtree");
    for (; v != anchor; v = parent_index(v)) relevant.insert(v);
  };
  for (auto v : mask) add_path(v);
  for (auto v : query) add_path(v);
  for (auto [v, w] : pairs) {
    add_path(v);
    add_path(w);
  }
  std::vector<std::uint64_t> order(relevant.begin(), relevant.end());
  const std::size_t R = order.size();
  std::vector<int> parent_pos(R, -1);
  std::vector<char> observed(R, 0);
  for (std::size_t i = 1; i < R; ++i) {
    parent_pos[i] = static_cast<int>(std::lower_bound(order.begin(), order.end(), parent_index(order[i])) - order.begin());
  }
  for (auto v : mask) observed[static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), v) - order.begin())] = 1;

  std::vector<Eigen::MatrixXd> emit(R);
  for (std::size_t i = 0; i < R; ++i) {
    if (!observed[i]) continue;
    emit[i].resize(1, S);
    for (int s = 0; s < S; ++s) emit[i](0, s) = emission_density(spec, theta, s, y[order[i]]);
  }

  std::vector<std::size_t> query_pos;
  for (auto v : query) query_pos.push_back(static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), v) - order.begin()));
  std::vector<Eigen::MatrixXd> marg(query.size(), Eigen::MatrixXd::Zero(1, S));
  std::vector<std::pair<std::size_t, std::size_t>> pair_pos;
  for (auto [v, w] : pairs) {
    auto pv = static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), v) - order.begin());
    auto pw = static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), w) - order.begin());
    pair_pos.emplace_back(pv, pw);
  }
  std::vector<Eigen::MatrixXd> pair_acc(pairs.size(), Eigen::MatrixXd::Zero(S, S));
  double total = 0;

  std::vector<int> state(R, 0);
  std::vector<double> weight(R, 0);
  state[0] = x;
  weight[0] = observed[0] ? emit[0](0, x) : 1.0;
  // Depth-first over positions 1..R-1 with the running product kept per level.
  std::size_t pos = 1;
  if (R == 1) {
    total = weight[0];
    for (auto& m : marg) m(0, x) += weight[0];
    for (std::size_t p = 0; p < pair_pos.size(); ++p) pair_acc[p](state[pair_pos[p].first], state[pair_pos[p].second]) += weight[0];
  } else {
    state[1] = -1;
    while (pos > 0) {
      if (++state[pos] == S) {
        --pos;
        continue;
      }
      int s = state[pos];
      double w = weight[pos - 1] * theta.transition(state[parent_pos[pos]], s);
      if (observed[pos]) w *= emit[pos](0, s);
      weight[pos] = w;
      if (pos + 1 < R) {
        ++pos;
        state[pos] = -1;
        continue;
      }
      total += w;
      for (std::size_t q = 0; q < query_pos.size(); ++q) marg[q](0, state[query_pos[q]]) += w;
      for (std::size_t p = 0; p < pair_pos.size(); ++p) pair_acc[p](state[pair_pos[p].first], state[pair_pos[p].second]) += w;
    }
  }

  Enumeration out;
  out.log_evidence = std::log(total);
  for (std::size_t q = 0; q < query.size(); ++q) out.marginal[query[q]] = marg[q].row(0) / total;
  for (std::size_t p = 0; p < pairs.size(); ++p) out.pair[pairs[p]] = pair_acc[p] / total;
  return out;
}

inline std::vector<std::uint64_t> all_vertices(std::size_t depth) {
  std::vector<std::uint64_t> v((std::uint64_t{2} << depth) - 1);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

// Δ(u,k) for k <= h(u): T(p^k(u), k) restricted to vertices that precede u in
// breadth-first order within each generation, plus u itself. Computed here
// by direct comparison of generation offsets.
inline std::vector<std::uint64_t> past_of(std::uint64_t u, std::size_t k) {
  auto height = [](std::uint64_t i) {
    std::size_t h = 0;
    while (i > 0) {
      i = parent_index(i);
      ++h;
    }
    return h;
  };
  std::uint64_t a = u;
  for (std::size_t j = 0; j < k; ++j) a = parent_index(a);
  const std::size_t hu = height(u), ha = height(a);
  std::vector<std::uint64_t> out;
  // Offsets within generation g of descendants of a: a's offset times 2^(g-ha).
  for (std::size_t g = ha; g <= hu; ++g) {
    std::uint64_t first = (std::uint64_t{1} << g) - 1;
    std::uint64_t a_offset = a - ((std::uint64_t{1} << ha) - 1);
    std::uint64_t lo = first + (a_offset << (g - ha));
    std::uint64_t hi = lo + (std::uint64_t{1} << (g - ha));
    if (g < hu) {
      for (std::uint64_t v = lo; v < hi; ++v) out.push_back(v);
    } else {
      for (std::uint64_t v = lo; v <= u; ++v) out.push_back(v);
    }
  }
  return out;
}

}  // namespace oracle
