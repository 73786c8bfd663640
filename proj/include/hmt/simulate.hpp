#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hmt/model.hpp"
#include "hmt/tree.hpp"

namespace hmt::sim {

struct RootLaw {
  enum class Kind { stationary, dirac, custom };

  Kind kind = Kind::stationary;
  int state = 0;
  Eigen::RowVectorXd weights;

  static RootLaw stationary() { return {}; }
  static RootLaw dirac(int x) { return {Kind::dirac, x, {}}; }
  static RootLaw custom(Eigen::RowVectorXd zeta) { return {Kind::custom, 0, std::move(zeta)}; }

  // Probability vector of the law for the given transition matrix.
  Eigen::RowVectorXd distribution(const Eigen::MatrixXd& q) const;
  std::string describe() const;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string theta_digest;
  std::string root_law;
};

// Observations (and optionally hidden states) on T_n, stored in breadth-first order.
struct Sample {
  std::size_t depth = 0;
  std::vector<double> y;
  std::vector<int> x;  // empty when hidden states are unknown
  Provenance provenance;

  std::size_t size() const { return y.size(); }
  bool has_states() const { return !x.empty(); }
  double y_at(const tree::VertexId& v) const;
  bool contains(const tree::VertexId& v) const { return v.height() <= depth; }
};

Sample sample(const model::ModelSpec& spec, const model::Theta& theta, std::size_t depth, const RootLaw& root_law, std::uint64_t seed);

// Subtree T(v, depth - h(v)) of a sample, re-addressed so that v becomes the root.
Sample subtree_sample(const Sample& sample, const tree::VertexId& v);

// Stationary sample on a virtual tree extending `depth` generations below the
// original root and spine.size() generations above it.
struct ExtendedSample {
  Sample virtual_tree;
  tree::Spine spine;

  // The sample restricted to the original tree.
  Sample original() const;
};

ExtendedSample sample_extended(const model::ModelSpec& spec, const model::Theta& theta, std::size_t depth, std::size_t extension,
                               std::uint64_t seed);

enum class RootCoupling { maximal, independent };

struct CoupledPair {
  Sample stationary;
  Sample nonstationary;
  // First generation from which the two hidden processes agree; empty if they
  // still differ at the deepest generation.
  std::optional<std::size_t> coupling_time;
  std::vector<std::size_t> special_per_generation;
  // Number of special children (0, 1 or 2) of every special vertex above the last generation.
  std::vector<int> special_offspring;

  bool truncated() const { return !coupling_time.has_value(); }
};

CoupledPair sample_coupled(const model::ModelSpec& spec, const model::Theta& theta, const RootLaw& zeta, std::size_t depth, std::uint64_t seed,
                           RootCoupling root_coupling = RootCoupling::maximal);

// The hidden-state part of sample_coupled restricted to special vertices (where
// the two chains differ); same streams, so the special sets agree exactly.
struct CouplingTrace {
  std::optional<std::size_t> coupling_time;
  std::vector<std::size_t> special_per_generation;  // zero after the coupling time
  std::vector<int> special_offspring;
};

CouplingTrace trace_coupling(const model::ModelSpec& spec, const model::Theta& theta, const RootLaw& zeta, std::size_t depth, std::uint64_t seed,
                             RootCoupling root_coupling = RootCoupling::maximal);

void write_jsonl(std::ostream& out, const model::ModelSpec& spec, const Sample& sample);
Sample read_jsonl(std::istream& in, const model::ModelSpec& spec);
void write_jsonl_file(const std::string& path, const model::ModelSpec& spec, const Sample& sample);
Sample read_jsonl_file(const std::string& path, const model::ModelSpec& spec);

}  // namespace hmt::sim
