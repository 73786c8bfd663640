#include "hmt/simulate.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "hmt/error.hpp"
#include "hmt/rng.hpp"

namespace hmt::sim {

namespace {

int draw_from(const Eigen::Ref<const Eigen::RowVectorXd>& p, double u) {
  double acc = 0.0;
  for (Eigen::Index s = 0; s + 1 < p.size(); ++s) {
    acc += p[s];
    if (u < acc) return static_cast<int>(s);
  }
  return static_cast<int>(p.size() - 1);
}

double draw_observation(const model::ModelSpec& spec, const model::Theta& theta, int state, Stream& rng) {
  if (spec.family == model::Family::gaussian) {
    std::normal_distribution<double> normal(theta.mu[state], theta.sigma[state]);
    return normal(rng);
  }
  return static_cast<double>(draw_from(theta.emission_rows.row(state), rng.uniform()));
}

// Draws a pair (a, b) with a ~ p, b ~ r, equal with probability 1 - TV(p, r).
std::pair<int, int> maximal_coupling(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& r, Stream& rng) {
  Eigen::RowVectorXd overlap = p.cwiseMin(r);
  double mass = overlap.sum();
  double u = rng.uniform();
  double rest = 1.0 - mass;
  if (u < mass || rest <= 1e-15) {
    int s = draw_from(overlap / mass, rng.uniform());
    return {s, s};
  }
  int a = draw_from((p - overlap) / rest, rng.uniform());
  int b = draw_from((r - overlap) / rest, rng.uniform());
  return {a, b};
}

std::uint64_t vertex_stream(std::uint64_t seed, std::uint64_t index) { return derive_seed(seed, index); }

}  // namespace

Eigen::RowVectorXd RootLaw::distribution(const Eigen::MatrixXd& q) const {
  const Eigen::Index s = q.rows();
  switch (kind) {
    case Kind::stationary:
      return model::stationary_distribution(q);
    case Kind::dirac: {
      if (state < 0 || state >= s) throw Error(ErrorCode::invalid_root_law, "dirac state out of range");
      Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(s);
      p[state] = 1.0;
      return p;
    }
    case Kind::custom:
      if (weights.size() != s || !weights.allFinite() || (weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-10) {
        throw Error(ErrorCode::invalid_root_law, "custom root law is not a probability vector over the states");
      }
      return weights;
  }
  return {};
}

std::string RootLaw::describe() const {
  switch (kind) {
    case Kind::stationary:
      return "stationary";
    case Kind::dirac:
      return "dirac:" + std::to_string(state);
    case Kind::custom: {
      std::ostringstream out;
      out.precision(17);
      out << "custom:[";
      for (Eigen::Index s = 0; s < weights.size(); ++s) out << (s ? "," : "") << weights[s];
      out << "]";
      return out.str();
    }
  }
  return "";
}

double Sample::y_at(const tree::VertexId& v) const {
  if (!contains(v)) throw Error(ErrorCode::mask_outside_sample, "vertex '" + v.path() + "' lies outside the sample");
  return y[v.bfs_index()];
}

Sample sample(const model::ModelSpec& spec, const model::Theta& theta, std::size_t depth, const RootLaw& root_law, std::uint64_t seed) {
  model::validate_theta(spec, theta);
  Eigen::RowVectorXd root = root_law.distribution(theta.transition);
  Sample out;
  out.depth = depth;
  const std::uint64_t n = tree::tree_size(depth);
  out.y.resize(n);
  out.x.resize(n);
  out.provenance = {seed, model::theta_digest(spec, theta), root_law.describe()};
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream rng(vertex_stream(seed, i));
    int state = i == 0 ? draw_from(root, rng.uniform()) : draw_from(theta.transition.row(out.x[tree::index::parent(i)]), rng.uniform());
    out.x[i] = state;
    out.y[i] = draw_observation(spec, theta, state, rng);
  }
  return out;
}

Sample subtree_sample(const Sample& sample, const tree::VertexId& v) {
  if (v.height() > sample.depth) throw Error(ErrorCode::mask_outside_sample, "subtree root outside the sample");
  Sample out;
  out.depth = sample.depth - v.height();
  out.provenance = sample.provenance;
  std::uint64_t first = v.bfs_index();
  for (std::size_t level = 0; level <= out.depth; ++level) {
    for (std::uint64_t j = 0; j < tree::generation_size(level); ++j) {
      out.y.push_back(sample.y[first + j]);
      if (sample.has_states()) out.x.push_back(sample.x[first + j]);
    }
    first = 2 * first + 1;
  }
  return out;
}

Sample ExtendedSample::original() const { return subtree_sample(virtual_tree, spine.root_path(spine.size())); }

ExtendedSample sample_extended(const model::ModelSpec& spec, const model::Theta& theta, std::size_t depth, std::size_t extension,
                               std::uint64_t seed) {
  ExtendedSample out;
  Stream rng(derive_seed(seed, "spine"));
  for (std::size_t j = 0; j < extension; ++j) out.spine.bits.push_back(static_cast<std::uint8_t>(rng() >> 63));
  out.virtual_tree = sample(spec, theta, depth + extension, RootLaw::stationary(), derive_seed(seed, "virtual-tree"));
  return out;
}

CoupledPair sample_coupled(const model::ModelSpec& spec, const model::Theta& theta, const RootLaw& zeta, std::size_t depth, std::uint64_t seed,
                           RootCoupling root_coupling) {
  model::validate_theta(spec, theta);
  const Eigen::MatrixXd& q = theta.transition;
  Eigen::RowVectorXd pi = model::stationary_distribution(q);
  Eigen::RowVectorXd z = zeta.distribution(q);
  const std::uint64_t n = tree::tree_size(depth);

  CoupledPair out;
  std::string digest = model::theta_digest(spec, theta);
  for (Sample* s : {&out.stationary, &out.nonstationary}) {
    s->depth = depth;
    s->y.resize(n);
    s->x.resize(n);
  }
  out.stationary.provenance = {seed, digest, "stationary"};
  out.nonstationary.provenance = {seed, digest, zeta.describe()};
  out.special_per_generation.assign(depth + 1, 0);

  for (std::uint64_t i = 0; i < n; ++i) {
    Stream rng(vertex_stream(seed, i));
    std::pair<int, int> states;
    if (i == 0) {
      if (root_coupling == RootCoupling::maximal) {
        states = maximal_coupling(pi, z, rng);
      } else {
        states = {draw_from(pi, rng.uniform()), draw_from(z, rng.uniform())};
      }
    } else {
      std::uint64_t p = tree::index::parent(i);
      int a = out.stationary.x[p];
      int b = out.nonstationary.x[p];
      if (a == b) {
        int s = draw_from(q.row(a), rng.uniform());
        states = {s, s};
      } else {
        states = maximal_coupling(q.row(a), q.row(b), rng);
      }
    }
    out.stationary.x[i] = states.first;
    out.nonstationary.x[i] = states.second;
    if (states.first == states.second) {
      double y = draw_observation(spec, theta, states.first, rng);
      out.stationary.y[i] = y;
      out.nonstationary.y[i] = y;
    } else {
      out.stationary.y[i] = draw_observation(spec, theta, states.first, rng);
      out.nonstationary.y[i] = draw_observation(spec, theta, states.second, rng);
      out.special_per_generation[tree::index::height(i)] += 1;
    }
  }

  const std::uint64_t inner = depth == 0 ? 0 : tree::tree_size(depth - 1);
  for (std::uint64_t i = 0; i < inner; ++i) {
    if (out.stationary.x[i] == out.nonstationary.x[i]) continue;
    int count = 0;
    for (int bit = 0; bit < 2; ++bit) {
      std::uint64_t c = tree::index::child(i, bit);
      if (out.stationary.x[c] != out.nonstationary.x[c]) ++count;
    }
    out.special_offspring.push_back(count);
  }
  for (std::size_t g = 0; g <= depth; ++g) {
    if (out.special_per_generation[g] == 0) {
      out.coupling_time = g;
      break;
    }
  }
  return out;
}

CouplingTrace trace_coupling(const model::ModelSpec& spec, const model::Theta& theta, const RootLaw& zeta, std::size_t depth, std::uint64_t seed,
                             RootCoupling root_coupling) {
  model::validate_theta(spec, theta);
  const Eigen::MatrixXd& q = theta.transition;
  Eigen::RowVectorXd pi = model::stationary_distribution(q);
  Eigen::RowVectorXd z = zeta.distribution(q);
  if (depth > 62) throw Error(ErrorCode::invalid_argument, "coupling depth above 62");

  struct Special {
    std::uint64_t index;
    int a, b;
  };
  CouplingTrace out;
  out.special_per_generation.assign(depth + 1, 0);
  std::vector<Special> current;
  Stream root_rng(vertex_stream(seed, 0));
  auto root = root_coupling == RootCoupling::maximal ? maximal_coupling(pi, z, root_rng)
                                                     : std::pair<int, int>{draw_from(pi, root_rng.uniform()), draw_from(z, root_rng.uniform())};
  if (root.first != root.second) current.push_back({0, root.first, root.second});
  for (std::size_t g = 0; g <= depth; ++g) {
    out.special_per_generation[g] = current.size();
    if (current.empty()) {
      out.coupling_time = g;
      break;
    }
    if (g == depth) break;
    std::vector<Special> next;
    for (const Special& v : current) {
      int count = 0;
      for (int bit = 0; bit < 2; ++bit) {
        std::uint64_t c = tree::index::child(v.index, bit);
        Stream rng(vertex_stream(seed, c));
        auto states = maximal_coupling(q.row(v.a), q.row(v.b), rng);
        if (states.first != states.second) {
          next.push_back({c, states.first, states.second});
          ++count;
        }
      }
      out.special_offspring.push_back(count);
    }
    current = std::move(next);
  }
  return out;
}

void write_jsonl(std::ostream& out, const model::ModelSpec& spec, const Sample& sample) {
  nlohmann::json meta = {{"seed", sample.provenance.seed},
                         {"theta_digest", sample.provenance.theta_digest},
                         {"root_law", sample.provenance.root_law},
                         {"depth", sample.depth}};
  out << model::dump_json({{"meta", meta}}) << '\n';
  for (std::uint64_t i = 0; i < sample.size(); ++i) {
    nlohmann::json rec;
    rec["path"] = tree::VertexId::from_index(i).path();
    if (spec.family == model::Family::categorical) {
      rec["y"] = static_cast<int>(sample.y[i]);
    } else {
      rec["y"] = sample.y[i];
    }
    if (sample.has_states()) rec["x"] = sample.x[i];
    out << model::dump_json(rec) << '\n';
  }
}

Sample read_jsonl(std::istream& in, const model::ModelSpec& spec) {
  Sample out;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::optional<double>> ys;
  std::vector<std::optional<int>> xs;
  bool any_state = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec = nlohmann::json::parse(line);
      if (rec.contains("meta")) {
        const auto& meta = rec["meta"];
        if (meta.contains("seed")) out.provenance.seed = meta["seed"].get<std::uint64_t>();
        if (meta.contains("theta_digest")) out.provenance.theta_digest = meta["theta_digest"].get<std::string>();
        if (meta.contains("root_law")) out.provenance.root_law = meta["root_law"].get<std::string>();
        continue;
      }
      tree::VertexId v = tree::VertexId::from_bits(rec.at("path").get<std::string>());
      std::uint64_t idx = v.bfs_index();
      if (idx >= ys.size()) {
        ys.resize(idx + 1);
        xs.resize(idx + 1);
      }
      if (ys[idx]) throw Error(ErrorCode::invalid_argument, "duplicate path '" + v.path() + "'");
      double y = rec.at("y").get<double>();
      if (!std::isfinite(y)) throw Error(ErrorCode::non_finite, "non-finite observation");
      if (spec.family == model::Family::categorical && (y != std::floor(y) || y < 0 || y >= spec.outcomes)) {
        throw Error(ErrorCode::invalid_argument, "categorical observation out of range at path '" + v.path() + "'");
      }
      ys[idx] = y;
      if (rec.contains("x")) {
        xs[idx] = rec["x"].get<int>();
        any_state = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (ys.empty()) throw Error(ErrorCode::invalid_argument, "sample has no records");
  std::size_t depth = tree::index::height(ys.size() - 1);
  if (ys.size() != tree::tree_size(depth)) throw Error(ErrorCode::invalid_argument, "records do not form a complete tree T_n");
  out.depth = depth;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!ys[i]) throw Error(ErrorCode::invalid_argument, "missing record for path '" + tree::VertexId::from_index(i).path() + "'");
    out.y.push_back(*ys[i]);
  }
  if (any_state) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!xs[i]) throw Error(ErrorCode::invalid_argument, "hidden states must be given for all records or none");
      if (*xs[i] < 0 || *xs[i] >= spec.states) throw Error(ErrorCode::invalid_argument, "hidden state out of range");
      out.x.push_back(*xs[i]);
    }
  }
  return out;
}

void write_jsonl_file(const std::string& path, const model::ModelSpec& spec, const Sample& sample) {
  std::ostringstream out;
  write_jsonl(out, spec, sample);
  model::write_text_file(path, out.str());
}

Sample read_jsonl_file(const std::string& path, const model::ModelSpec& spec) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  return read_jsonl(in, spec);
}

}  // namespace hmt::sim
