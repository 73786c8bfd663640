#include "common.hpp"

#include <cmath>

#include "hmt/stats.hpp"

namespace hmt::exp::detail {

sim::RootLaw parse_root_law(const std::string& text, int states) {
  if (text == "stationary") return sim::RootLaw::stationary();
  if (text.rfind("dirac:", 0) == 0) {
    int x = std::stoi(text.substr(6));
    if (x < 0 || x >= states) throw Error(ErrorCode::invalid_root_law, "dirac state out of range: " + text);
    return sim::RootLaw::dirac(x);
  }
  throw Error(ErrorCode::invalid_root_law, "unsupported root law '" + text + "'");
}

std::vector<sim::RootLaw> root_laws(const ExperimentConfig& cfg) {
  std::vector<sim::RootLaw> out;
  for (const auto& t : cfg.knobs.at("root_laws")) out.push_back(parse_root_law(t.get<std::string>(), cfg.spec.states));
  if (out.empty()) throw Error(ErrorCode::invalid_argument, "root_laws is empty");
  return out;
}

int root_state_knob(const ExperimentConfig& cfg, const std::string& key) {
  const auto& v = cfg.knobs.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "true") return -1;
    throw Error(ErrorCode::invalid_argument, key + " must be an integer state or \"true\"");
  }
  int x = v.get<int>();
  if (x < 0 || x >= cfg.spec.states) throw Error(ErrorCode::invalid_argument, key + " out of range");
  return x;
}

namespace {

Eigen::RowVectorXd dirichlet_row(int size, Stream& rng) {
  Eigen::RowVectorXd row(size);
  for (int i = 0; i < size; ++i) row[i] = -std::log(1.0 - rng.uniform());
  return row / row.sum();
}

}  // namespace

model::Theta random_theta(const model::ModelSpec& spec, Stream& rng) {
  const int s = spec.states;
  model::Theta theta;
  theta.transition.resize(s, s);
  double spread = rng.uniform();
  for (int a = 0; a < s; ++a) {
    Eigen::RowVectorXd row = spread * dirichlet_row(s, rng) + (1.0 - spread) * Eigen::RowVectorXd::Constant(s, 1.0 / s);
    theta.transition.row(a) = spec.epsilon_floor + (1.0 - s * spec.epsilon_floor) * row.array();
  }
  if (spec.family == model::Family::gaussian) {
    theta.mu.resize(s);
    theta.sigma.resize(s);
    for (int a = 0; a < s; ++a) {
      theta.mu[a] = -2.0 + 4.0 * rng.uniform();
      theta.sigma[a] = 0.3 + 1.2 * rng.uniform();
    }
  } else {
    theta.emission_rows.resize(s, spec.outcomes);
    for (int a = 0; a < s; ++a) theta.emission_rows.row(a) = 0.02 + (1.0 - 0.02 * spec.outcomes) * dirichlet_row(spec.outcomes, rng).array();
  }
  return theta;
}

RandomModel random_model(Stream& rng) {
  RandomModel m;
  m.spec.states = 2 + static_cast<int>(rng() % 2);
  if (rng.uniform() < 0.3) {
    m.spec.family = model::Family::categorical;
    m.spec.outcomes = 3;
  }
  m.theta = random_theta(m.spec, rng);
  return m;
}

Eigen::MatrixXd random_kernel(int states, Stream& rng, bool allow_zeros) {
  Eigen::MatrixXd k(states, states);
  double spread = rng.uniform();
  for (int a = 0; a < states; ++a) {
    Eigen::RowVectorXd row = dirichlet_row(states, rng);
    if (allow_zeros) {
      for (int b = 0; b < states; ++b)
        if (rng.uniform() < 0.3) row[b] = 0.0;
      if (row.sum() == 0.0) row[static_cast<int>(rng() % static_cast<std::uint64_t>(states))] = 1.0;
      row /= row.sum();
    } else {
      row = spread * row + (1.0 - spread) * Eigen::RowVectorXd::Constant(states, 1.0 / states);
    }
    k.row(a) = row;
  }
  return k;
}

std::string fmt(double v) { return stats::format_double(v); }

}  // namespace hmt::exp::detail
