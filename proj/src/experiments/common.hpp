#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "hmt/error.hpp"
#include "hmt/experiments.hpp"
#include "hmt/model.hpp"
#include "hmt/rng.hpp"
#include "hmt/simulate.hpp"

namespace hmt::exp::detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// "stationary" or "dirac:<x>".
sim::RootLaw parse_root_law(const std::string& text, int states);
std::vector<sim::RootLaw> root_laws(const ExperimentConfig& cfg);

// Root state knob: an integer, or "true" for the simulated root state (-1).
int root_state_knob(const ExperimentConfig& cfg, const std::string& key);
inline int resolve_root(int knob, const sim::Sample& s) { return knob < 0 ? s.x[0] : knob; }

struct RandomModel {
  model::ModelSpec spec;
  model::Theta theta;
};
model::Theta random_theta(const model::ModelSpec& spec, Stream& rng);
RandomModel random_model(Stream& rng);
// Row-stochastic S×S matrix; a share of them have zero entries.
Eigen::MatrixXd random_kernel(int states, Stream& rng, bool allow_zeros);

std::string fmt(double v);

}  // namespace hmt::exp::detail
