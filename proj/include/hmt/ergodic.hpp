#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hmt/model.hpp"
#include "hmt/simulate.hpp"
#include "hmt/tree.hpp"

namespace hmt::ergodic {

// Function of the observations on Δ(u,k) that may depend on the shape of u.
// The observation vector lists Δ(u,k) in breadth-first order, so it only
// depends on relative positions.
struct ShapeFunction {
  using Evaluate = std::function<double(const tree::Shape&, const std::vector<double>&)>;

  std::string name;
  std::size_t level = 0;
  Evaluate evaluate;

  double operator()(const tree::Shape& shape, const std::vector<double>& y) const { return evaluate(shape, y); }
};

ShapeFunction constant_function(double c, std::size_t level = 0);
// y_u (level 0).
ShapeFunction mean_function();
// y_u · y_{p(u)} (level 1).
ShapeFunction parent_product_function();
// 1{shape index = j} at level k.
ShapeFunction shape_indicator(std::size_t k, std::uint64_t j);
// h_{u,k,x}(θ) as a function of Y_Δ(u,k).
ShapeFunction increment_function(const model::ModelSpec& spec, const model::Theta& theta, std::size_t k, int x);

struct Region {
  enum class Kind { below_level, past };
  Kind kind = Kind::below_level;
  std::uint64_t j = 0;

  // T_n \ T_{k-1}.
  static Region below_level() { return {}; }
  // Δ(v_j) \ T_{k-1}: vertices of height ≥ k with breadth-first index ≤ j.
  static Region past(std::uint64_t j) { return {Kind::past, j}; }
};

double empirical_average(const ShapeFunction& f, const sim::Sample& sample, const Region& region);
// Average over the generation G_n of the sample.
double generation_average(const ShapeFunction& f, const sim::Sample& sample);

// Observations on Δ(u,k) for a vertex u with h(u) ≥ k.
std::vector<double> past_observations(const sim::Sample& sample, std::uint64_t u, std::size_t k);

struct Estimate {
  double value = 0;
  double standard_error = 0;
};

// E[f(Y_Δ(U_k,k))] from fresh stationary T_k samples with U_k uniform on G_k.
Estimate limit_estimate(const ShapeFunction& f, const model::ModelSpec& spec, const model::Theta& theta, std::size_t reps, std::uint64_t seed,
                        int threads = 1);

struct RatePoint {
  std::size_t depth = 0;
  std::size_t reps = 0;
  double mean_sq_error = 0;
  double se = 0;
};

struct RateReport {
  std::string function;
  double limit = 0;
  std::vector<RatePoint> points;
  // Least-squares fit of log(mean_sq_error) against depth; unset when some error is zero.
  std::optional<double> slope;
  std::optional<double> r2;
  double envelope_constant = 0;
  double envelope_rate = 0;
  // All errors vanish (to 1e-24).
  bool exact = false;
  // Geometric envelope C·β^n with β < 1 dominating every point.
  bool envelope_ok = false;
};

// E[(M̄_{G_n}(f) − limit)²] for each depth, over `reps` stationary samples.
RateReport rate_check(const ShapeFunction& f, const model::ModelSpec& spec, const model::Theta& theta, const std::vector<std::size_t>& depths,
                      std::size_t reps, std::uint64_t seed, double limit, int threads = 1);

void write_rate_csv(std::ostream& out, const RateReport& report);

}  // namespace hmt::ergodic
