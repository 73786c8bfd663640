#include "hmt/ergodic.hpp"

#include <cmath>
#include <memory>
#include <ostream>

#include "hmt/error.hpp"
#include "hmt/inference.hpp"
#include "hmt/parallel.hpp"
#include "hmt/rng.hpp"
#include "hmt/stats.hpp"

namespace hmt::ergodic {

namespace {

tree::Shape shape_at(std::uint64_t u, std::size_t k) {
  std::uint64_t pos = (u + 1) & ((std::uint64_t{1} << k) - 1);
  return {(std::uint64_t{1} << k) + pos, k};
}

double evaluate_at(const ShapeFunction& f, const sim::Sample& sample, std::uint64_t u) {
  return f(shape_at(u, f.level), past_observations(sample, u, f.level));
}

}  // namespace

ShapeFunction constant_function(double c, std::size_t level) {
  return {"constant", level, [c](const tree::Shape&, const std::vector<double>&) { return c; }};
}

ShapeFunction mean_function() {
  return {"mean", 0, [](const tree::Shape&, const std::vector<double>& y) { return y.back(); }};
}

ShapeFunction parent_product_function() {
  return {"parent_product", 1, [](const tree::Shape&, const std::vector<double>& y) { return y.front() * y.back(); }};
}

ShapeFunction shape_indicator(std::size_t k, std::uint64_t j) {
  if (j >= tree::generation_size(k)) throw Error(ErrorCode::invalid_argument, "shape index out of range");
  return {"shape_" + std::to_string(k) + "_" + std::to_string(j), k,
          [j](const tree::Shape& s, const std::vector<double>&) { return s.index() == j ? 1.0 : 0.0; }};
}

ShapeFunction increment_function(const model::ModelSpec& spec, const model::Theta& theta, std::size_t k, int x) {
  auto model = std::make_shared<model::Evaluator>(spec, theta);
  return {"increment_k" + std::to_string(k) + "_x" + std::to_string(x), k, [model, k, x](const tree::Shape& s, const std::vector<double>& y) {
            sim::Sample local;
            local.depth = k;
            local.y.assign(tree::tree_size(k), 0.0);
            std::uint64_t u = tree::tree_size(k) - tree::generation_size(k) + s.index();
            std::vector<std::uint64_t> past = tree::index::delta(u, k);
            if (past.size() != y.size()) throw Error(ErrorCode::invalid_argument, "observation vector does not match the shape");
            for (std::size_t i = 0; i < past.size(); ++i) local.y[past[i]] = y[i];
            return infer::increment_value(*model, local, u, k, x);
          }};
}

std::vector<double> past_observations(const sim::Sample& sample, std::uint64_t u, std::size_t k) {
  std::vector<double> y;
  for (std::uint64_t i : tree::index::delta(u, k)) y.push_back(sample.y[i]);
  return y;
}

double empirical_average(const ShapeFunction& f, const sim::Sample& sample, const Region& region) {
  std::uint64_t first = tree::tree_size(f.level) - tree::generation_size(f.level);
  std::uint64_t last = sample.size() - 1;
  if (region.kind == Region::Kind::past) {
    if (region.j >= sample.size()) throw Error(ErrorCode::mask_outside_sample, "region index beyond the sample");
    last = region.j;
  }
  if (sample.depth < f.level || last < first) throw Error(ErrorCode::region_too_shallow, "region has no vertex of height >= k");
  double sum = 0;
  for (std::uint64_t u = first; u <= last; ++u) sum += evaluate_at(f, sample, u);
  return sum / static_cast<double>(last - first + 1);
}

double generation_average(const ShapeFunction& f, const sim::Sample& sample) {
  if (sample.depth < f.level) throw Error(ErrorCode::region_too_shallow, "sample depth below the function level");
  std::uint64_t first = tree::tree_size(sample.depth) - tree::generation_size(sample.depth);
  double sum = 0;
  for (std::uint64_t u = first; u < sample.size(); ++u) sum += evaluate_at(f, sample, u);
  return sum / static_cast<double>(sample.size() - first);
}

Estimate limit_estimate(const ShapeFunction& f, const model::ModelSpec& spec, const model::Theta& theta, std::size_t reps, std::uint64_t seed,
                        int threads) {
  if (reps == 0) throw Error(ErrorCode::invalid_argument, "reps must be positive");
  std::size_t k = f.level;
  std::vector<double> values(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    std::uint64_t rep_seed = derive_seed(seed, r);
    sim::Sample s = sim::sample(spec, theta, k, sim::RootLaw::stationary(), rep_seed);
    Stream pick(derive_seed(rep_seed, "position"));
    std::uint64_t offset = pick() % tree::generation_size(k);
    values[r] = evaluate_at(f, s, tree::tree_size(k) - tree::generation_size(k) + offset);
  });
  stats::MeanSe m = stats::mean_se(values);
  return {m.mean, m.se};
}

RateReport rate_check(const ShapeFunction& f, const model::ModelSpec& spec, const model::Theta& theta, const std::vector<std::size_t>& depths,
                      std::size_t reps, std::uint64_t seed, double limit, int threads) {
  if (reps == 0) throw Error(ErrorCode::invalid_argument, "reps must be positive");
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (depths[i] < f.level) throw Error(ErrorCode::region_too_shallow, "depth below the function level");
    if (i && depths[i] <= depths[i - 1]) throw Error(ErrorCode::invalid_argument, "depths must be strictly increasing");
  }
  RateReport report;
  report.function = f.name;
  report.limit = limit;
  for (std::size_t n : depths) {
    std::vector<double> sq(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
      sim::Sample s = sim::sample(spec, theta, n, sim::RootLaw::stationary(), derive_seed(derive_seed(seed, n), r));
      double e = generation_average(f, s) - limit;
      sq[r] = e * e;
    });
    stats::MeanSe m = stats::mean_se(sq);
    report.points.push_back({n, reps, m.mean, m.se});
  }
  bool all_zero = true, any_zero = false;
  for (const RatePoint& p : report.points) {
    if (p.mean_sq_error > 1e-24) all_zero = false;
    if (!(p.mean_sq_error > 0)) any_zero = true;
  }
  report.exact = all_zero;
  if (all_zero) {
    report.envelope_ok = true;
    return report;
  }
  if (any_zero || report.points.size() < 2) return report;
  std::vector<double> x, y;
  for (const RatePoint& p : report.points) {
    x.push_back(static_cast<double>(p.depth));
    y.push_back(std::log(p.mean_sq_error));
  }
  stats::LinearFit fit = stats::linear_fit(x, y);
  report.slope = fit.slope;
  report.r2 = fit.r2;
  report.envelope_rate = std::exp(fit.slope);
  double lift = 0;
  for (std::size_t i = 0; i < x.size(); ++i) lift = std::max(lift, y[i] - (fit.intercept + fit.slope * x[i]));
  report.envelope_constant = std::exp(fit.intercept + lift);
  report.envelope_ok = report.envelope_rate < 1;
  return report;
}

void write_rate_csv(std::ostream& out, const RateReport& report) {
  stats::write_csv_row(out, {"depth", "n_reps", "mean_sq_error", "se"});
  for (const RatePoint& p : report.points)
    stats::write_csv_row(out, {std::to_string(p.depth), std::to_string(p.reps), stats::format_double(p.mean_sq_error), stats::format_double(p.se)});
}

}  // namespace hmt::ergodic
