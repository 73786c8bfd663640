#include <doctest.h>

#include <cmath>

#include "hmt/ergodic.hpp"
#include "hmt/error.hpp"
#include "hmt/inference.hpp"
#include "oracle/cases.hpp"

namespace ergodic = hmt::ergodic;

TEST_CASE("shape indicators average to 2^-k on every generation") {
  auto s = hmt::sim::sample(oracle::reference_spec(), oracle::reference_theta(), 7, hmt::sim::RootLaw::stationary(), 2);
  for (std::size_t k = 0; k <= 3; ++k) {
    for (std::uint64_t j = 0; j < (std::uint64_t{1} << k); ++j) {
      auto f = ergodic::shape_indicator(k, j);
      CHECK(ergodic::generation_average(f, s) == std::ldexp(1.0, -static_cast<int>(k)));
      CHECK(ergodic::empirical_average(f, s, ergodic::Region::below_level()) == std::ldexp(1.0, -static_cast<int>(k)));
    }
  }
}

TEST_CASE("constants average to themselves") {
  auto s = hmt::sim::sample(oracle::reference_spec(), oracle::reference_theta(), 5, hmt::sim::RootLaw::stationary(), 3);
  auto f = ergodic::constant_function(2.5, 2);
  CHECK(ergodic::empirical_average(f, s, ergodic::Region::below_level()) == 2.5);
  CHECK(ergodic::empirical_average(f, s, ergodic::Region::past(3)) == 2.5);
  auto lim = ergodic::limit_estimate(f, oracle::reference_spec(), oracle::reference_theta(), 100, 4);
  CHECK(lim.value == 2.5);
  CHECK(lim.standard_error == 0.0);
  auto rate = ergodic::rate_check(f, oracle::reference_spec(), oracle::reference_theta(), {3, 4, 5}, 10, 5, 2.5);
  CHECK(rate.exact);
}

TEST_CASE("shallow samples are rejected") {
  auto s = hmt::sim::sample(oracle::reference_spec(), oracle::reference_theta(), 1, hmt::sim::RootLaw::stationary(), 3);
  try {
    ergodic::empirical_average(ergodic::shape_indicator(3, 0), s, ergodic::Region::below_level());
    FAIL("expected an error");
  } catch (const hmt::Error& e) {
    CHECK(e.code() == hmt::ErrorCode::region_too_shallow);
  }
}

TEST_CASE("past observations follow breadth-first order") {
  auto s = hmt::sim::sample(oracle::reference_spec(), oracle::reference_theta(), 4, hmt::sim::RootLaw::stationary(), 6);
  for (std::uint64_t u = 3; u < s.size(); ++u) {
    auto y = ergodic::past_observations(s, u, 2);
    auto idx = hmt::tree::index::delta(u, 2);
    REQUIRE(y.size() == idx.size());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == s.y[idx[i]]);
    CHECK(y.back() == s.y[u]);
  }
}

TEST_CASE("simple functions read the right observations") {
  auto s = hmt::sim::sample(oracle::reference_spec(), oracle::reference_theta(), 3, hmt::sim::RootLaw::stationary(), 7);
  const std::uint64_t u = 12;
  auto shape = hmt::tree::shape_of(hmt::tree::VertexId::from_index(u), 1);
  CHECK(ergodic::mean_function()(hmt::tree::shape_of(hmt::tree::VertexId::from_index(u), 0), ergodic::past_observations(s, u, 0)) == s.y[u]);
  CHECK(ergodic::parent_product_function()(shape, ergodic::past_observations(s, u, 1)) == s.y[u] * s.y[(u - 1) / 2]);
}

TEST_CASE("the increment function matches the direct increment") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto s = hmt::sim::sample(spec, theta, 4, hmt::sim::RootLaw::stationary(), 8);
  hmt::model::Evaluator m(spec, theta);
  auto f = ergodic::increment_function(spec, theta, 2, 1);
  for (std::uint64_t u = 3; u < s.size(); ++u) {
    auto U = hmt::tree::VertexId::from_index(u);
    double direct = hmt::infer::increment_value(m, s, u, 2, 1);
    CHECK(f(hmt::tree::shape_of(U, 2), ergodic::past_observations(s, u, 2)) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("averages of independent observations contract at rate one half") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  theta.transition.setConstant(0.5);
  // With uniform transitions E[Y] = 0 exactly.
  auto rate = ergodic::rate_check(ergodic::mean_function(), spec, theta, {4, 5, 6, 7, 8}, 400, 9, 0.0);
  REQUIRE(rate.slope.has_value());
  CHECK(std::abs(*rate.slope + std::log(2.0)) < 0.2);
  CHECK(rate.envelope_ok);
}
