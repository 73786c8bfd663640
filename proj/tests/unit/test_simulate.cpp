#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hmt/error.hpp"
#include "hmt/rng.hpp"
#include "hmt/simulate.hpp"
#include "oracle/cases.hpp"

namespace sim = hmt::sim;

TEST_CASE("a depth-zero sample is the root alone") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto s = sim::sample(spec, theta, 0, sim::RootLaw::dirac(0), 5);
  REQUIRE(s.size() == 1);
  CHECK(s.x[0] == 0);
  CHECK(std::isfinite(s.y[0]));
}

TEST_CASE("samples are deterministic and nest across depths") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto a = sim::sample(spec, theta, 6, sim::RootLaw::stationary(), 99);
  auto b = sim::sample(spec, theta, 6, sim::RootLaw::stationary(), 99);
  CHECK(a.y == b.y);
  CHECK(a.x == b.x);
  auto c = sim::sample(spec, theta, 3, sim::RootLaw::stationary(), 99);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.y[i] == a.y[i]);
    CHECK(c.x[i] == a.x[i]);
  }
  auto d = sim::sample(spec, theta, 6, sim::RootLaw::stationary(), 100);
  CHECK(d.y != a.y);
}

TEST_CASE("stationary root frequency") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  const int reps = 100000;
  int zeros = 0;
  for (int r = 0; r < reps; ++r) zeros += sim::sample(spec, theta, 0, sim::RootLaw::stationary(), hmt::derive_seed(7, r)).x[0] == 0;
  const double p = 9.0 / 17;
  const double se = std::sqrt(p * (1 - p) / reps);
  CHECK(std::abs(zeros / double(reps) - p) < 3 * se);
}

TEST_CASE("transition frequencies match the kernel") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto s = sim::sample(spec, theta, 16, sim::RootLaw::stationary(), 3);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 2);
  for (std::size_t v = 1; v < s.size(); ++v) counts(s.x[(v - 1) / 2], s.x[v]) += 1;
  for (int a = 0; a < 2; ++a) {
    double total = counts.row(a).sum();
    double p = theta.transition(a, 0);
    CHECK(std::abs(counts(a, 0) / total - p) < 4 * std::sqrt(p * (1 - p) / total));
  }
}

TEST_CASE("invalid root laws are rejected") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  CHECK_THROWS_AS(sim::sample(spec, theta, 2, sim::RootLaw::dirac(5), 1), hmt::Error);
  CHECK_THROWS_AS(sim::sample(spec, theta, 2, sim::RootLaw::custom(Eigen::RowVector2d(0.7, 0.7)), 1), hmt::Error);
}

TEST_CASE("jsonl round trip") {
  std::mt19937_64 rng(21);
  for (int c = 0; c < 20; ++c) {
    auto cs = oracle::random_case(rng, 4);
    auto full = sim::sample(cs.spec, cs.theta, 4, sim::RootLaw::stationary(), rng());
    std::stringstream buffer;
    sim::write_jsonl(buffer, cs.spec, full);
    auto back = sim::read_jsonl(buffer, cs.spec);
    CHECK(back.depth == full.depth);
    CHECK(back.y == full.y);
    CHECK(back.x == full.x);
  }
}

TEST_CASE("subtree samples re-root the data") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto s = sim::sample(spec, theta, 5, sim::RootLaw::stationary(), 8);
  auto v = hmt::tree::VertexId::from_bits("10");
  auto sub = sim::subtree_sample(s, v);
  CHECK(sub.depth == 3);
  CHECK(sub.y[0] == s.y_at(v));
  CHECK(sub.y.back() == s.y_at(hmt::tree::VertexId::from_bits("10111")));
}

TEST_CASE("extended samples contain the original tree") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto e = sim::sample_extended(spec, theta, 3, 2, 17);
  CHECK(e.spine.size() == 2);
  CHECK(e.virtual_tree.depth == 5);
  auto o = e.original();
  CHECK(o.depth == 3);
  CHECK(o.size() == 15);
}

TEST_CASE("a stationary start couples at the root") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto pair = sim::sample_coupled(spec, theta, sim::RootLaw::stationary(), 6, seed);
    REQUIRE(pair.coupling_time.has_value());
    CHECK(*pair.coupling_time == 0);
    CHECK(pair.stationary.x == pair.nonstationary.x);
  }
}

TEST_CASE("coupled chains agree from the coupling time on") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto pair = sim::sample_coupled(spec, theta, sim::RootLaw::dirac(1), 8, seed);
    if (!pair.coupling_time) continue;
    for (std::size_t v = (std::size_t{1} << *pair.coupling_time) - 1; v < pair.stationary.size(); ++v) {
      CHECK(pair.stationary.x[v] == pair.nonstationary.x[v]);
    }
  }
}

TEST_CASE("the special-vertex trace reproduces the full coupling") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  theta.transition << 0.6, 0.4, 0.4, 0.6;
  for (auto coupling : {sim::RootCoupling::maximal, sim::RootCoupling::independent}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto full = sim::sample_coupled(spec, theta, sim::RootLaw::dirac(0), 9, seed, coupling);
      auto trace = sim::trace_coupling(spec, theta, sim::RootLaw::dirac(0), 9, seed, coupling);
      CHECK(full.coupling_time == trace.coupling_time);
      CHECK(full.special_offspring == trace.special_offspring);
      for (std::size_t g = 0; g < full.special_per_generation.size(); ++g) {
        CHECK(full.special_per_generation[g] == trace.special_per_generation[g]);
      }
    }
  }
}
