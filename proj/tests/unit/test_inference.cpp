#include <doctest.h>

#include <cmath>
#include <random>

#include "hmt/error.hpp"
#include "hmt/inference.hpp"
#include "oracle/checks.hpp"

namespace infer = hmt::infer;
namespace tree = hmt::tree;
using tree::VertexId;

namespace {

VertexId V(const char* bits) { return VertexId::from_bits(bits); }

oracle::Case reference_case(std::size_t depth, std::uint64_t seed) {
  oracle::Case c{oracle::reference_spec(), oracle::reference_theta(), {}};
  c.sample = hmt::sim::sample(c.spec, c.theta, depth, hmt::sim::RootLaw::stationary(), seed);
  return c;
}

}  // namespace

TEST_CASE("inference matches hidden-state enumeration") {
  auto err = oracle::compare_inference(30, 31);
  CHECK(err.cases == 30);
  CHECK(err.log_likelihood < 1e-9);
  CHECK(err.marginal < 1e-9);
  CHECK(err.pair < 1e-9);
  CHECK(err.increment < 1e-9);
}

TEST_CASE("masked densities on tiny masks") {
  auto c = reference_case(3, 1);
  hmt::model::Evaluator m(c.spec, c.theta);
  for (int x = 0; x < 2; ++x) {
    tree::VertexSet root_only{{VertexId::root()}, tree::SetRole::other};
    CHECK(infer::masked_log_density(m, c.sample, VertexId::root(), x, root_only) == doctest::Approx(m.log_g(x, c.sample.y[0])));
    CHECK(infer::masked_log_density(m, c.sample, VertexId::root(), x, tree::VertexSet{}) == 0.0);
  }
}

TEST_CASE("likelihood of a one-generation tree by hand") {
  auto c = reference_case(1, 2);
  hmt::model::Evaluator m(c.spec, c.theta);
  for (int x = 0; x < 2; ++x) {
    double expected = m.log_g(x, c.sample.y[0]);
    for (int child = 1; child <= 2; ++child) {
      double s = 0;
      for (int t = 0; t < 2; ++t) s += c.theta.transition(x, t) * std::exp(m.log_g(t, c.sample.y[child]));
      expected += std::log(s);
    }
    CHECK(infer::log_likelihood(m, c.sample, x) == doctest::Approx(expected).epsilon(1e-13));
  }
  auto root = reference_case(0, 3);
  CHECK(infer::log_likelihood(m, root.sample, 1) == doctest::Approx(m.log_g(1, root.sample.y[0])));
}

TEST_CASE("posterior of an unobserved child is the transition row") {
  auto c = reference_case(2, 4);
  hmt::model::Evaluator m(c.spec, c.theta);
  auto p = infer::posterior_marginal(m, c.sample, V("0"), VertexId::root(), 1, tree::VertexSet{});
  CHECK((p - c.theta.transition.row(1)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("well separated emissions reveal the hidden state") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  theta.mu << -6, 6;
  theta.sigma << 0.5, 0.5;
  auto s = hmt::sim::sample(spec, theta, 4, hmt::sim::RootLaw::stationary(), 5);
  hmt::model::Evaluator m(spec, theta);
  auto mask = tree::tree_up_to(4);
  for (std::uint64_t v = 1; v < s.size(); ++v) {
    auto p = infer::posterior_marginal(m, s, VertexId::from_index(v), VertexId::root(), s.x[0], mask);
    CHECK(p[s.x[v]] > 0.9);
  }
}

TEST_CASE("pair tables marginalize and factor across separated subtrees") {
  std::mt19937_64 rng(32);
  for (int c = 0; c < 40; ++c) {
    auto cs = oracle::random_case(rng, 3);
    hmt::model::Evaluator m(cs.spec, cs.theta);
    auto mask = tree::tree_up_to(3);
    auto v = V("01"), w = V("110");
    auto pair = infer::posterior_pair(m, cs.sample, v, w, VertexId::root(), 0, mask);
    auto pv = infer::posterior_marginal(m, cs.sample, v, VertexId::root(), 0, mask);
    auto pw = infer::posterior_marginal(m, cs.sample, w, VertexId::root(), 0, mask);
    CHECK((pair.rowwise().sum().transpose() - pv).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pair.colwise().sum() - pw).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(pair.sum() - 1) < 1e-12);
  }
}

TEST_CASE("conditionally independent vertices have product pair laws") {
  std::mt19937_64 rng(33);
  for (int c = 0; c < 30; ++c) {
    auto cs = oracle::random_case(rng, 2);
    hmt::model::Evaluator m(cs.spec, cs.theta);
    // Anchor at "0": the subtrees of "00" and "01" only meet at the anchor.
    auto mask = tree::subtree(V("0"), 1);
    auto pair = infer::posterior_pair(m, cs.sample, V("00"), V("01"), V("0"), 0, mask);
    auto pa = infer::posterior_marginal(m, cs.sample, V("00"), V("0"), 0, mask);
    auto pb = infer::posterior_marginal(m, cs.sample, V("01"), V("0"), 0, mask);
    CHECK((pair - pa.transpose() * pb).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("forgetting gaps in the trivial cases") {
  std::mt19937_64 rng(34);
  auto cs = oracle::random_case(rng, 4);
  hmt::model::Evaluator m(cs.spec, cs.theta);
  auto mask = tree::tree_up_to(4);
  CHECK(infer::filter_tv_gap(m, cs.sample, V("0101"), 1, 1, mask) == 0.0);

  auto uniform = cs.theta;
  const int S = cs.spec.states;
  uniform.transition.setConstant(1.0 / S);
  hmt::model::Evaluator mu(cs.spec, uniform);
  for (std::uint64_t u = 1; u < 31; ++u) CHECK(infer::filter_tv_gap(mu, cs.sample, VertexId::from_index(u), 0, 1, mask) < 1e-14);

  auto flat = oracle::reference_theta();
  flat.mu.setZero();
  hmt::model::Evaluator mf(oracle::reference_spec(), flat);
  auto s = hmt::sim::sample(oracle::reference_spec(), flat, 4, hmt::sim::RootLaw::stationary(), 3);
  CHECK(infer::backward_tv_gap(mf, s, V("0110"), 3, V("010"), 0) < 1e-14);
}

TEST_CASE("increments at the root and telescoping sums") {
  std::mt19937_64 rng(35);
  for (int c = 0; c < 40; ++c) {
    auto cs = oracle::random_case(rng, 1 + rng() % 5);
    hmt::model::Evaluator m(cs.spec, cs.theta);
    const int x = static_cast<int>(rng() % cs.spec.states);
    CHECK(infer::increment(m, cs.sample, VertexId::root(), 0, x).value == doctest::Approx(m.log_g(x, cs.sample.y[0])));
    double sum = 0;
    for (std::uint64_t u = 0; u < cs.sample.size(); ++u) {
      auto U = VertexId::from_index(u);
      sum += infer::increment(m, cs.sample, U, U.height(), x).value;
    }
    double l = infer::log_likelihood(m, cs.sample, x);
    CHECK(std::abs(sum - l) <= 1e-9 * std::max(1.0, std::abs(l)));
  }
}

TEST_CASE("block increment of the root block") {
  std::mt19937_64 rng(36);
  auto cs = oracle::random_case(rng, 3);
  hmt::model::Evaluator m(cs.spec, cs.theta);
  for (int x = 0; x < cs.spec.states; ++x) {
    double expected = infer::masked_log_density(m, cs.sample, VertexId::root(), x, tree::tree_up_to(1));
    CHECK(infer::block_increment(m, cs.sample, VertexId::root(), 1, 0, x) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("increments beyond the root read the virtual past") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto e = hmt::sim::sample_extended(spec, theta, 3, 3, 41);
  hmt::model::Evaluator m(spec, theta);
  auto u = V("01");
  for (std::size_t k = 0; k <= u.height() + 3; ++k) {
    auto inc = infer::increment(m, e, u, k, 0);
    auto direct = infer::increment(m, e.virtual_tree, infer::to_virtual(e, u), k, 0);
    CHECK(inc.value == direct.value);
    CHECK(std::isfinite(inc.value));
  }
  CHECK_THROWS_AS(infer::increment(m, e, u, u.height() + 4, 0), hmt::Error);
}
