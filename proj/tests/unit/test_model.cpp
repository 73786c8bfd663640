#include <doctest.h>

#include <random>

#include "hmt/error.hpp"
#include "hmt/model.hpp"
#include "oracle/cases.hpp"
#include "oracle/checks.hpp"

namespace model = hmt::model;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

bool passed(const std::vector<model::AssumptionCheck>& checks, const std::string& label) {
  for (const auto& c : checks)
    if (c.label == label) return c.passed;
  FAIL("missing assumption " << label);
  return false;
}

}  // namespace

TEST_CASE("stationary distributions") {
  auto half = model::stationary_distribution(mat2(0.5, 0.5, 0.5, 0.5));
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
  auto pi = model::stationary_distribution(mat2(0.6, 0.4, 0.45, 0.55));
  CHECK(std::abs(pi[0] - 9.0 / 17) < 1e-14);
  CHECK(std::abs(pi[1] - 8.0 / 17) < 1e-14);
  const double eps = 1e-3;
  auto sticky = model::stationary_distribution(mat2(1 - eps, eps, eps, 1 - eps));
  CHECK(std::abs(sticky[0] - 0.5) < 1e-13);
}

TEST_CASE("stationary vectors are fixed points for random kernels") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 500; ++c) {
    int s = 2 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd q(s, s);
    for (int a = 0; a < s; ++a) q.row(a) = 1e-3 + (1 - s * 1e-3) * oracle::random_simplex(s, rng).array();
    auto pi = model::stationary_distribution(q);
    CHECK((pi * q - pi).lpNorm<1>() < 1e-12);
    CHECK(std::abs(pi.sum() - 1) < 1e-12);
  }
}

TEST_CASE("mixing profile") {
  auto p = model::mixing_profile(mat2(0.6, 0.4, 0.45, 0.55));
  CHECK(p.sigma_minus == doctest::Approx(0.8));
  CHECK(p.sigma_plus == doctest::Approx(1.2));
  CHECK(p.rho == doctest::Approx(1.0 / 3));
  CHECK(model::mixing_profile(mat2(0.7, 0.3, 0.4, 0.6)).rho == doctest::Approx(4.0 / 7));
  CHECK(model::mixing_profile(mat2(0.5, 0.5, 0.5, 0.5)).rho == doctest::Approx(0.0));
}

TEST_CASE("dobrushin coefficient") {
  CHECK(model::dobrushin(mat2(0.6, 0.4, 0.45, 0.55)) == doctest::Approx(0.15));
  CHECK(model::dobrushin(mat2(0.3, 0.7, 0.3, 0.7)) == doctest::Approx(0.0));
  CHECK(model::dobrushin(mat2(1, 0, 0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("pack and unpack are inverse") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto packed = model::pack(spec, theta);
  CHECK(packed.values.size() == 6);
  CHECK(packed.names.size() == 6);
  auto back = model::unpack(spec, packed.values);
  CHECK((back.transition - theta.transition).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.mu - theta.mu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.sigma - theta.sigma).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(12);
  for (int c = 0; c < 200; ++c) {
    auto s = oracle::random_spec(rng);
    auto t = oracle::random_theta(s, rng);
    auto round = model::unpack(s, model::pack(s, t).values);
    CHECK((model::natural_coordinates(s, round) - model::natural_coordinates(s, t)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unpack of the zero vector is the uniform interior point") {
  auto spec = oracle::reference_spec();
  auto theta = model::unpack(spec, Eigen::VectorXd::Zero(6));
  const double expected = (1 - 2 * 1e-3) / 2 + 1e-3;
  CHECK(theta.transition(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(theta.transition(1, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(theta.sigma[0] == doctest::Approx(1.0));
}

TEST_CASE("rows at the floor pack to finite clamped coordinates") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  theta.transition.row(0) << 1e-3, 1 - 1e-3;
  auto packed = model::pack(spec, theta);
  CHECK(packed.values.allFinite());
  auto back = model::unpack(spec, packed.values);
  CHECK(std::abs(back.transition(0, 0) - 1e-3) < 1e-9);
}

TEST_CASE("theta validation") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  theta.transition(0, 0) = 0.7;
  CHECK_THROWS_AS(model::validate_theta(spec, theta), hmt::Error);
  theta = oracle::reference_theta();
  theta.transition.row(0) << 1e-4, 1 - 1e-4;
  CHECK_THROWS_AS(model::validate_theta(spec, theta), hmt::Error);
  theta = oracle::reference_theta();
  theta.sigma[1] = 0;
  CHECK_THROWS_AS(model::validate_theta(spec, theta), hmt::Error);
}

TEST_CASE("assumption checks") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto checks = model::validate_assumptions(spec, theta, {0.1, -3.0, 25.0});
  for (const auto& c : checks) CHECK_MESSAGE(c.passed, c.label);

  model::ModelSpec cat;
  cat.family = model::Family::categorical;
  cat.outcomes = 2;
  model::Theta ct;
  ct.transition = oracle::reference_theta().transition;
  ct.emission_rows = mat2(1.0, 0.0, 0.5, 0.5);
  CHECK_FALSE(passed(model::validate_assumptions(cat, ct, {0.0, 1.0}), "A2(iii)"));

  theta.transition.row(0) << 1e-4, 1 - 1e-4;
  CHECK_FALSE(passed(model::validate_assumptions(spec, theta, {0.0}), "A2(i)"));
}

TEST_CASE("relabeling and alignment") {
  auto spec = oracle::reference_spec();
  auto theta = oracle::reference_theta();
  auto swapped = model::permute(spec, theta, {1, 0});
  CHECK(swapped.transition(0, 0) == doctest::Approx(0.55));
  CHECK(swapped.mu[0] == doctest::Approx(1.0));
  CHECK(model::best_alignment(spec, swapped, theta) == std::vector<int>{1, 0});
  auto back = model::permute(spec, swapped, model::best_alignment(spec, swapped, theta));
  CHECK((model::natural_coordinates(spec, back) - model::natural_coordinates(spec, theta)).norm() < 1e-15);
}

TEST_CASE("json round trip") {
  std::mt19937_64 rng(13);
  for (int c = 0; c < 50; ++c) {
    auto spec = oracle::random_spec(rng);
    auto theta = oracle::random_theta(spec, rng);
    auto spec2 = model::model_from_json(nlohmann::json::parse(model::dump_json(model::to_json(spec))));
    CHECK(spec2.states == spec.states);
    CHECK(spec2.family == spec.family);
    auto theta2 = model::theta_from_json(spec2, nlohmann::json::parse(model::dump_json(model::to_json(spec, theta))));
    CHECK((model::natural_coordinates(spec, theta2) - model::natural_coordinates(spec, theta)).norm() == 0.0);
    CHECK(model::theta_digest(spec, theta) == model::theta_digest(spec2, theta2));
  }
}

TEST_CASE("evaluator derivatives match finite differences of log q and log g") {
  std::mt19937_64 rng(14);
  for (int c = 0; c < 30; ++c) {
    auto spec = oracle::random_spec(rng);
    auto theta = oracle::random_theta(spec, rng);
    model::Evaluator ev(spec, theta, true);
    Eigen::VectorXd at = model::pack(spec, theta).values;
    const int S = spec.states;
    int a = static_cast<int>(rng() % S), b = static_cast<int>(rng() % S);
    auto log_q = [&](const Eigen::VectorXd& p) { return std::log(model::unpack(spec, p).transition(a, b)); };
    CHECK(oracle::guarded_relative(ev.grad_log_q(a, b), oracle::fd_gradient(log_q, at)) < 1e-7);
    CHECK(oracle::guarded_relative(ev.hess_log_q(a, b), oracle::fd_hessian(log_q, at)) < 1e-5);
    double y = spec.family == model::Family::gaussian ? -1.0 + 2.0 * (rng() % 100) / 100.0 : static_cast<double>(rng() % spec.outcomes);
    auto log_g = [&](const Eigen::VectorXd& p) { return model::log_emission(spec, model::unpack(spec, p), a, y); };
    Eigen::VectorXd g = Eigen::VectorXd::Zero(at.size());
    ev.add_grad_log_g(a, y, 1.0, g);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(at.size(), at.size());
    ev.add_hess_log_g(a, y, 1.0, h);
    CHECK(oracle::guarded_relative(g, oracle::fd_gradient(log_g, at)) < 1e-7);
    CHECK(oracle::guarded_relative(h, oracle::fd_hessian(log_g, at)) < 1e-5);
    CHECK(ev.log_g(a, y) == doctest::Approx(std::log(oracle::emission_density(spec, theta, a, y))).epsilon(1e-12));
  }
}
