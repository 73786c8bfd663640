#include "hmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "hmt/error.hpp"
#include "hmt/rng.hpp"

namespace hmt::model {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kBoundaryClamp = 1e-12;
const double kLogSqrtTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_rows(const Eigen::MatrixXd& q, const char* what) {
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    if (!q.row(s).allFinite()) throw Error(ErrorCode::non_finite, std::string(what) + " has non-finite entries");
    if ((q.row(s).array() < 0).any()) throw Error(ErrorCode::not_stochastic, std::string(what) + " has negative entries");
    if (std::abs(q.row(s).sum() - 1.0) > 1e-10) {
      throw Error(ErrorCode::not_stochastic, std::string(what) + " row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

void check_stochastic(const Eigen::MatrixXd& q, const char* what) {
  if (q.rows() != q.cols() || q.rows() < 1) throw Error(ErrorCode::not_stochastic, std::string(what) + " must be square");
  check_rows(q, what);
}

// Softmax with the last coordinate pinned at zero.
Eigen::VectorXd pinned_softmax(const double* z, int count) {
  Eigen::VectorXd p(count);
  double top = 0.0;
  for (int j = 0; j + 1 < count; ++j) top = std::max(top, z[j]);
  for (int j = 0; j + 1 < count; ++j) p[j] = std::exp(z[j] - top);
  p[count - 1] = std::exp(-top);
  return p / p.sum();
}

void write_json(std::ostringstream& out, const nlohmann::json& j, int indent, int level) {
  auto newline = [&](int lvl) {
    if (indent >= 0) out << '\n' << std::string(static_cast<std::size_t>(indent * lvl), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ',';
        first = false;
        newline(level + 1);
        out << nlohmann::json(it.key()).dump() << (indent >= 0 ? ": " : ":");
        write_json(out, it.value(), indent, level + 1);
      }
      newline(level);
      out << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      bool scalars = std::none_of(j.begin(), j.end(), [](const auto& e) { return e.is_structured(); });
      out << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out << (scalars && indent >= 0 ? ", " : ",");
        if (!scalars) newline(level + 1);
        write_json(out, j[i], indent, level + 1);
      }
      if (!scalars) newline(level);
      out << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out << "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf;
      return;
    }
    default:
      out << j.dump();
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (states < 2) throw Error(ErrorCode::invalid_argument, "model needs at least 2 states");
  if (!(epsilon_floor > 0) || epsilon_floor * states >= 1) throw Error(ErrorCode::invalid_argument, "epsilon_floor must lie in (0, 1/S)");
  if (family == Family::categorical && outcomes < 2) throw Error(ErrorCode::invalid_argument, "categorical emissions need at least 2 outcomes");
}

int ModelSpec::dimension() const {
  int emission = family == Family::gaussian ? 2 * states : states * (outcomes - 1);
  return emission_offset() + emission;
}

void validate_theta(const ModelSpec& spec, const Theta& theta) {
  spec.validate();
  const int s = spec.states;
  if (theta.transition.rows() != s || theta.transition.cols() != s) throw Error(ErrorCode::invalid_argument, "transition matrix has wrong size");
  check_stochastic(theta.transition, "transition");
  if (theta.transition.minCoeff() < spec.epsilon_floor - kRowTolerance) {
    throw Error(ErrorCode::invalid_argument, "transition entry below epsilon_floor");
  }
  if (spec.family == Family::gaussian) {
    if (theta.mu.size() != s || theta.sigma.size() != s) throw Error(ErrorCode::invalid_argument, "gaussian parameters have wrong size");
    if (!theta.mu.allFinite() || !theta.sigma.allFinite()) throw Error(ErrorCode::non_finite, "gaussian parameters not finite");
    if ((theta.sigma.array() <= 0).any()) throw Error(ErrorCode::invalid_argument, "sigma must be positive");
  } else {
    if (theta.emission_rows.rows() != s || theta.emission_rows.cols() != spec.outcomes) {
      throw Error(ErrorCode::invalid_argument, "emission rows have wrong size");
    }
    check_rows(theta.emission_rows, "emission");
    if ((theta.emission_rows.array() <= 0).any()) throw Error(ErrorCode::invalid_argument, "emission probabilities must be positive");
  }
}

Eigen::RowVectorXd stationary_distribution(const Eigen::MatrixXd& q) {
  check_stochastic(q, "transition");
  const Eigen::Index s = q.rows();
  Eigen::RowVectorXd pi;
  if (s <= 64) {
    Eigen::MatrixXd a = q.transpose() - Eigen::MatrixXd::Identity(s, s);
    a.row(s - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(s);
    b[s - 1] = 1.0;
    pi = a.fullPivLu().solve(b).transpose();
    // One refinement step against the normalized system.
    Eigen::VectorXd r = b - a * pi.transpose();
    pi += a.fullPivLu().solve(r).transpose();
  } else {
    pi = Eigen::RowVectorXd::Constant(s, 1.0 / static_cast<double>(s));
    for (int it = 0; it < 100000; ++it) {
      Eigen::RowVectorXd next = pi * q;
      next /= next.sum();
      double change = (next - pi).lpNorm<1>();
      pi = next;
      if (change < 1e-15) break;
    }
  }
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

MixingProfile mixing_profile(const Eigen::MatrixXd& q) {
  check_stochastic(q, "transition");
  MixingProfile m;
  double s = static_cast<double>(q.rows());
  m.sigma_minus = s * q.minCoeff();
  m.sigma_plus = s * q.maxCoeff();
  m.rho = 1.0 - m.sigma_minus / m.sigma_plus;
  return m;
}

double dobrushin(const Eigen::MatrixXd& k) {
  double best = 0.0;
  for (Eigen::Index a = 0; a < k.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < k.rows(); ++b) best = std::max(best, 0.5 * (k.row(a) - k.row(b)).lpNorm<1>());
  }
  return best;
}

std::vector<std::string> coordinate_names(const ModelSpec& spec) {
  std::vector<std::string> names;
  const int s = spec.states;
  for (int a = 0; a < s; ++a) {
    for (int j = 0; j + 1 < s; ++j) names.push_back("transition_logit[" + std::to_string(a) + "][" + std::to_string(j) + "]");
  }
  if (spec.family == Family::gaussian) {
    for (int a = 0; a < s; ++a) names.push_back("mu[" + std::to_string(a) + "]");
    for (int a = 0; a < s; ++a) names.push_back("log_sigma[" + std::to_string(a) + "]");
  } else {
    for (int a = 0; a < s; ++a) {
      for (int j = 0; j + 1 < spec.outcomes; ++j) names.push_back("emission_logit[" + std::to_string(a) + "][" + std::to_string(j) + "]");
    }
  }
  return names;
}

PackedTheta pack(const ModelSpec& spec, const Theta& theta) {
  validate_theta(spec, theta);
  const int s = spec.states;
  const double eps = spec.epsilon_floor;
  const double scale = 1.0 - s * eps;
  PackedTheta out{Eigen::VectorXd(spec.dimension()), coordinate_names(spec)};
  int pos = 0;
  for (int a = 0; a < s; ++a) {
    Eigen::VectorXd p(s);
    for (int t = 0; t < s; ++t) p[t] = (std::max(theta.transition(a, t), eps + kBoundaryClamp) - eps) / scale;
    for (int j = 0; j + 1 < s; ++j) out.values[pos++] = std::log(p[j]) - std::log(p[s - 1]);
  }
  if (spec.family == Family::gaussian) {
    for (int a = 0; a < s; ++a) out.values[pos++] = theta.mu[a];
    for (int a = 0; a < s; ++a) out.values[pos++] = std::log(theta.sigma[a]);
  } else {
    const int m = spec.outcomes;
    for (int a = 0; a < s; ++a) {
      for (int j = 0; j + 1 < m; ++j) out.values[pos++] = std::log(theta.emission_rows(a, j)) - std::log(theta.emission_rows(a, m - 1));
    }
  }
  if (!out.values.allFinite()) throw Error(ErrorCode::non_finite, "packing produced non-finite coordinates");
  return out;
}

Theta unpack(const ModelSpec& spec, const Eigen::VectorXd& values) {
  spec.validate();
  if (values.size() != spec.dimension()) throw Error(ErrorCode::invalid_argument, "packed vector has wrong dimension");
  if (!values.allFinite()) throw Error(ErrorCode::non_finite, "packed vector contains non-finite values");
  const int s = spec.states;
  const double eps = spec.epsilon_floor;
  Theta theta;
  theta.transition.resize(s, s);
  int pos = 0;
  for (int a = 0; a < s; ++a) {
    Eigen::VectorXd p = pinned_softmax(values.data() + pos, s);
    pos += s - 1;
    theta.transition.row(a) = ((1.0 - s * eps) * p.array() + eps).matrix().transpose();
  }
  if (spec.family == Family::gaussian) {
    theta.mu = values.segment(pos, s);
    theta.sigma = values.segment(pos + s, s).array().exp().matrix();
  } else {
    const int m = spec.outcomes;
    theta.emission_rows.resize(s, m);
    for (int a = 0; a < s; ++a) {
      theta.emission_rows.row(a) = pinned_softmax(values.data() + pos, m).transpose();
      pos += m - 1;
    }
  }
  return theta;
}

double log_emission(const ModelSpec& spec, const Theta& theta, int state, double y) {
  if (spec.family == Family::gaussian) {
    double z = (y - theta.mu[state]) / theta.sigma[state];
    return -kLogSqrtTwoPi - std::log(theta.sigma[state]) - 0.5 * z * z;
  }
  auto code = static_cast<Eigen::Index>(std::llround(y));
  if (code < 0 || code >= spec.outcomes || static_cast<double>(code) != y) throw Error(ErrorCode::invalid_argument, "categorical observation out of range");
  return std::log(theta.emission_rows(state, code));
}

double emission_sup(const ModelSpec& spec, const Theta& theta, int state) {
  if (spec.family == Family::gaussian) return 1.0 / (theta.sigma[state] * std::sqrt(2.0 * std::numbers::pi));
  return theta.emission_rows.row(state).maxCoeff();
}

std::vector<AssumptionCheck> validate_assumptions(const ModelSpec& spec, const Theta& theta, const std::vector<double>& observations) {
  std::vector<AssumptionCheck> checks;
  const int s = spec.states;
  const Eigen::MatrixXd& q = theta.transition;

  double worst_row = 0;
  for (int a = 0; a < q.rows(); ++a) worst_row = std::max(worst_row, std::abs(q.row(a).sum() - 1.0));
  checks.push_back({"A1", "transition rows are probability vectors (lambda uniform on states)", worst_row,
                    worst_row <= 1e-10 && (q.array() >= 0).all()});

  double sigma_minus = s * q.minCoeff();
  checks.push_back({"A2(i)", "sigma_minus = S * min Q > 0 and every entry >= epsilon_floor", sigma_minus,
                    sigma_minus > 0 && q.minCoeff() >= spec.epsilon_floor - kRowTolerance});

  double min_log_g = std::numeric_limits<double>::infinity();
  double min_log_b_minus = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (double y : observations) {
    double b_minus = 0;
    for (int a = 0; a < s; ++a) {
      double lg = -std::numeric_limits<double>::infinity();
      try {
        lg = log_emission(spec, theta, a, y);
      } catch (const Error&) {
        finite = false;
      }
      min_log_g = std::min(min_log_g, lg);
      b_minus += std::exp(lg) / s;
    }
    min_log_b_minus = std::min(min_log_b_minus, std::log(b_minus));
  }
  if (observations.empty()) min_log_g = min_log_b_minus = 0;
  checks.push_back({"A2(ii)", "integral of g over states is in (0, inf) at every observation", min_log_b_minus,
                    finite && std::isfinite(min_log_b_minus)});
  checks.push_back({"A2(iii)", "g(x, y) > 0 for every state at every observation", min_log_g, finite && std::isfinite(min_log_g)});

  double b_plus = 1.0;
  for (int a = 0; a < s; ++a) b_plus = std::max(b_plus, emission_sup(spec, theta, a));
  checks.push_back({"A3(i)", "b_plus = 1 v sup g is finite", b_plus, std::isfinite(b_plus)});
  checks.push_back({"A3(ii)", "log b_minus(y) finite on the data", min_log_b_minus, std::isfinite(min_log_b_minus)});
  return checks;
}

Theta permute(const ModelSpec& spec, const Theta& theta, const std::vector<int>& perm) {
  const int s = spec.states;
  if (static_cast<int>(perm.size()) != s) throw Error(ErrorCode::invalid_argument, "permutation has wrong size");
  Theta out = theta;
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) out.transition(a, b) = theta.transition(perm[a], perm[b]);
    if (spec.family == Family::gaussian) {
      out.mu[a] = theta.mu[perm[a]];
      out.sigma[a] = theta.sigma[perm[a]];
    } else {
      out.emission_rows.row(a) = theta.emission_rows.row(perm[a]);
    }
  }
  return out;
}

Eigen::VectorXd natural_coordinates(const ModelSpec& spec, const Theta& theta) {
  const int s = spec.states;
  std::vector<double> v;
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b + 1 < s; ++b) v.push_back(theta.transition(a, b));
  }
  if (spec.family == Family::gaussian) {
    for (int a = 0; a < s; ++a) v.push_back(theta.mu[a]);
    for (int a = 0; a < s; ++a) v.push_back(theta.sigma[a]);
  } else {
    for (int a = 0; a < s; ++a) {
      for (int j = 0; j + 1 < spec.outcomes; ++j) v.push_back(theta.emission_rows(a, j));
    }
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> best_alignment(const ModelSpec& spec, const Theta& estimate, const Theta& reference) {
  std::vector<int> perm(static_cast<std::size_t>(spec.states));
  std::iota(perm.begin(), perm.end(), 0);
  Eigen::VectorXd target = natural_coordinates(spec, reference);
  std::vector<int> best = perm;
  double best_dist = std::numeric_limits<double>::infinity();
  do {
    double dist = (natural_coordinates(spec, permute(spec, estimate, perm)) - target).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Evaluator::Evaluator(ModelSpec spec, Theta theta, bool with_derivatives)
    : spec_(std::move(spec)), theta_(std::move(theta)), with_derivatives_(with_derivatives), dim_(spec_.dimension()) {
  validate_theta(spec_, theta_);
  const int s = spec_.states;
  log_q_ = theta_.transition.array().log().matrix();
  if (spec_.family == Family::gaussian) {
    log_sigma_ = theta_.sigma.array().log().matrix();
  } else {
    log_rows_ = theta_.emission_rows.array().log().matrix();
  }
  if (!with_derivatives_) return;

  const double eps = spec_.epsilon_floor;
  const double c = 1.0 - s * eps;
  grad_q_.assign(static_cast<std::size_t>(s * s), Eigen::VectorXd::Zero(dim_));
  hess_q_.assign(static_cast<std::size_t>(s * s), Eigen::MatrixXd::Zero(dim_, dim_));
  for (int a = 0; a < s; ++a) {
    Eigen::VectorXd p = (theta_.transition.row(a).transpose().array() - eps) / c;
    const int base = a * (s - 1);
    for (int b = 0; b < s; ++b) {
      const double qab = theta_.transition(a, b);
      Eigen::VectorXd dq = Eigen::VectorXd::Zero(s - 1);
      Eigen::MatrixXd d2q = Eigen::MatrixXd::Zero(s - 1, s - 1);
      for (int j = 0; j + 1 < s; ++j) {
        double dbj = b == j ? 1.0 : 0.0;
        dq[j] = c * p[b] * (dbj - p[j]);
        for (int l = 0; l + 1 < s; ++l) {
          double dbl = b == l ? 1.0 : 0.0;
          double djl = j == l ? 1.0 : 0.0;
          d2q(j, l) = c * (p[b] * (dbl - p[l]) * (dbj - p[j]) - p[b] * p[j] * (djl - p[l]));
        }
      }
      auto idx = static_cast<std::size_t>(a * s + b);
      grad_q_[idx].segment(base, s - 1) = dq / qab;
      hess_q_[idx].block(base, base, s - 1, s - 1) = d2q / qab - dq * dq.transpose() / (qab * qab);
    }
  }
  if (spec_.family == Family::categorical) {
    row_simplex_ = theta_.emission_rows;
  }
}

double Evaluator::log_g(int s, double y) const {
  if (spec_.family == Family::gaussian) {
    double z = (y - theta_.mu[s]) / theta_.sigma[s];
    return -kLogSqrtTwoPi - log_sigma_[s] - 0.5 * z * z;
  }
  auto code = static_cast<Eigen::Index>(y);
  return log_rows_(s, code);
}

void Evaluator::add_grad_log_g(int s, double y, double scale, Eigen::Ref<Eigen::VectorXd> out) const {
  const int off = spec_.emission_offset();
  if (spec_.family == Family::gaussian) {
    const int ns = spec_.states;
    double inv_var = 1.0 / (theta_.sigma[s] * theta_.sigma[s]);
    double r = y - theta_.mu[s];
    out[off + s] += scale * r * inv_var;
    out[off + ns + s] += scale * (r * r * inv_var - 1.0);
    return;
  }
  const int m = spec_.outcomes;
  auto code = static_cast<int>(y);
  const int base = off + s * (m - 1);
  for (int j = 0; j + 1 < m; ++j) out[base + j] += scale * ((code == j ? 1.0 : 0.0) - row_simplex_(s, j));
}

void Evaluator::add_hess_log_g(int s, double y, double scale, Eigen::Ref<Eigen::MatrixXd> out) const {
  const int off = spec_.emission_offset();
  if (spec_.family == Family::gaussian) {
    const int ns = spec_.states;
    double inv_var = 1.0 / (theta_.sigma[s] * theta_.sigma[s]);
    double r = y - theta_.mu[s];
    const int im = off + s;
    const int it = off + ns + s;
    out(im, im) -= scale * inv_var;
    out(im, it) -= scale * 2.0 * r * inv_var;
    out(it, im) -= scale * 2.0 * r * inv_var;
    out(it, it) -= scale * 2.0 * r * r * inv_var;
    return;
  }
  const int m = spec_.outcomes;
  const int base = off + s * (m - 1);
  for (int j = 0; j + 1 < m; ++j) {
    for (int l = 0; l + 1 < m; ++l) {
      double rj = row_simplex_(s, j);
      out(base + j, base + l) -= scale * (rj * (j == l ? 1.0 : 0.0) - rj * row_simplex_(s, l));
    }
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json emission = {{"family", spec.family == Family::gaussian ? "gaussian" : "categorical"}};
  if (spec.family == Family::categorical) emission["outcomes"] = spec.outcomes;
  return {{"states", spec.states}, {"emission", emission}, {"epsilon_floor", spec.epsilon_floor}};
}

ModelSpec model_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    for (const auto& [key, value] : j.items()) {
      if (key != "states" && key != "emission" && key != "epsilon_floor") throw Error(ErrorCode::invalid_argument, "unknown model key '" + key + "'");
    }
    spec.states = j.at("states").get<int>();
    const auto& emission = j.at("emission");
    std::string family = emission.at("family").get<std::string>();
    if (family == "gaussian") {
      spec.family = Family::gaussian;
    } else if (family == "categorical") {
      spec.family = Family::categorical;
      spec.outcomes = emission.at("outcomes").get<int>();
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown emission family '" + family + "'");
    }
    if (j.contains("epsilon_floor")) spec.epsilon_floor = j.at("epsilon_floor").get<double>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed model document: ") + e.what());
  }
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  auto rows = static_cast<Eigen::Index>(j.size());
  auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index a = 0; a < rows; ++a) {
    if (static_cast<Eigen::Index>(j[a].size()) != cols) throw Error(ErrorCode::invalid_argument, "ragged matrix");
    for (Eigen::Index b = 0; b < cols; ++b) m(a, b) = j[a][b].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec, const Theta& theta) {
  nlohmann::json emission;
  if (spec.family == Family::gaussian) {
    emission["mu"] = std::vector<double>(theta.mu.data(), theta.mu.data() + theta.mu.size());
    emission["sigma"] = std::vector<double>(theta.sigma.data(), theta.sigma.data() + theta.sigma.size());
  } else {
    emission["rows"] = matrix_json(theta.emission_rows);
  }
  return {{"transition", matrix_json(theta.transition)}, {"emission", emission}};
}

Theta theta_from_json(const ModelSpec& spec, const nlohmann::json& j) {
  try {
    Theta theta;
    theta.transition = matrix_from_json(j.at("transition"));
    const auto& emission = j.at("emission");
    if (spec.family == Family::gaussian) {
      theta.mu = vector_from_json(emission.at("mu"));
      theta.sigma = vector_from_json(emission.at("sigma"));
    } else {
      theta.emission_rows = matrix_from_json(emission.at("rows"));
    }
    validate_theta(spec, theta);
    return theta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed theta document: ") + e.what());
  }
}

std::string dump_json(const nlohmann::json& j, int indent) {
  std::ostringstream out;
  write_json(out, j, indent, 0);
  return out.str();
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

std::string theta_digest(const ModelSpec& spec, const Theta& theta) {
  Eigen::VectorXd v = natural_coordinates(spec, theta);
  std::uint64_t h = 0x51ed270b27a1c0deULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    double x = v[i];
    std::memcpy(&bits, &x, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hmt::model
