#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmt::model {

enum class Family { gaussian, categorical };

struct ModelSpec {
  int states = 2;
  Family family = Family::gaussian;
  int outcomes = 0;  // categorical only
  double epsilon_floor = 1e-3;

  void validate() const;
  // Number of packed coordinates.
  int dimension() const;
  int emission_offset() const { return states * (states - 1); }
};

// Transition matrix plus emission parameters; observations are reals for the
// gaussian family and integer codes 0..M-1 (stored as doubles) for categorical.
struct Theta {
  Eigen::MatrixXd transition;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd emission_rows;
};

// Throws NotStochastic / InvalidArgument when theta violates the model invariants.
void validate_theta(const ModelSpec& spec, const Theta& theta);

Eigen::RowVectorXd stationary_distribution(const Eigen::MatrixXd& q);

struct MixingProfile {
  double sigma_minus = 0;
  double sigma_plus = 0;
  double rho = 0;
};
MixingProfile mixing_profile(const Eigen::MatrixXd& q);

// Largest total-variation distance between two rows.
double dobrushin(const Eigen::MatrixXd& k);

struct PackedTheta {
  Eigen::VectorXd values;
  std::vector<std::string> names;
};

PackedTheta pack(const ModelSpec& spec, const Theta& theta);
Theta unpack(const ModelSpec& spec, const Eigen::VectorXd& values);
std::vector<std::string> coordinate_names(const ModelSpec& spec);

struct AssumptionCheck {
  std::string label;
  std::string description;
  double value = 0;
  bool passed = false;
};
std::vector<AssumptionCheck> validate_assumptions(const ModelSpec& spec, const Theta& theta, const std::vector<double>& observations);

double log_emission(const ModelSpec& spec, const Theta& theta, int state, double y);
// sup over y of the emission density in state s.
double emission_sup(const ModelSpec& spec, const Theta& theta, int state);

// Relabels hidden states: new state i is old state perm[i].
Theta permute(const ModelSpec& spec, const Theta& theta, const std::vector<int>& perm);
// Free natural parameters: Q(s,t) for t < S-1, then mu and sigma (or emission rows without their last column).
Eigen::VectorXd natural_coordinates(const ModelSpec& spec, const Theta& theta);
// Permutation of `estimate` closest to `reference` in natural coordinates.
std::vector<int> best_alignment(const ModelSpec& spec, const Theta& estimate, const Theta& reference);

// Caches log-parameters and (optionally) derivatives of log Q and log g with
// respect to the packed coordinates.
class Evaluator {
 public:
  Evaluator(ModelSpec spec, Theta theta, bool with_derivatives = false);

  const ModelSpec& spec() const { return spec_; }
  const Theta& theta() const { return theta_; }
  int states() const { return spec_.states; }
  int dimension() const { return dim_; }
  bool has_derivatives() const { return with_derivatives_; }

  double q(int s, int t) const { return theta_.transition(s, t); }
  double log_q(int s, int t) const { return log_q_(s, t); }
  double log_g(int s, double y) const;

  // Gradient / Hessian of log Q(s,t) in packed coordinates.
  const Eigen::VectorXd& grad_log_q(int s, int t) const { return grad_q_[s * spec_.states + t]; }
  const Eigen::MatrixXd& hess_log_q(int s, int t) const { return hess_q_[s * spec_.states + t]; }
  // Adds scale * gradient (Hessian) of log g(s,y) to out.
  void add_grad_log_g(int s, double y, double scale, Eigen::Ref<Eigen::VectorXd> out) const;
  void add_hess_log_g(int s, double y, double scale, Eigen::Ref<Eigen::MatrixXd> out) const;

 private:
  ModelSpec spec_;
  Theta theta_;
  bool with_derivatives_;
  int dim_;
  Eigen::MatrixXd log_q_;
  Eigen::VectorXd log_sigma_;
  Eigen::MatrixXd log_rows_;
  Eigen::MatrixXd row_simplex_;  // softmax part of each emission row
  std::vector<Eigen::VectorXd> grad_q_;
  std::vector<Eigen::MatrixXd> hess_q_;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec, const Theta& theta);
Theta theta_from_json(const ModelSpec& spec, const nlohmann::json& j);

// JSON text with every real printed to 17 significant digits.
std::string dump_json(const nlohmann::json& j, int indent = -1);
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Short hex digest of the packed parameter values.
std::string theta_digest(const ModelSpec& spec, const Theta& theta);

}  // namespace hmt::model
