#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "spoil/dataset.hpp"
#include "spoil/mdp.hpp"

namespace spoil {

struct SpoilConfig {
  std::size_t k_iters = 1;
  double eta = 1.0;
  double b_theta = 1.0;  ///< critic ball radius; ignored by finite critic classes
  std::uint64_t output_seed = 0;
  bool record_diagnostics = true;

  void validate() const;
};

struct Schedule {
  std::size_t k_iters;
  double eta;
};

/// K = ceil(2 ln A / ((1-gamma)^2 eps^2)), eta = (1-gamma) sqrt(2 ln A / K).
/// The ceiling ignores a relative excess of 1e-12 so that exact-integer
/// values are not pushed up by rounding in ln A.
Schedule linear_schedule(std::size_t n_actions, double gamma, double epsilon);
/// Same schedule given ln A directly.
Schedule schedule_from_log_actions(double log_actions, double gamma, double epsilon);

/// Default critic radius 1 / ((1-gamma) b_phi): keeps every linear critic
/// within the sup-norm bound 1/(1-gamma) that the regret bound assumes.
double default_b_theta(double gamma, double b_phi);

/// Trace of a SPOIL run. Iteration k (1-based) is stored at index k-1.
struct SpoilRunRecord {
  std::size_t k_iters = 0;
  double eta = 0.0;
  double b_theta = 0.0;
  std::vector<Vector> theta;              ///< linear critics theta_k
  std::vector<std::size_t> critic_index;  ///< finite-class critics Q_k
  std::vector<double> g_hat_norm;         ///< ||g_hat_k|| (linear critics)
  std::vector<double> objective;          ///< empirical objective at (pi_k, Q_k)
  std::size_t selected = 1;               ///< output index I in [1, K]

  /// sum_{j<k} theta_j, the parameter of pi_k.
  Vector cumulative_theta(std::size_t k) const;
};

/// g_hat = tau^-1 sum_i (phi(X_i, A_i) - sum_a pi(a|X_i) phi(X_i, a)).
Vector feature_gap_estimate(const ExpertDataset& data, const FeatureMap& features, const Policy& pi);

/// argmax over ||theta|| <= b_theta of <theta, g_hat>; zero when g_hat = 0.
Vector critic_best_response_linear(std::span<const double> g_hat, double b_theta);

/// Feature gap for linear-softmax policies, restricted to the states present
/// in a dataset. `gap(w)` evaluates g_hat for pi(a|x) proportional to
/// exp(<phi(x,a), w>).
class FeatureGapEstimator {
 public:
  FeatureGapEstimator(const ExpertDataset& data, const FeatureMap& features);

  Vector gap(std::span<const double> w) const;
  /// Gap for an arbitrary logit table.
  Vector gap_for_logits(std::span<const double> logits) const;
  const Vector& expert_mean() const { return expert_mean_; }

 private:
  const FeatureMap& features_;
  std::vector<std::size_t> states_;  ///< visited states
  Vector weights_;                   ///< count(x) / tau for visited states
  Vector expert_mean_;               ///< tau^-1 sum_i phi(X_i, A_i)
};

/// Algorithm with linear critics: pi_1 uniform, then for k = 1..K the
/// exponential-weights actor, the feature-gap estimate and the closed-form
/// critic. Returns pi_I for I uniform on [K] drawn with cfg.output_seed.
std::pair<Policy, SpoilRunRecord> run_spoil_linear(const ExpertDataset& data, const FeatureMap& features,
                                                   const SpoilConfig& cfg);

/// pi_k of a linear run, rebuilt from the cumulative critic parameter.
Policy spoil_linear_iterate(const FeatureMap& features, const SpoilRunRecord& record, std::size_t k);

/// CSV `k,g_hat_norm,objective_value,theta_1,...,theta_d`.
void write_run_csv(std::ostream& out, const SpoilRunRecord& record);
/// Reads the CSV back; eta, b_theta and selected are not part of it.
SpoilRunRecord read_run_csv(std::istream& in);

}  // namespace spoil
