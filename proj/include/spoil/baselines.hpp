#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spoil/dataset.hpp"
#include "spoil/mdp.hpp"

namespace spoil {

enum class BcClass { tabular, linear_softmax };

std::string to_string(BcClass kind);
BcClass parse_bc_class(const std::string& name);

struct BcConfig {
  BcClass class_kind = BcClass::linear_softmax;
  double smoothing = 0.0;  ///< tabular pseudo-count
  std::size_t steps = 2000;
  /// Gradient-ascent step; 0 selects safe_step_size() of the data.
  double step_size = 0.0;
  std::uint64_t seed = 0;  ///< unused by the deterministic fits

  void validate() const;
};

/// pi(a|x) = (count(x,a) + s) / (count(x) + A s); unvisited states are uniform.
Policy bc_tabular(const ExpertDataset& data, std::size_t n_states, std::size_t n_actions, double smoothing);

/// Average log-likelihood of the dataset under the linear-softmax policy with
/// parameter theta, and its gradient.
class LinearSoftmaxLikelihood {
 public:
  LinearSoftmaxLikelihood(const ExpertDataset& data, const FeatureMap& features);

  double value(std::span<const double> theta) const;
  /// Gradient, which equals the feature gap of pi_theta on the dataset.
  Vector gradient(std::span<const double> theta) const;

 private:
  const FeatureMap& features_;
  std::vector<std::size_t> states_;
  Vector state_weight_;  ///< count(x) / tau
  Vector expert_mean_;   ///< tau^-1 sum_i phi(X_i, A_i)
};

/// 4 / max_x D_x^2, where D_x is the diameter of {phi(x,a)}_a over visited
/// states. The likelihood Hessian is bounded by D_x^2 / 4 along any unit
/// direction, so ascent with this step never decreases the likelihood.
double safe_step_size(const ExpertDataset& data, const FeatureMap& features);

struct BcFit {
  Policy policy;
  Vector theta;                   ///< empty for tabular fits
  std::vector<double> log_likelihood;  ///< per step, starting at theta = 0
  double step_size = 0.0;
};

/// Full-batch gradient ascent on the average log-likelihood from theta = 0.
/// `step_size` records the step actually used.
/// Throws NumericalError when the likelihood falls for 10 steps in a row.
BcFit bc_linear_softmax_fit(const ExpertDataset& data, const FeatureMap& features, const BcConfig& cfg);
Policy bc_linear_softmax(const ExpertDataset& data, const FeatureMap& features, const BcConfig& cfg);

/// Dispatch on cfg.class_kind. `features` may be null for tabular fits.
Policy fit_bc(const ExpertDataset& data, const FeatureMap* features, const BcConfig& cfg);

}  // namespace spoil
