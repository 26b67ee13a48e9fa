#include "spoil/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

std::string to_string(BcClass kind) {
  return kind == BcClass::tabular ? "tabular" : "linear_softmax";
}

BcClass parse_bc_class(const std::string& name) {
  if (name == "tabular") return BcClass::tabular;
  if (name == "linear_softmax") return BcClass::linear_softmax;
  throw ValidationError("unknown BC class `" + name + "`");
}

void BcConfig::validate() const {
  if (!(smoothing >= 0.0)) throw ValidationError("bc: smoothing must be non-negative");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
    throw ValidationError("bc: step_size must be positive, or 0 for the automatic step");
  }
}

Policy bc_tabular(const ExpertDataset& data, std::size_t n_states, std::size_t n_actions, double smoothing) {
  if (!(smoothing >= 0.0)) throw ValidationError("bc: smoothing must be non-negative");
  if (data.n_states != n_states || data.n_actions != n_actions) {
    throw ValidationError("dataset does not match the requested state-action space");
  }
  data.validate();
  const PairCounts counts(data);
  const double uniform = 1.0 / static_cast<double>(n_actions);
  Vector logits(n_states * n_actions, 0.0);
  for (std::size_t x = 0; x < n_states; ++x) {
    if (counts.state[x] == 0) continue;
    const double denom = static_cast<double>(counts.state[x]) + static_cast<double>(n_actions) * smoothing;
    for (std::size_t a = 0; a < n_actions; ++a) {
      const double p = (static_cast<double>(counts.pair[x * n_actions + a]) + smoothing) / denom;
      // Unseen actions at smoothing 0 get a logit far enough below the rest
      // that their probability underflows to zero.
      logits[x * n_actions + a] = p > 0.0 ? std::log(p) : std::log(uniform) - 800.0;
    }
  }
  return Policy(n_states, n_actions, std::move(logits));
}

LinearSoftmaxLikelihood::LinearSoftmaxLikelihood(const ExpertDataset& data, const FeatureMap& features)
    : features_(features), expert_mean_(features.dim(), 0.0) {
  if (data.n_states != features.n_states() || data.n_actions != features.n_actions()) {
    throw ValidationError("dataset and feature map disagree on the state-action space");
  }
  data.validate();
  const PairCounts counts(data);
  const double inv_tau = 1.0 / static_cast<double>(counts.total);
  const std::size_t na = features.n_actions();
  for (std::size_t x = 0; x < counts.n_states; ++x) {
    if (counts.state[x] == 0) continue;
    states_.push_back(x);
    state_weight_.push_back(static_cast<double>(counts.state[x]) * inv_tau);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = static_cast<double>(counts.pair[x * na + a]) * inv_tau;
      if (w == 0.0) continue;
      const auto f = features.at(x, a);
      for (std::size_t j = 0; j < f.size(); ++j) expert_mean_[j] += w * f[j];
    }
  }
}

double LinearSoftmaxLikelihood::value(std::span<const double> theta) const {
  const std::size_t na = features_.n_actions();
  double ll = std::inner_product(expert_mean_.begin(), expert_mean_.end(), theta.begin(), 0.0);
  Vector z(na);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    for (std::size_t a = 0; a < na; ++a) z[a] = features_.dot(states_[i], a, theta);
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - m);
    ll -= state_weight_[i] * (m + std::log(total));
  }
  return ll;
}

Vector LinearSoftmaxLikelihood::gradient(std::span<const double> theta) const {
  const std::size_t na = features_.n_actions();
  const std::size_t d = features_.dim();
  Vector g = expert_mean_;
  Vector z(na);
  Vector p(na);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const std::size_t x = states_[i];
    for (std::size_t a = 0; a < na; ++a) z[a] = features_.dot(x, a, theta);
    softmax(z, p);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = state_weight_[i] * p[a];
      const auto f = features_.at(x, a);
      for (std::size_t j = 0; j < d; ++j) g[j] -= w * f[j];
    }
  }
  return g;
}

double safe_step_size(const ExpertDataset& data, const FeatureMap& features) {
  const PairCounts counts(data);
  double diameter2 = 0.0;
  for (std::size_t x = 0; x < counts.n_states; ++x) {
    if (counts.state[x] == 0) continue;
    for (std::size_t a = 0; a < features.n_actions(); ++a) {
      const auto pa = features.at(x, a);
      for (std::size_t b = a + 1; b < features.n_actions(); ++b) {
        const auto pb = features.at(x, b);
        double d2 = 0.0;
        for (std::size_t j = 0; j < pa.size(); ++j) d2 += (pa[j] - pb[j]) * (pa[j] - pb[j]);
        diameter2 = std::max(diameter2, d2);
      }
    }
  }
  // Features that do not vary with the action leave the likelihood flat.
  return diameter2 > 0.0 ? 4.0 / diameter2 : 1.0;
}

BcFit bc_linear_softmax_fit(const ExpertDataset& data, const FeatureMap& features, const BcConfig& cfg) {
  cfg.validate();
  const LinearSoftmaxLikelihood objective(data, features);
  Vector theta(features.dim(), 0.0);
  BcFit fit{Policy::uniform(1, 1), {}, {}, cfg.step_size > 0.0 ? cfg.step_size : safe_step_size(data, features)};
  const double step_size = fit.step_size;
  fit.log_likelihood.reserve(cfg.steps + 1);
  double previous = objective.value(theta);
  fit.log_likelihood.push_back(previous);
  std::size_t falling = 0;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Vector g = objective.gradient(theta);
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += step_size * g[j];
    const double ll = objective.value(theta);
    if (!std::isfinite(ll)) {
      throw NumericalError("bc: log-likelihood became non-finite at step " + std::to_string(step) +
                           "; use a smaller step_size");
    }
    fit.log_likelihood.push_back(ll);
    falling = ll < previous ? falling + 1 : 0;
    if (falling >= 10) {
      throw NumericalError("bc: log-likelihood fell for 10 consecutive steps (step " + std::to_string(step) +
                           ", step_size " + format_real(step_size) + "); use a smaller step_size");
    }
    previous = ll;
  }
  fit.policy = linear_softmax_policy(features, theta);
  fit.theta = std::move(theta);
  return fit;
}

Policy bc_linear_softmax(const ExpertDataset& data, const FeatureMap& features, const BcConfig& cfg) {
  return bc_linear_softmax_fit(data, features, cfg).policy;
}

Policy fit_bc(const ExpertDataset& data, const FeatureMap* features, const BcConfig& cfg) {
  cfg.validate();
  if (cfg.class_kind == BcClass::tabular) return bc_tabular(data, data.n_states, data.n_actions, cfg.smoothing);
  if (features == nullptr) throw ValidationError("linear-softmax BC needs a feature map");
  return bc_linear_softmax(data, *features, cfg);
}

}  // namespace spoil
