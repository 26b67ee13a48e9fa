#include "spoil/spoil_linear.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

void SpoilConfig::validate() const {
  if (k_iters == 0) throw ValidationError("spoil: k_iters must be at least 1");
  if (!(eta > 0.0)) throw ValidationError("spoil: eta must be positive");
  if (!(b_theta > 0.0)) throw ValidationError("spoil: b_theta must be positive");
}

Schedule schedule_from_log_actions(double log_actions, double gamma, double epsilon) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("schedule: gamma must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("schedule: epsilon must be positive");
  if (!(log_actions > 0.0)) throw ValidationError("schedule: need at least two actions");
  const double horizon = 1.0 - gamma;
  const double exact = 2.0 * log_actions / (horizon * horizon * epsilon * epsilon);
  const double k = std::max(1.0, std::ceil(exact * (1.0 - 1e-12)));
  Schedule s{static_cast<std::size_t>(k), 0.0};
  s.eta = horizon * std::sqrt(2.0 * log_actions / k);
  return s;
}

Schedule linear_schedule(std::size_t n_actions, double gamma, double epsilon) {
  if (n_actions < 2) throw ValidationError("schedule: need at least two actions");
  return schedule_from_log_actions(std::log(static_cast<double>(n_actions)), gamma, epsilon);
}

double default_b_theta(double gamma, double b_phi) { return 1.0 / ((1.0 - gamma) * b_phi); }

Vector SpoilRunRecord::cumulative_theta(std::size_t k) const {
  const std::size_t d = theta.empty() ? 0 : theta.front().size();
  Vector total(d, 0.0);
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < d; ++i) total[i] += theta[j - 1][i];
  }
  return total;
}

Vector feature_gap_estimate(const ExpertDataset& data, const FeatureMap& features, const Policy& pi) {
  const std::size_t d = features.dim();
  const std::size_t na = features.n_actions();
  const PairCounts counts(data);
  const double inv_tau = 1.0 / static_cast<double>(counts.total);
  Vector g(d, 0.0);
  Vector p(na);
  for (std::size_t x = 0; x < counts.n_states; ++x) {
    if (counts.state[x] == 0) continue;
    pi.probabilities(x, p);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = (static_cast<double>(counts.pair[x * na + a]) -
                        static_cast<double>(counts.state[x]) * p[a]) * inv_tau;
      const auto f = features.at(x, a);
      for (std::size_t j = 0; j < d; ++j) g[j] += w * f[j];
    }
  }
  return g;
}

Vector critic_best_response_linear(std::span<const double> g_hat, double b_theta) {
  if (!(b_theta > 0.0)) throw ValidationError("b_theta must be positive");
  const double norm = std::sqrt(std::inner_product(g_hat.begin(), g_hat.end(), g_hat.begin(), 0.0));
  Vector theta(g_hat.size(), 0.0);
  if (norm == 0.0) return theta;
  for (std::size_t j = 0; j < g_hat.size(); ++j) theta[j] = b_theta * g_hat[j] / norm;
  return theta;
}

FeatureGapEstimator::FeatureGapEstimator(const ExpertDataset& data, const FeatureMap& features)
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
    weights_.push_back(static_cast<double>(counts.state[x]) * inv_tau);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = static_cast<double>(counts.pair[x * na + a]) * inv_tau;
      if (w == 0.0) continue;
      const auto f = features.at(x, a);
      for (std::size_t j = 0; j < f.size(); ++j) expert_mean_[j] += w * f[j];
    }
  }
}

Vector FeatureGapEstimator::gap(std::span<const double> w) const {
  const std::size_t na = features_.n_actions();
  Vector logits(features_.n_states() * na, 0.0);
  for (std::size_t x : states_) {
    for (std::size_t a = 0; a < na; ++a) logits[x * na + a] = features_.dot(x, a, w);
  }
  return gap_for_logits(logits);
}

Vector FeatureGapEstimator::gap_for_logits(std::span<const double> logits) const {
  const std::size_t na = features_.n_actions();
  const std::size_t d = features_.dim();
  Vector g = expert_mean_;
  Vector p(na);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const std::size_t x = states_[i];
    softmax(logits.subspan(x * na, na), p);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = weights_[i] * p[a];
      const auto f = features_.at(x, a);
      for (std::size_t j = 0; j < d; ++j) g[j] -= w * f[j];
    }
  }
  return g;
}

std::pair<Policy, SpoilRunRecord> run_spoil_linear(const ExpertDataset& data, const FeatureMap& features,
                                                   const SpoilConfig& cfg) {
  cfg.validate();
  const FeatureGapEstimator estimator(data, features);
  const std::size_t d = features.dim();

  SpoilRunRecord record;
  record.k_iters = cfg.k_iters;
  record.eta = cfg.eta;
  record.b_theta = cfg.b_theta;
  record.theta.reserve(cfg.k_iters);

  Vector theta_bar(d, 0.0);  // sum of theta_j for j < k
  Vector w(d);
  for (std::size_t k = 1; k <= cfg.k_iters; ++k) {
    for (std::size_t j = 0; j < d; ++j) w[j] = cfg.eta * theta_bar[j];
    const Vector g_hat = estimator.gap(w);
    Vector theta = critic_best_response_linear(g_hat, cfg.b_theta);
    const double g_norm = std::sqrt(std::inner_product(g_hat.begin(), g_hat.end(), g_hat.begin(), 0.0));
    if (!std::isfinite(g_norm)) throw NumericalError("feature gap became non-finite at iteration " + std::to_string(k));
    for (std::size_t j = 0; j < d; ++j) theta_bar[j] += theta[j];
    if (cfg.record_diagnostics) {
      record.g_hat_norm.push_back(g_norm);
      record.objective.push_back(std::inner_product(theta.begin(), theta.end(), g_hat.begin(), 0.0));
    }
    record.theta.push_back(std::move(theta));
  }

  Rng rng(cfg.output_seed);
  record.selected = 1 + static_cast<std::size_t>(rng.below(cfg.k_iters));
  Policy out = spoil_linear_iterate(features, record, record.selected);
  return {std::move(out), std::move(record)};
}

Policy spoil_linear_iterate(const FeatureMap& features, const SpoilRunRecord& record, std::size_t k) {
  if (k < 1 || k > record.theta.size()) throw ValidationError("iterate index out of range");
  Vector w = record.cumulative_theta(k);
  for (double& v : w) v *= record.eta;
  return linear_softmax_policy(features, w);
}

void write_run_csv(std::ostream& out, const SpoilRunRecord& record) {
  const std::size_t d = record.theta.empty() ? 0 : record.theta.front().size();
  out << "k,g_hat_norm,objective_value";
  for (std::size_t j = 1; j <= d; ++j) out << ",theta_" << j;
  out << '\n';
  for (std::size_t k = 0; k < record.theta.size(); ++k) {
    out << (k + 1) << ',' << (k < record.g_hat_norm.size() ? format_real(record.g_hat_norm[k]) : "")
        << ',' << (k < record.objective.size() ? format_real(record.objective[k]) : "");
    for (double v : record.theta[k]) out << ',' << format_real(v);
    out << '\n';
  }
}

SpoilRunRecord read_run_csv(std::istream& in) {
  SpoilRunRecord record;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line_no == 1) {
      if (cells.size() < 3 || cells[0] != "k") throw ParseError("expected run CSV header", line_no);
      dim = cells.size() - 3;
      continue;
    }
    if (cells.size() != dim + 3) throw ParseError("wrong number of columns", line_no);
    auto real = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0' || !std::isfinite(v)) throw ParseError("invalid real `" + s + "`", line_no);
      return v;
    };
    if (real(cells[0]) != static_cast<double>(record.theta.size() + 1)) throw ParseError("iterations must be consecutive", line_no);
    record.g_hat_norm.push_back(real(cells[1]));
    record.objective.push_back(real(cells[2]));
    Vector theta(dim);
    for (std::size_t j = 0; j < dim; ++j) theta[j] = real(cells[j + 3]);
    record.theta.push_back(std::move(theta));
  }
  record.k_iters = record.theta.size();
  if (record.k_iters == 0) throw ValidationError("run CSV holds no iterations");
  return record;
}

}  // namespace spoil
