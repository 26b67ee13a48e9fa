#include "spoil/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

namespace {

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

void check_expert(const FiniteMdp& mdp, const Policy& expert) {
  if (expert.n_states() != mdp.n_states() || expert.n_actions() != mdp.n_actions()) {
    throw ValidationError("expert policy does not match the MDP");
  }
}

// Empirical and exact objectives for one Q under one policy.
struct ObjectivePair {
  double empirical;
  double exact;
};

ObjectivePair objectives(const ExpertReference& ref, const PairCounts& counts, std::span<const double> probs,
                         std::span<const double> q, std::size_t na) {
  double emp = 0.0;
  double exact = 0.0;
  for (std::size_t x = 0; x < counts.n_states; ++x) {
    double expert_q = 0.0;
    double learner_q = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = x * na + a;
      expert_q += ref.probs[i] * q[i];
      learner_q += probs[i] * q[i];
      emp += static_cast<double>(counts.pair[i]) * q[i];
    }
    emp -= static_cast<double>(counts.state[x]) * learner_q;
    exact += ref.occupancy.nu[x] * (expert_q - learner_q);
  }
  return {emp / static_cast<double>(counts.total), exact};
}

DecompositionReport finish_report(std::vector<DecompositionRow> rows, double estimation_sum) {
  DecompositionReport report;
  const double k = static_cast<double>(rows.size());
  double sub = 0.0;
  for (const auto& r : rows) sub += r.suboptimality;
  report.suboptimality = sub / k;
  report.regret_term = rows.empty() ? 0.0 : rows.back().cumulative_regret / k;
  report.estimation_term = 2.0 * estimation_sum / k;
  report.bound_satisfied =
      report.suboptimality <= report.regret_term + report.estimation_term + report.tolerance;
  report.rows = std::move(rows);
  return report;
}

void check_record(const SpoilRunRecord& record, const ExpertDataset& data, std::size_t n, std::size_t na) {
  if (record.k_iters == 0) throw ValidationError("run record holds no iterations");
  if (!(record.eta > 0.0)) throw ValidationError("run record needs a positive eta");
  if (data.n_states != n || data.n_actions != na) {
    throw ValidationError("dataset does not match the environment");
  }
  data.validate();
}

}  // namespace

ExpertReference::ExpertReference(const FiniteMdp& mdp, const Policy& expert)
    : occupancy(occupancy_measures(mdp, expert)), probs(expert.probability_table()) {
  check_expert(mdp, expert);
  value = std::inner_product(occupancy.mu.begin(), occupancy.mu.end(), mdp.rewards().begin(), 0.0);
}

double true_objective(const ExpertReference& ref, const Policy& pi, const QFunction& q) {
  const std::size_t na = pi.n_actions();
  double total = 0.0;
  Vector p(na);
  for (std::size_t x = 0; x < pi.n_states(); ++x) {
    pi.probabilities(x, p);
    double diff = 0.0;
    for (std::size_t a = 0; a < na; ++a) diff += (ref.probs[x * na + a] - p[a]) * q(x, a);
    total += ref.occupancy.nu[x] * diff;
  }
  return total;
}

double true_objective(const FiniteMdp& mdp, const Policy& expert, const Policy& pi, const QFunction& q) {
  return true_objective(ExpertReference(mdp, expert), pi, q);
}

Vector exact_feature_gap(const ExpertReference& ref, const FeatureMap& features, const Policy& pi) {
  const std::size_t na = features.n_actions();
  const std::size_t d = features.dim();
  Vector g(d, 0.0);
  Vector p(na);
  for (std::size_t x = 0; x < features.n_states(); ++x) {
    pi.probabilities(x, p);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = ref.occupancy.nu[x] * (ref.probs[x * na + a] - p[a]);
      const auto f = features.at(x, a);
      for (std::size_t j = 0; j < d; ++j) g[j] += w * f[j];
    }
  }
  return g;
}

double estimation_error_linear(const FiniteMdp& mdp, const Policy& expert, const ExpertDataset& data,
                               const Policy& pi, const FeatureMap& features, double b_theta) {
  const ExpertReference ref(mdp, expert);
  const Vector g = exact_feature_gap(ref, features, pi);
  Vector diff = feature_gap_estimate(data, features, pi);
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] -= g[j];
  return b_theta * norm2(diff);
}

double estimation_error_general(const FiniteMdp& mdp, const Policy& expert, const ExpertDataset& data,
                                const Policy& pi, const QClass& qclass) {
  if (qclass.is_linear()) {
    return estimation_error_linear(mdp, expert, data, pi, *qclass.features(), qclass.b_theta());
  }
  const ExpertReference ref(mdp, expert);
  const PairCounts counts(data);
  const Vector probs = pi.probability_table();
  double worst = 0.0;
  for (std::size_t m = 0; m < qclass.size(); ++m) {
    const auto o = objectives(ref, counts, probs, qclass.member_table(m), qclass.n_actions());
    worst = std::max(worst, std::abs(o.empirical - o.exact));
  }
  return worst;
}

double regret_bound(std::size_t n_actions, double gamma, double eta, std::size_t k_iters) {
  const double h = 1.0 - gamma;
  return std::log(static_cast<double>(n_actions)) / eta + eta * static_cast<double>(k_iters) / (2.0 * h * h);
}

RegretAudit regret_audit(const FiniteMdp& mdp, const Policy& expert, const std::vector<Policy>& policies,
                         const std::vector<QFunction>& qs, double eta) {
  if (!(eta > 0.0)) throw ValidationError("regret audit: eta must be positive");
  if (policies.size() != qs.size() || policies.empty()) {
    throw ValidationError("regret audit needs one Q per iterate and at least one iterate");
  }
  const double cap = 1.0 / (1.0 - mdp.gamma());
  for (std::size_t k = 0; k < qs.size(); ++k) {
    if (qs[k].sup_norm() > cap * (1.0 + 1e-12)) {
      throw ValidationError("regret audit precondition violated at k=" + std::to_string(k + 1) + ": ||Q_k||_inf = " +
                            format_real(qs[k].sup_norm()) + " exceeds 1/(1-gamma) = " + format_real(cap));
    }
  }
  const ExpertReference ref(mdp, expert);
  RegretAudit audit;
  for (std::size_t k = 0; k < qs.size(); ++k) audit.lhs += true_objective(ref, policies[k], qs[k]);
  audit.bound = regret_bound(mdp.n_actions(), mdp.gamma(), eta, qs.size());
  return audit;
}

DecompositionReport decomposition_report_linear(const FiniteMdp& mdp, const Policy& expert,
                                                const ExpertDataset& data, const FeatureMap& features,
                                                const SpoilRunRecord& record) {
  check_record(record, data, mdp.n_states(), mdp.n_actions());
  if (record.theta.size() != record.k_iters) throw ValidationError("run record is missing critic parameters");
  if (!(record.b_theta > 0.0)) throw ValidationError("run record needs a positive b_theta");
  const double cap = 1.0 / (1.0 - mdp.gamma());
  if (record.b_theta * features.b_phi() > cap * (1.0 + 1e-12)) {
    throw ValidationError("b_theta * b_phi exceeds 1/(1-gamma); the regret bound does not apply");
  }
  const ExpertReference ref(mdp, expert);
  const FeatureGapEstimator estimator(data, features);
  const std::size_t d = features.dim();

  std::vector<DecompositionRow> rows;
  rows.reserve(record.k_iters);
  Vector theta_bar(d, 0.0);
  Vector w(d);
  double cumulative = 0.0;
  double estimation_sum = 0.0;
  for (std::size_t k = 1; k <= record.k_iters; ++k) {
    const Vector& theta = record.theta[k - 1];
    if (theta.size() != d) throw ValidationError("critic parameter at k=" + std::to_string(k) + " has wrong dimension");
    for (std::size_t j = 0; j < d; ++j) w[j] = record.eta * theta_bar[j];
    const Policy pi = linear_softmax_policy(features, w);
    const Vector g_hat = estimator.gap(w);
    const double best = record.b_theta * norm2(g_hat);
    const double achieved = std::inner_product(theta.begin(), theta.end(), g_hat.begin(), 0.0);
    if (norm2(theta) > record.b_theta * (1.0 + 1e-12)) {
      throw ValidationError("critic at k=" + std::to_string(k) + " lies outside the ball of radius b_theta");
    }
    if (achieved < best - 1e-9) {
      throw ValidationError("critic at k=" + std::to_string(k) + " is not a best response: empirical objective " +
                            format_real(achieved) + " < maximum " + format_real(best));
    }
    const Vector g = exact_feature_gap(ref, features, pi);
    Vector diff = g_hat;
    for (std::size_t j = 0; j < d; ++j) diff[j] -= g[j];
    DecompositionRow row{};
    row.k = k;
    row.objective = std::inner_product(theta.begin(), theta.end(), g.begin(), 0.0);
    row.estimation = record.b_theta * norm2(diff);
    row.suboptimality = ref.value - expected_return(mdp, pi);
    cumulative += row.objective;
    estimation_sum += row.estimation;
    row.cumulative_regret = cumulative;
    row.regret_bound = regret_bound(mdp.n_actions(), mdp.gamma(), record.eta, k);
    rows.push_back(row);
    for (std::size_t j = 0; j < d; ++j) theta_bar[j] += theta[j];
  }
  return finish_report(std::move(rows), estimation_sum);
}

DecompositionReport decomposition_report_general(const FiniteMdp& mdp, const Policy& expert,
                                                 const ExpertDataset& data, const QClass& qclass,
                                                 const SpoilRunRecord& record) {
  if (qclass.is_linear()) {
    if (!qclass.features()) throw ValidationError("linear class without features");
    SpoilRunRecord copy = record;
    copy.b_theta = qclass.b_theta();
    return decomposition_report_linear(mdp, expert, data, *qclass.features(), copy);
  }
  check_record(record, data, mdp.n_states(), mdp.n_actions());
  if (qclass.n_states() != mdp.n_states() || qclass.n_actions() != mdp.n_actions()) {
    throw ValidationError("critic class does not match the environment");
  }
  if (record.critic_index.size() != record.k_iters) throw ValidationError("run record is missing critic indices");
  const ExpertReference ref(mdp, expert);
  const PairCounts counts(data);
  const std::size_t na = mdp.n_actions();

  std::vector<DecompositionRow> rows;
  rows.reserve(record.k_iters);
  Vector logits(mdp.n_pairs(), 0.0);
  double cumulative = 0.0;
  double estimation_sum = 0.0;
  for (std::size_t k = 1; k <= record.k_iters; ++k) {
    const std::size_t chosen = record.critic_index[k - 1];
    if (chosen >= qclass.size()) throw ValidationError("critic index at k=" + std::to_string(k) + " is out of range");
    const Policy pi(mdp.n_states(), na, logits);
    const Vector probs = pi.probability_table();
    double best = -std::numeric_limits<double>::infinity();
    double delta = 0.0;
    ObjectivePair at_chosen{};
    for (std::size_t m = 0; m < qclass.size(); ++m) {
      const auto o = objectives(ref, counts, probs, qclass.member_table(m), na);
      best = std::max(best, o.empirical);
      delta = std::max(delta, std::abs(o.empirical - o.exact));
      if (m == chosen) at_chosen = o;
    }
    if (at_chosen.empirical < best - 1e-9) {
      throw ValidationError("critic at k=" + std::to_string(k) + " is not a best response: empirical objective " +
                            format_real(at_chosen.empirical) + " < maximum " + format_real(best));
    }
    DecompositionRow row{};
    row.k = k;
    row.objective = at_chosen.exact;
    row.estimation = delta;
    row.suboptimality = ref.value - expected_return(mdp, pi);
    cumulative += row.objective;
    estimation_sum += row.estimation;
    row.cumulative_regret = cumulative;
    row.regret_bound = regret_bound(na, mdp.gamma(), record.eta, k);
    rows.push_back(row);
    const auto t = qclass.member_table(chosen);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += record.eta * t[i];
  }
  return finish_report(std::move(rows), estimation_sum);
}

void write_decomposition_csv(std::ostream& out, const DecompositionReport& report) {
  out << "k,L_k,Delta_k,cum_regret,bound\n";
  for (const auto& r : report.rows) {
    out << r.k << ',' << format_real(r.objective) << ',' << format_real(r.estimation) << ','
        << format_real(r.cumulative_regret) << ',' << format_real(r.regret_bound) << '\n';
  }
}

void write_decomposition_summary(std::ostream& out, const DecompositionReport& report) {
  out << "suboptimality,regret_term,estimation_term,holds\n"
      << format_real(report.suboptimality) << ',' << format_real(report.regret_term) << ','
      << format_real(report.estimation_term) << ',' << (report.bound_satisfied ? "true" : "false") << '\n';
}

}  // namespace spoil
