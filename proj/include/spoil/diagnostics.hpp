#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spoil/dataset.hpp"
#include "spoil/mdp.hpp"
#include "spoil/spoil_general.hpp"
#include "spoil/spoil_linear.hpp"

namespace spoil {

/// Exact expert occupancy, computed once and reused by the diagnostics.
struct ExpertReference {
  Occupancy occupancy;
  Vector probs;        ///< pi_E(a|x), row-major
  double value = 0.0;  ///< rho of the expert

  ExpertReference(const FiniteMdp& mdp, const Policy& expert);
};

/// L(pi; Q) = E_{mu_E}[Q(X,A)] - E_{nu_E}[Q(X, pi)].
double true_objective(const FiniteMdp& mdp, const Policy& expert, const Policy& pi, const QFunction& q);
double true_objective(const ExpertReference& ref, const Policy& pi, const QFunction& q);

/// g = E_{mu_E}[phi(X,A)] - E_{nu_E}[phi(X, pi)].
Vector exact_feature_gap(const ExpertReference& ref, const FeatureMap& features, const Policy& pi);

/// Delta(pi) for the linear ball: b_theta * ||g - g_hat||.
double estimation_error_linear(const FiniteMdp& mdp, const Policy& expert, const ExpertDataset& data,
                               const Policy& pi, const FeatureMap& features, double b_theta);

/// Delta(pi) = sup_Q |L_hat(pi; Q) - L(pi; Q)| by scan (finite) or closed form (ball).
double estimation_error_general(const FiniteMdp& mdp, const Policy& expert, const ExpertDataset& data,
                                const Policy& pi, const QClass& qclass);

struct RegretAudit {
  double lhs = 0.0;    ///< sum_k L(pi_k; Q_k)
  double bound = 0.0;  ///< ln A / eta + eta K / (2 (1-gamma)^2)
  bool holds() const { return lhs <= bound; }
};

/// ln A / eta + eta K / (2 (1-gamma)^2).
double regret_bound(std::size_t n_actions, double gamma, double eta, std::size_t k_iters);

/// Throws ValidationError naming k when some ||Q_k||_inf exceeds 1/(1-gamma).
RegretAudit regret_audit(const FiniteMdp& mdp, const Policy& expert, const std::vector<Policy>& policies,
                         const std::vector<QFunction>& qs, double eta);

struct DecompositionRow {
  std::size_t k;
  double objective;        ///< L(pi_k; Q_k)
  double estimation;       ///< Delta(pi_k)
  double suboptimality;    ///< rho_E - rho(pi_k)
  double cumulative_regret;
  double regret_bound;     ///< bound on the cumulative regret after k iterations
};

struct DecompositionReport {
  double suboptimality = 0.0;    ///< (1/K) sum_k (rho_E - rho(pi_k))
  double regret_term = 0.0;      ///< (1/K) sum_k L(pi_k; Q_k)
  double estimation_term = 0.0;  ///< (2/K) sum_k Delta(pi_k)
  double tolerance = 1e-9;
  bool bound_satisfied = false;
  std::vector<DecompositionRow> rows;
};

/// Audits a linear run. Throws ValidationError when some Q_k is not a best
/// response to the dataset at pi_k (tampered trace) or lies outside the ball.
DecompositionReport decomposition_report_linear(const FiniteMdp& mdp, const Policy& expert,
                                                const ExpertDataset& data, const FeatureMap& features,
                                                const SpoilRunRecord& record);
/// Same audit for a general run over `qclass`.
DecompositionReport decomposition_report_general(const FiniteMdp& mdp, const Policy& expert,
                                                 const ExpertDataset& data, const QClass& qclass,
                                                 const SpoilRunRecord& record);

/// CSV `k,L_k,Delta_k,cum_regret,bound`.
void write_decomposition_csv(std::ostream& out, const DecompositionReport& report);
/// `suboptimality,regret_term,estimation_term,holds` header plus one row.
void write_decomposition_summary(std::ostream& out, const DecompositionReport& report);

}  // namespace spoil
