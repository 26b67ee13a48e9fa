#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "spoil/mdp.hpp"

namespace spoil {

enum class FeatureKind { simplex, one_hot };

/// Parameters of a generated linear MDP.
struct EnvSpec {
  std::size_t n_states = 50;
  std::size_t n_actions = 20;
  std::size_t dim = 7;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  double reward_sparsity = 0.0;  ///< fraction of reward coordinates set to zero
  FeatureKind features = FeatureKind::simplex;
  /// Transition tensors with more than this many entries (|X|^2 A) are stored
  /// in factored form.
  double dense_limit = 5e7;

  void validate() const;
};

/// An MDP together with the features that realize its action values.
struct Environment {
  FiniteMdp mdp;
  std::shared_ptr<const FeatureMap> features;
};

/// Random linear MDP: P(.|x,a) = sum_j phi_j(x,a) m_j and r = <phi, theta_r>,
/// with phi(x,a) on the d-simplex and Dirichlet(1) anchors m_j. With one-hot
/// features (dim = |X| A) this is an arbitrary tabular MDP.
Environment gen_linear_mdp(const EnvSpec& spec);

enum class ExpertKind { soft_optimal, perturbed_table, quadratic_softmax_single_state };

std::string to_string(ExpertKind kind);
ExpertKind parse_expert_kind(const std::string& name);

struct ExpertSpec {
  ExpertKind kind = ExpertKind::soft_optimal;
  double temperature = 0.05;
  double perturb_strength = 5.0;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  std::size_t max_iters = 100000;

  void validate() const;
  /// Short human-readable descriptor, e.g. `soft_optimal(t=0.05)`.
  std::string describe() const;
};

/// Softmax of soft-optimal action values at the given temperature, obtained by
/// soft value iteration. Throws NumericalError carrying the last residual when
/// max_iters is exhausted.
Policy soft_optimal_policy(const FiniteMdp& mdp, double temperature, double tol = 1e-10,
                           std::size_t max_iters = 100000);

/// Base logits plus i.i.d. N(0, strength^2) noise per state-action pair.
Policy perturbed_expert(const Policy& base, double strength, std::uint64_t seed);

/// Builds the expert described by `spec` on `env` (soft_optimal and
/// perturbed_table kinds; the perturbation is applied to the soft-optimal policy).
Policy make_expert(const Environment& env, const ExpertSpec& spec);

/// Single-state instance with scalar features phi(a) = a - (A+1)/2 for
/// a = 1..A and the expert pi_E(a) proportional to exp(phi(a)^2). The MDP
/// reward is zero; the true reward slope is left to evaluation code.
struct QuadraticInstance {
  Environment env;
  Policy expert;
};
QuadraticInstance quadratic_softmax_expert(std::size_t n_actions);

/// Largest absolute residual of the best least-squares fit of the policy's
/// logits by <phi(x,a), theta> + c(x). Zero iff the policy is linear-softmax.
double softmax_fit_residual(const Policy& pi, const FeatureMap& features);

struct RealizabilityReport {
  double max_residual = 0.0;    ///< max over probes of sup |Q^pi - phi theta|
  double max_theta_norm = 0.0;  ///< max over probes of ||theta|| (minimum-norm fit)
};

/// Fits theta to Q^pi for random probe policies and reports the worst fit.
RealizabilityReport realizability_report(const FiniteMdp& mdp, const FeatureMap& features,
                                         std::size_t n_probe_policies, std::uint64_t seed);

double realizability_residual(const FiniteMdp& mdp, const FeatureMap& features,
                              std::size_t n_probe_policies, std::uint64_t seed);

}  // namespace spoil
