#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "spoil/rng.hpp"

namespace spoil {

using Vector = std::vector<double>;

/// Finite discounted MDP (X, A, r, P, gamma, nu0).
///
/// Transitions are held either densely as an |X|*A*|X| tensor or in factored
/// form P(.|x,a) = sum_j w_j(x,a) m_j, where each w(x,a) and each anchor m_j is
/// a probability vector. The factored form never materializes full rows unless
/// asked to, which keeps large instances within memory.
class FiniteMdp {
 public:
  struct Factored {
    std::size_t rank = 0;
    Vector weights;  ///< [(x*A + a)*rank + j]
    Vector anchors;  ///< [j*|X| + x']
  };

  /// `transition` is indexed [(x*A + a)*|X| + x'].
  static FiniteMdp dense(std::size_t n_states, std::size_t n_actions, double gamma, Vector nu0,
                         Vector reward, Vector transition);
  static FiniteMdp factored(std::size_t n_states, std::size_t n_actions, double gamma, Vector nu0,
                            Vector reward, Factored transition);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_pairs() const { return n_states_ * n_actions_; }
  std::size_t index(std::size_t x, std::size_t a) const { return x * n_actions_ + a; }
  double gamma() const { return gamma_; }
  std::span<const double> nu0() const { return nu0_; }
  std::span<const double> rewards() const { return reward_; }
  double reward(std::size_t x, std::size_t a) const { return reward_[index(x, a)]; }

  bool is_factored() const { return factored_.rank > 0; }
  const Factored& factors() const { return factored_; }

  /// Writes P(.|x,a) into `out` (size |X|).
  void transition_row(std::size_t x, std::size_t a, std::span<double> out) const;

  /// sum_{x'} P(x'|x,a) v(x').
  double expected_next(std::size_t x, std::size_t a, std::span<const double> v) const;

  std::size_t sample_next(std::size_t x, std::size_t a, Rng& rng) const;

 private:
  FiniteMdp() = default;
  void validate_common() const;

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  double gamma_ = 0.0;
  Vector nu0_;
  Vector reward_;
  Vector dense_;
  Factored factored_;
};

/// Per state-action feature vectors phi(x,a) in R^d with ||phi(x,a)|| <= b_phi.
class FeatureMap {
 public:
  /// `phi` is indexed [(x*A + a)*dim + j]. When `b_phi` is not positive it is
  /// set to the largest feature norm.
  FeatureMap(std::size_t n_states, std::size_t n_actions, std::size_t dim, Vector phi,
             double b_phi = 0.0);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t dim() const { return dim_; }
  double b_phi() const { return b_phi_; }
  std::span<const double> at(std::size_t x, std::size_t a) const {
    return {phi_.data() + (x * n_actions_ + a) * dim_, dim_};
  }
  std::span<const double> data() const { return phi_; }

  /// <phi(x,a), theta>.
  double dot(std::size_t x, std::size_t a, std::span<const double> theta) const;

  /// Row-major (|X|*A) x d design matrix.
  Eigen::MatrixXd design_matrix() const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t dim_;
  Vector phi_;
  double b_phi_;
};

/// Numerically stable softmax: exp(z - max z) / sum.
void softmax(std::span<const double> z, std::span<double> out);
Vector softmax(std::span<const double> z);

/// Stationary policy pi(a|x) = softmax(logits[x])[a].
class Policy {
 public:
  Policy(std::size_t n_states, std::size_t n_actions, Vector logits);

  static Policy uniform(std::size_t n_states, std::size_t n_actions);
  /// Strictly positive probability table (row-major) to logits via log.
  static Policy from_probabilities(std::size_t n_states, std::size_t n_actions,
                                   std::span<const double> probs);
  /// Near-deterministic policy choosing actions[x]; the chosen logit exceeds
  /// the others by `logit_gap`, so every probability stays positive.
  static Policy greedy(std::size_t n_states, std::size_t n_actions,
                       std::span<const std::size_t> actions, double logit_gap = 60.0);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::span<const double> logits() const { return logits_; }
  std::span<const double> logits(std::size_t x) const {
    return {logits_.data() + x * n_actions_, n_actions_};
  }

  void probabilities(std::size_t x, std::span<double> out) const;
  Vector probabilities(std::size_t x) const;
  /// Full row-major table of pi(a|x).
  Vector probability_table() const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Vector logits_;
};

/// Action-value function: a tabular table or a linear form <phi(x,a), theta>.
class QFunction {
 public:
  struct Tabular {
    std::size_t n_states;
    std::size_t n_actions;
    Vector values;
  };
  struct Linear {
    std::shared_ptr<const FeatureMap> features;
    Vector theta;
  };

  static QFunction tabular(std::size_t n_states, std::size_t n_actions, Vector values);
  static QFunction linear(std::shared_ptr<const FeatureMap> features, Vector theta);
  static QFunction zero(std::size_t n_states, std::size_t n_actions);

  bool is_linear() const { return std::holds_alternative<Linear>(repr_); }
  std::size_t n_states() const;
  std::size_t n_actions() const;

  double operator()(std::size_t x, std::size_t a) const;
  /// Row-major table of values over all state-action pairs.
  Vector to_table() const;
  double sup_norm() const;

  const Tabular& as_tabular() const { return std::get<Tabular>(repr_); }
  const Linear& as_linear() const { return std::get<Linear>(repr_); }

 private:
  explicit QFunction(std::variant<Tabular, Linear> repr) : repr_(std::move(repr)) {}
  std::variant<Tabular, Linear> repr_;
};

struct EvalOptions {
  /// Above this many state-action pairs evaluation uses value iteration
  /// instead of a direct solve.
  std::size_t direct_solve_limit = 20000;
  std::size_t max_sweeps = 1000000;
};

/// r(x,a) + gamma sum_{x'} P(x'|x,a) v(x') for every pair, row-major.
Vector bellman_backup(const FiniteMdp& mdp, std::span<const double> v);

/// |X| x |X| state transition matrix under a probability table.
Eigen::MatrixXd policy_kernel(const FiniteMdp& mdp, std::span<const double> probs);

/// Exact Q^pi with sup-norm Bellman residual <= tol.
QFunction evaluate_q(const FiniteMdp& mdp, const Policy& pi, double tol = 1e-10,
                     const EvalOptions& opts = {});

/// sup_{x,a} |Q(x,a) - r(x,a) - gamma sum P(x'|x,a) Q(x',pi)|.
double bellman_residual(const FiniteMdp& mdp, const Policy& pi, const QFunction& q);

/// V(x) = sum_a pi(a|x) Q(x,a).
Vector state_value(const QFunction& q, const Policy& pi);

struct Occupancy {
  Vector nu;  ///< state occupancy, size |X|
  Vector mu;  ///< state-action occupancy, row-major
};

/// Discounted normalized occupancy measures from the flow conditions.
Occupancy occupancy_measures(const FiniteMdp& mdp, const Policy& pi);

/// Largest per-state violation of
/// nu(x) = gamma sum P(x|x',a') mu(x',a') + (1-gamma) nu0(x).
double flow_residual(const FiniteMdp& mdp, const Occupancy& occ);

/// Normalized expected return rho = sum mu(x,a) r(x,a).
double expected_return(const FiniteMdp& mdp, const Policy& pi);

struct PdlGap {
  double lhs;  ///< rho^{pi'} - rho^pi
  double rhs;  ///< E_{mu^{pi'}}[Q^pi - V^pi]
};

PdlGap pdl_gap(const FiniteMdp& mdp, const Policy& pi, const Policy& pi_prime);

/// Exponential-weights actor step: logits += eta * Q.
Policy policy_update_mw(const Policy& pi, const QFunction& q, double eta);

/// Linear-softmax policy with logits <phi(x,a), theta>.
Policy linear_softmax_policy(const FeatureMap& features, std::span<const double> theta);

/// Largest per-state total variation distance between two policies.
double max_tv_distance(const Policy& p, const Policy& q);

}  // namespace spoil
