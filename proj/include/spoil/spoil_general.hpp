#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "spoil/dataset.hpp"
#include "spoil/mdp.hpp"
#include "spoil/spoil_linear.hpp"

namespace spoil {

/// Critic class for the general algorithm.
///
///  - LinearBall: {<phi, theta> : ||theta|| <= b_theta}, best response in
///    closed form.
///  - FiniteSet: explicit tabular members clipped to sup-norm 1/(1-gamma).
///  - PolicyInduced: exact Q^pi of a list of policies on a given MDP.
class QClass {
 public:
  enum class Kind { linear_ball, finite_set, policy_induced };

  static QClass linear_ball(std::shared_ptr<const FeatureMap> features, double b_theta);
  /// Members are clipped entrywise to [-1/(1-gamma), 1/(1-gamma)];
  /// `was_clipped()` reports whether any entry moved.
  static QClass finite_set(const std::vector<QFunction>& members, double gamma);
  static QClass policy_induced(const FiniteMdp& mdp, const std::vector<Policy>& policies);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::linear_ball; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  /// Number of members; 0 for the linear ball.
  std::size_t size() const { return tables_.size(); }
  QFunction member(std::size_t i) const;
  std::span<const double> member_table(std::size_t i) const { return tables_[i]; }
  bool was_clipped() const { return clipped_; }
  double b_theta() const { return b_theta_; }
  const std::shared_ptr<const FeatureMap>& features() const { return features_; }

 private:
  QClass() = default;

  Kind kind_ = Kind::finite_set;
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<Vector> tables_;
  std::shared_ptr<const FeatureMap> features_;
  double b_theta_ = 0.0;
  bool clipped_ = false;
};

/// L_hat(pi; Q) = tau^-1 sum_i (Q(X_i, A_i) - sum_a pi(a|X_i) Q(X_i, a)).
double empirical_objective(const ExpertDataset& data, const Policy& pi, const QFunction& q);

struct BestResponse {
  QFunction q;
  std::size_t index;  ///< member index; 0 for the linear ball
  double value;       ///< empirical objective at q
};

/// Maximizer of the empirical objective over the class; ties go to the
/// lowest member index.
BestResponse critic_best_response(const ExpertDataset& data, const Policy& pi, const QClass& qclass);

/// Algorithm with a general critic class: pi_1 uniform, Q_0 = 0, then for
/// k = 1..K the exponential-weights actor followed by the best-response
/// critic. The actor state is a cumulative tabular logit table.
std::pair<Policy, SpoilRunRecord> run_spoil_general(const ExpertDataset& data, const QClass& qclass,
                                                    std::size_t n_states, std::size_t n_actions,
                                                    const SpoilConfig& cfg);

/// Q_k of a general run.
QFunction spoil_general_critic(const QClass& qclass, const SpoilRunRecord& record, std::size_t k);
/// pi_k of a general run, rebuilt from Q_1..Q_{k-1}.
Policy spoil_general_iterate(const QClass& qclass, const SpoilRunRecord& record, std::size_t k);

/// Same formulas as linear_schedule.
Schedule general_schedule(std::size_t n_actions, double gamma, double epsilon);

// Finite class file: header `qclass n_members n_states n_actions gamma`, then
// one line of |X|*A reals per member in row-major (x,a) order.
void write_qclass(std::ostream& out, const QClass& qclass, double gamma);
QClass read_qclass(std::istream& in);

}  // namespace spoil
