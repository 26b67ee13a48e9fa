#include "spoil/spoil_general.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <ostream>

#include "spoil/error.hpp"
#include "spoil/io.hpp"
#include "spoil/text.hpp"

namespace spoil {

QClass QClass::linear_ball(std::shared_ptr<const FeatureMap> features, double b_theta) {
  if (!features) throw ValidationError("linear ball needs a feature map");
  if (!(b_theta > 0.0)) throw ValidationError("linear ball radius must be positive");
  QClass c;
  c.kind_ = Kind::linear_ball;
  c.n_states_ = features->n_states();
  c.n_actions_ = features->n_actions();
  c.features_ = std::move(features);
  c.b_theta_ = b_theta;
  return c;
}

QClass QClass::finite_set(const std::vector<QFunction>& members, double gamma) {
  if (members.empty()) throw ValidationError("finite critic class must be nonempty");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  const double bound = 1.0 / (1.0 - gamma);
  QClass c;
  c.kind_ = Kind::finite_set;
  c.n_states_ = members.front().n_states();
  c.n_actions_ = members.front().n_actions();
  for (const auto& m : members) {
    if (m.n_states() != c.n_states_ || m.n_actions() != c.n_actions_) {
      throw ValidationError("critic class members disagree on the state-action space");
    }
    Vector t = m.to_table();
    for (double& v : t) {
      const double clipped = std::clamp(v, -bound, bound);
      if (clipped != v) c.clipped_ = true;
      v = clipped;
    }
    c.tables_.push_back(std::move(t));
  }
  return c;
}

QClass QClass::policy_induced(const FiniteMdp& mdp, const std::vector<Policy>& policies) {
  if (policies.empty()) throw ValidationError("policy-induced critic class must be nonempty");
  std::vector<QFunction> members;
  members.reserve(policies.size());
  for (const auto& pi : policies) members.push_back(evaluate_q(mdp, pi, 1e-12));
  QClass c = finite_set(members, mdp.gamma());
  c.kind_ = Kind::policy_induced;
  return c;
}

QFunction QClass::member(std::size_t i) const {
  if (is_linear()) throw ValidationError("the linear ball has no enumerable members");
  return QFunction::tabular(n_states_, n_actions_, tables_.at(i));
}

double empirical_objective(const ExpertDataset& data, const Policy& pi, const QFunction& q) {
  const PairCounts counts(data);
  const std::size_t na = data.n_actions;
  Vector p(na);
  double total = 0.0;
  for (std::size_t x = 0; x < counts.n_states; ++x) {
    if (counts.state[x] == 0) continue;
    pi.probabilities(x, p);
    for (std::size_t a = 0; a < na; ++a) {
      const double w = static_cast<double>(counts.pair[x * na + a]) - static_cast<double>(counts.state[x]) * p[a];
      total += w * q(x, a);
    }
  }
  return total / static_cast<double>(counts.total);
}

namespace {

// Empirical objective for every finite-class member, from counts.
class FiniteScanner {
 public:
  FiniteScanner(const ExpertDataset& data, const QClass& qclass) : qclass_(qclass), counts_(data) {
    const std::size_t na = qclass.n_actions();
    const double inv_tau = 1.0 / static_cast<double>(counts_.total);
    for (std::size_t x = 0; x < counts_.n_states; ++x) {
      if (counts_.state[x] > 0) states_.push_back(x);
    }
    expert_term_.resize(qclass.size(), 0.0);
    for (std::size_t m = 0; m < qclass.size(); ++m) {
      const auto t = qclass.member_table(m);
      double s = 0.0;
      for (std::size_t x : states_) {
        for (std::size_t a = 0; a < na; ++a) s += static_cast<double>(counts_.pair[x * na + a]) * t[x * na + a];
      }
      expert_term_[m] = s * inv_tau;
    }
  }

  /// Values for all members under the given probability table.
  Vector values(std::span<const double> probs) const {
    const std::size_t na = qclass_.n_actions();
    const double inv_tau = 1.0 / static_cast<double>(counts_.total);
    Vector out(qclass_.size());
    for (std::size_t m = 0; m < qclass_.size(); ++m) {
      const auto t = qclass_.member_table(m);
      double s = 0.0;
      for (std::size_t x : states_) {
        double inner = 0.0;
        for (std::size_t a = 0; a < na; ++a) inner += probs[x * na + a] * t[x * na + a];
        s += static_cast<double>(counts_.state[x]) * inner;
      }
      out[m] = expert_term_[m] - s * inv_tau;
    }
    return out;
  }

  const std::vector<std::size_t>& states() const { return states_; }

 private:
  const QClass& qclass_;
  PairCounts counts_;
  std::vector<std::size_t> states_;
  Vector expert_term_;
};

std::size_t first_argmax(const Vector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

void check_space(const ExpertDataset& data, std::size_t n_states, std::size_t n_actions) {
  if (data.n_states != n_states || data.n_actions != n_actions) {
    throw ValidationError("dataset and critic class disagree on the state-action space");
  }
  data.validate();
}

}  // namespace

BestResponse critic_best_response(const ExpertDataset& data, const Policy& pi, const QClass& qclass) {
  check_space(data, qclass.n_states(), qclass.n_actions());
  if (qclass.is_linear()) {
    const Vector g = feature_gap_estimate(data, *qclass.features(), pi);
    Vector theta = critic_best_response_linear(g, qclass.b_theta());
    const double value = std::inner_product(theta.begin(), theta.end(), g.begin(), 0.0);
    return {QFunction::linear(qclass.features(), std::move(theta)), 0, value};
  }
  const FiniteScanner scanner(data, qclass);
  const Vector values = scanner.values(pi.probability_table());
  const std::size_t best = first_argmax(values);
  return {qclass.member(best), best, values[best]};
}

std::pair<Policy, SpoilRunRecord> run_spoil_general(const ExpertDataset& data, const QClass& qclass,
                                                    std::size_t n_states, std::size_t n_actions,
                                                    const SpoilConfig& cfg) {
  if (!(cfg.k_iters >= 1)) throw ValidationError("spoil: k_iters must be at least 1");
  if (!(cfg.eta > 0.0)) throw ValidationError("spoil: eta must be positive");
  if (qclass.n_states() != n_states || qclass.n_actions() != n_actions) {
    throw ValidationError("critic class does not match the requested state-action space");
  }
  check_space(data, n_states, n_actions);

  SpoilRunRecord record;
  record.k_iters = cfg.k_iters;
  record.eta = cfg.eta;
  record.b_theta = qclass.is_linear() ? qclass.b_theta() : 0.0;

  const std::size_t na = n_actions;
  Vector logits(n_states * na, 0.0);  // eta * sum_{j<k} Q_j
  Vector probs(n_states * na);

  std::optional<FeatureGapEstimator> gap;
  std::optional<FiniteScanner> scanner;
  std::vector<std::size_t> visited;
  if (qclass.is_linear()) {
    gap.emplace(data, *qclass.features());
  } else {
    scanner.emplace(data, qclass);
    visited = scanner->states();
  }

  for (std::size_t k = 1; k <= cfg.k_iters; ++k) {
    if (qclass.is_linear()) {
      const Vector g_hat = gap->gap_for_logits(logits);
      Vector theta = critic_best_response_linear(g_hat, qclass.b_theta());
      const double g_norm = std::sqrt(std::inner_product(g_hat.begin(), g_hat.end(), g_hat.begin(), 0.0));
      if (!std::isfinite(g_norm)) throw NumericalError("feature gap became non-finite at iteration " + std::to_string(k));
      const auto& f = *qclass.features();
      for (std::size_t x = 0; x < n_states; ++x) {
        for (std::size_t a = 0; a < na; ++a) logits[x * na + a] += cfg.eta * f.dot(x, a, theta);
      }
      if (cfg.record_diagnostics) {
        record.g_hat_norm.push_back(g_norm);
        record.objective.push_back(std::inner_product(theta.begin(), theta.end(), g_hat.begin(), 0.0));
      }
      record.theta.push_back(std::move(theta));
      continue;
    }
    // Only visited states enter the empirical objective.
    for (std::size_t x : visited) {
      softmax(std::span<const double>(logits).subspan(x * na, na), std::span<double>(probs).subspan(x * na, na));
    }
    const Vector values = scanner->values(probs);
    const std::size_t best = first_argmax(values);
    const auto t = qclass.member_table(best);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += cfg.eta * t[i];
    record.critic_index.push_back(best);
    if (cfg.record_diagnostics) record.objective.push_back(values[best]);
  }

  Rng rng(cfg.output_seed);
  record.selected = 1 + static_cast<std::size_t>(rng.below(cfg.k_iters));
  Policy out = spoil_general_iterate(qclass, record, record.selected);
  return {std::move(out), std::move(record)};
}

QFunction spoil_general_critic(const QClass& qclass, const SpoilRunRecord& record, std::size_t k) {
  if (k < 1 || k > record.k_iters) throw ValidationError("critic index out of range");
  if (qclass.is_linear()) return QFunction::linear(qclass.features(), record.theta.at(k - 1));
  return qclass.member(record.critic_index.at(k - 1));
}

Policy spoil_general_iterate(const QClass& qclass, const SpoilRunRecord& record, std::size_t k) {
  if (k < 1 || k > record.k_iters) throw ValidationError("iterate index out of range");
  const std::size_t na = qclass.n_actions();
  Vector logits(qclass.n_states() * na, 0.0);
  for (std::size_t j = 1; j < k; ++j) {
    if (qclass.is_linear()) {
      const auto& f = *qclass.features();
      for (std::size_t x = 0; x < qclass.n_states(); ++x) {
        for (std::size_t a = 0; a < na; ++a) logits[x * na + a] += record.eta * f.dot(x, a, record.theta[j - 1]);
      }
    } else {
      const auto t = qclass.member_table(record.critic_index[j - 1]);
      for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += record.eta * t[i];
    }
  }
  return Policy(qclass.n_states(), na, std::move(logits));
}

Schedule general_schedule(std::size_t n_actions, double gamma, double epsilon) {
  return linear_schedule(n_actions, gamma, epsilon);
}

void write_qclass(std::ostream& out, const QClass& qclass, double gamma) {
  if (qclass.is_linear()) throw ValidationError("only finite critic classes can be written");
  out << "qclass " << qclass.size() << ' ' << qclass.n_states() << ' ' << qclass.n_actions() << ' '
      << format_real(gamma) << '\n';
  for (std::size_t m = 0; m < qclass.size(); ++m) {
    const auto t = qclass.member_table(m);
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << format_real(t[i]);
    out << '\n';
  }
}

QClass read_qclass(std::istream& in) {
  LineReader reader(in);
  const auto header = reader.expect_line("qclass header");
  if (header.size() != 5 || header[0] != "qclass") {
    throw ParseError("expected `qclass n_members n_states n_actions gamma`", reader.line_number());
  }
  const std::size_t n_members = reader.parse_count(header[1]);
  const std::size_t n = reader.parse_count(header[2]);
  const std::size_t na = reader.parse_count(header[3]);
  const double gamma = reader.parse_real(header[4]);
  if (n_members == 0) throw ValidationError("line 1: critic class must be nonempty");
  std::vector<QFunction> members;
  for (std::size_t m = 0; m < n_members; ++m) {
    const auto tok = reader.expect_line("critic member");
    if (tok.size() != n * na) {
      throw ParseError("expected " + std::to_string(n * na) + " reals per member", reader.line_number());
    }
    Vector t(n * na);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = reader.parse_real(tok[i]);
    members.push_back(QFunction::tabular(n, na, std::move(t)));
  }
  return QClass::finite_set(members, gamma);
}

}  // namespace spoil
