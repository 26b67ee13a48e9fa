#include "spoil/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "spoil/error.hpp"

namespace spoil {

namespace {

constexpr double kSumTol = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTol) {
    throw ValidationError(what + " sums to " + std::to_string(total) + ", expected 1");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteMdp

void FiniteMdp::validate_common() const {
  if (n_states_ == 0 || n_actions_ == 0) throw ValidationError("MDP needs at least one state and action");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  if (nu0_.size() != n_states_) throw ValidationError("nu0 has wrong length");
  check_distribution(nu0_, "nu0");
  if (reward_.size() != n_pairs()) throw ValidationError("reward table has wrong size");
  for (double r : reward_) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("reward entries must lie in [0, 1]");
  }
}

FiniteMdp FiniteMdp::dense(std::size_t n_states, std::size_t n_actions, double gamma, Vector nu0,
                           Vector reward, Vector transition) {
  FiniteMdp m;
  m.n_states_ = n_states;
  m.n_actions_ = n_actions;
  m.gamma_ = gamma;
  m.nu0_ = std::move(nu0);
  m.reward_ = std::move(reward);
  m.validate_common();
  if (transition.size() != n_states * n_actions * n_states) {
    throw ValidationError("transition tensor has wrong size");
  }
  for (std::size_t i = 0; i < n_states * n_actions; ++i) {
    check_distribution(std::span<const double>(transition).subspan(i * n_states, n_states),
                       "transition row (" + std::to_string(i / n_actions) + "," +
                           std::to_string(i % n_actions) + ")");
  }
  m.dense_ = std::move(transition);
  return m;
}

FiniteMdp FiniteMdp::factored(std::size_t n_states, std::size_t n_actions, double gamma,
                              Vector nu0, Vector reward, Factored transition) {
  FiniteMdp m;
  m.n_states_ = n_states;
  m.n_actions_ = n_actions;
  m.gamma_ = gamma;
  m.nu0_ = std::move(nu0);
  m.reward_ = std::move(reward);
  m.validate_common();
  const std::size_t r = transition.rank;
  if (r == 0) throw ValidationError("factored transition needs rank >= 1");
  if (transition.weights.size() != n_states * n_actions * r ||
      transition.anchors.size() != r * n_states) {
    throw ValidationError("factored transition has wrong size");
  }
  for (std::size_t i = 0; i < n_states * n_actions; ++i) {
    check_distribution(std::span<const double>(transition.weights).subspan(i * r, r),
                       "transition weights");
  }
  for (std::size_t j = 0; j < r; ++j) {
    check_distribution(std::span<const double>(transition.anchors).subspan(j * n_states, n_states),
                       "anchor distribution");
  }
  m.factored_ = std::move(transition);
  return m;
}

void FiniteMdp::transition_row(std::size_t x, std::size_t a, std::span<double> out) const {
  const std::size_t n = n_states_;
  if (!is_factored()) {
    const double* row = dense_.data() + index(x, a) * n;
    std::copy(row, row + n, out.begin());
    return;
  }
  const std::size_t r = factored_.rank;
  const double* w = factored_.weights.data() + index(x, a) * r;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    const double* m = factored_.anchors.data() + j * n;
    for (std::size_t y = 0; y < n; ++y) out[y] += w[j] * m[y];
  }
}

double FiniteMdp::expected_next(std::size_t x, std::size_t a, std::span<const double> v) const {
  const std::size_t n = n_states_;
  if (!is_factored()) {
    const double* row = dense_.data() + index(x, a) * n;
    return std::inner_product(row, row + n, v.begin(), 0.0);
  }
  const std::size_t r = factored_.rank;
  const double* w = factored_.weights.data() + index(x, a) * r;
  double total = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    const double* m = factored_.anchors.data() + j * n;
    total += w[j] * std::inner_product(m, m + n, v.begin(), 0.0);
  }
  return total;
}

std::size_t FiniteMdp::sample_next(std::size_t x, std::size_t a, Rng& rng) const {
  const std::size_t n = n_states_;
  if (!is_factored()) {
    return rng.categorical({dense_.data() + index(x, a) * n, n});
  }
  const std::size_t r = factored_.rank;
  const std::size_t j = rng.categorical({factored_.weights.data() + index(x, a) * r, r});
  return rng.categorical({factored_.anchors.data() + j * n, n});
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(std::size_t n_states, std::size_t n_actions, std::size_t dim, Vector phi,
                       double b_phi)
    : n_states_(n_states), n_actions_(n_actions), dim_(dim), phi_(std::move(phi)), b_phi_(b_phi) {
  if (n_states == 0 || n_actions == 0 || dim == 0) throw ValidationError("feature map dimensions must be positive");
  if (phi_.size() != n_states * n_actions * dim) throw ValidationError("feature table has wrong size");
  if (!all_finite(phi_)) throw ValidationError("feature table has non-finite entries");
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n_states * n_actions; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) sq += phi_[i * dim + j] * phi_[i * dim + j];
    max_norm = std::max(max_norm, std::sqrt(sq));
  }
  if (b_phi_ <= 0.0) b_phi_ = max_norm > 0.0 ? max_norm : 1.0;
  if (max_norm > b_phi_) throw ValidationError("feature norm exceeds b_phi");
}

double FeatureMap::dot(std::size_t x, std::size_t a, std::span<const double> theta) const {
  const auto f = at(x, a);
  return std::inner_product(f.begin(), f.end(), theta.begin(), 0.0);
}

Eigen::MatrixXd FeatureMap::design_matrix() const {
  Eigen::MatrixXd m(n_states_ * n_actions_, dim_);
  for (std::size_t i = 0; i < n_states_ * n_actions_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = phi_[i * dim_ + j];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Policy

void softmax(std::span<const double> z, std::span<double> out) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    total += out[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) out[i] /= total;
}

Vector softmax(std::span<const double> z) {
  Vector out(z.size());
  softmax(z, out);
  return out;
}

Policy::Policy(std::size_t n_states, std::size_t n_actions, Vector logits)
    : n_states_(n_states), n_actions_(n_actions), logits_(std::move(logits)) {
  if (n_states == 0 || n_actions == 0) throw ValidationError("policy dimensions must be positive");
  if (logits_.size() != n_states * n_actions) throw ValidationError("logit table has wrong size");
  if (!all_finite(logits_)) throw NumericalError("policy logits must be finite");
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
  return Policy(n_states, n_actions, Vector(n_states * n_actions, 0.0));
}

Policy Policy::from_probabilities(std::size_t n_states, std::size_t n_actions,
                                  std::span<const double> probs) {
  Vector logits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) throw ValidationError("policy probabilities must be strictly positive");
    logits[i] = std::log(probs[i]);
  }
  return Policy(n_states, n_actions, std::move(logits));
}

Policy Policy::greedy(std::size_t n_states, std::size_t n_actions,
                      std::span<const std::size_t> actions, double logit_gap) {
  Vector logits(n_states * n_actions, 0.0);
  for (std::size_t x = 0; x < n_states; ++x) logits[x * n_actions + actions[x]] = logit_gap;
  return Policy(n_states, n_actions, std::move(logits));
}

void Policy::probabilities(std::size_t x, std::span<double> out) const { softmax(logits(x), out); }

Vector Policy::probabilities(std::size_t x) const { return softmax(logits(x)); }

Vector Policy::probability_table() const {
  Vector out(logits_.size());
  for (std::size_t x = 0; x < n_states_; ++x) {
    softmax(logits(x), std::span<double>(out).subspan(x * n_actions_, n_actions_));
  }
  return out;
}

// ---------------------------------------------------------------------------
// QFunction

QFunction QFunction::tabular(std::size_t n_states, std::size_t n_actions, Vector values) {
  if (values.size() != n_states * n_actions) throw ValidationError("Q table has wrong size");
  if (!all_finite(values)) throw NumericalError("Q table has non-finite entries");
  return QFunction(Tabular{n_states, n_actions, std::move(values)});
}

QFunction QFunction::linear(std::shared_ptr<const FeatureMap> features, Vector theta) {
  if (!features || theta.size() != features->dim()) throw ValidationError("theta dimension mismatch");
  if (!all_finite(theta)) throw NumericalError("theta has non-finite entries");
  return QFunction(Linear{std::move(features), std::move(theta)});
}

QFunction QFunction::zero(std::size_t n_states, std::size_t n_actions) {
  return tabular(n_states, n_actions, Vector(n_states * n_actions, 0.0));
}

std::size_t QFunction::n_states() const {
  return is_linear() ? as_linear().features->n_states() : as_tabular().n_states;
}

std::size_t QFunction::n_actions() const {
  return is_linear() ? as_linear().features->n_actions() : as_tabular().n_actions;
}

double QFunction::operator()(std::size_t x, std::size_t a) const {
  if (is_linear()) {
    const auto& l = as_linear();
    return l.features->dot(x, a, l.theta);
  }
  const auto& t = as_tabular();
  return t.values[x * t.n_actions + a];
}

Vector QFunction::to_table() const {
  if (!is_linear()) return as_tabular().values;
  const auto& l = as_linear();
  const std::size_t na = l.features->n_actions();
  Vector out(l.features->n_states() * na);
  for (std::size_t x = 0; x < l.features->n_states(); ++x) {
    for (std::size_t a = 0; a < na; ++a) out[x * na + a] = l.features->dot(x, a, l.theta);
  }
  return out;
}

double QFunction::sup_norm() const {
  double m = 0.0;
  for (double v : to_table()) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation

Eigen::MatrixXd policy_kernel(const FiniteMdp& mdp, std::span<const double> probs) {
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (mdp.is_factored()) {
    const auto& f = mdp.factors();
    Vector mix(f.rank);
    for (std::size_t x = 0; x < n; ++x) {
      std::fill(mix.begin(), mix.end(), 0.0);
      for (std::size_t a = 0; a < na; ++a) {
        const double pa = probs[x * na + a];
        const double* w = f.weights.data() + (x * na + a) * f.rank;
        for (std::size_t j = 0; j < f.rank; ++j) mix[j] += pa * w[j];
      }
      for (std::size_t j = 0; j < f.rank; ++j) {
        const double* m = f.anchors.data() + j * n;
        for (std::size_t y = 0; y < n; ++y) p(x, y) += mix[j] * m[y];
      }
    }
    return p;
  }
  Vector row(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < na; ++a) {
      mdp.transition_row(x, a, row);
      const double pa = probs[x * na + a];
      for (std::size_t y = 0; y < n; ++y) p(x, y) += pa * row[y];
    }
  }
  return p;
}

Vector bellman_backup(const FiniteMdp& mdp, std::span<const double> v) {
  Vector q(mdp.n_pairs());
  if (mdp.is_factored()) {
    const auto& f = mdp.factors();
    const std::size_t n = mdp.n_states();
    Vector mv(f.rank);
    for (std::size_t j = 0; j < f.rank; ++j) {
      mv[j] = std::inner_product(f.anchors.begin() + static_cast<std::ptrdiff_t>(j * n),
                                 f.anchors.begin() + static_cast<std::ptrdiff_t>((j + 1) * n),
                                 v.begin(), 0.0);
    }
    for (std::size_t i = 0; i < mdp.n_pairs(); ++i) {
      const double* w = f.weights.data() + i * f.rank;
      q[i] = mdp.rewards()[i] + mdp.gamma() * std::inner_product(w, w + f.rank, mv.begin(), 0.0);
    }
    return q;
  }
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      q[mdp.index(x, a)] = mdp.reward(x, a) + mdp.gamma() * mdp.expected_next(x, a, v);
    }
  }
  return q;
}

namespace {

Vector policy_reward(const FiniteMdp& mdp, std::span<const double> probs) {
  Vector r(mdp.n_states(), 0.0);
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      r[x] += probs[mdp.index(x, a)] * mdp.reward(x, a);
    }
  }
  return r;
}

// V <- r_pi + gamma P_pi V until gamma * ||V_{t+1} - V_t|| <= tol. The
// returned V_t then backs up to a Q whose Bellman residual is at most that.
// When `accept_floor` is set, stalling at the rounding floor returns the
// current iterate instead of failing.
Vector value_iteration(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& r_pi, double gamma,
                       Eigen::VectorXd v, double tol, std::size_t max_sweeps, bool accept_floor) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t stalled = 0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::VectorXd next = r_pi + gamma * (kernel * v);
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(change)) throw NumericalError("value iteration produced non-finite values");
    if (gamma * change <= tol) return Vector(v.data(), v.data() + v.size());
    // At the rounding floor the change stops shrinking.
    if (change < best) {
      best = change;
      stalled = 0;
    } else if (++stalled > 50) {
      if (accept_floor) return Vector(v.data(), v.data() + v.size());
      break;
    }
    v = std::move(next);
  }
  throw NumericalError("value iteration did not reach the requested tolerance");
}

}  // namespace

QFunction evaluate_q(const FiniteMdp& mdp, const Policy& pi, double tol, const EvalOptions& opts) {
  const auto probs = pi.probability_table();
  const std::size_t n = mdp.n_states();
  const Eigen::MatrixXd kernel = policy_kernel(mdp, probs);
  const Vector r = policy_reward(mdp, probs);
  const Eigen::VectorXd r_pi = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(n));
  const double g = mdp.gamma();

  Eigen::VectorXd v;
  const bool direct = mdp.n_pairs() <= opts.direct_solve_limit;
  if (direct) {
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) - g * kernel;
    v = system.partialPivLu().solve(r_pi);
  } else {
    v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  }
  if (!v.allFinite()) throw NumericalError("policy evaluation produced non-finite values");

  // Polish with value iteration; a direct solve usually needs zero or one sweep.
  Vector vt = value_iteration(kernel, r_pi, g, v, tol, opts.max_sweeps, direct);
  auto q = QFunction::tabular(n, mdp.n_actions(), bellman_backup(mdp, vt));
  return q;
}

double bellman_residual(const FiniteMdp& mdp, const Policy& pi, const QFunction& q) {
  const Vector v = state_value(q, pi);
  double worst = 0.0;
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double target = mdp.reward(x, a) + mdp.gamma() * mdp.expected_next(x, a, v);
      worst = std::max(worst, std::abs(q(x, a) - target));
    }
  }
  return worst;
}

Vector state_value(const QFunction& q, const Policy& pi) {
  Vector v(pi.n_states(), 0.0);
  Vector p(pi.n_actions());
  for (std::size_t x = 0; x < pi.n_states(); ++x) {
    pi.probabilities(x, p);
    for (std::size_t a = 0; a < pi.n_actions(); ++a) v[x] += p[a] * q(x, a);
  }
  return v;
}

Occupancy occupancy_measures(const FiniteMdp& mdp, const Policy& pi) {
  const auto probs = pi.probability_table();
  const std::size_t n = mdp.n_states();
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd kernel = policy_kernel(mdp, probs);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(ni, ni) - mdp.gamma() * kernel.transpose();
  const Eigen::VectorXd rhs =
      (1.0 - mdp.gamma()) * Eigen::Map<const Eigen::VectorXd>(mdp.nu0().data(), ni);
  const Eigen::VectorXd nu = system.partialPivLu().solve(rhs);
  if (!nu.allFinite()) throw NumericalError("occupancy solve produced non-finite values");

  Occupancy occ;
  occ.nu.assign(nu.data(), nu.data() + ni);
  occ.mu.resize(mdp.n_pairs());
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      occ.mu[mdp.index(x, a)] = occ.nu[x] * probs[mdp.index(x, a)];
    }
  }
  return occ;
}

double flow_residual(const FiniteMdp& mdp, const Occupancy& occ) {
  const std::size_t n = mdp.n_states();
  Vector inflow(n, 0.0);
  Vector row(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      mdp.transition_row(x, a, row);
      const double m = occ.mu[mdp.index(x, a)];
      for (std::size_t y = 0; y < n; ++y) inflow[y] += row[y] * m;
    }
  }
  double worst = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    const double expected = mdp.gamma() * inflow[y] + (1.0 - mdp.gamma()) * mdp.nu0()[y];
    worst = std::max(worst, std::abs(occ.nu[y] - expected));
  }
  return worst;
}

double expected_return(const FiniteMdp& mdp, const Policy& pi) {
  const auto occ = occupancy_measures(mdp, pi);
  return std::inner_product(occ.mu.begin(), occ.mu.end(), mdp.rewards().begin(), 0.0);
}

PdlGap pdl_gap(const FiniteMdp& mdp, const Policy& pi, const Policy& pi_prime) {
  PdlGap gap{};
  gap.lhs = expected_return(mdp, pi_prime) - expected_return(mdp, pi);
  const auto q = evaluate_q(mdp, pi, 1e-12);
  const auto v = state_value(q, pi);
  const auto occ = occupancy_measures(mdp, pi_prime);
  gap.rhs = 0.0;
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      gap.rhs += occ.mu[mdp.index(x, a)] * (q(x, a) - v[x]);
    }
  }
  return gap;
}

Policy policy_update_mw(const Policy& pi, const QFunction& q, double eta) {
  if (!(eta > 0.0)) throw ValidationError("learning rate must be positive");
  Vector logits(pi.logits().begin(), pi.logits().end());
  const std::size_t na = pi.n_actions();
  for (std::size_t x = 0; x < pi.n_states(); ++x) {
    for (std::size_t a = 0; a < na; ++a) logits[x * na + a] += eta * q(x, a);
  }
  return Policy(pi.n_states(), na, std::move(logits));
}

Policy linear_softmax_policy(const FeatureMap& features, std::span<const double> theta) {
  const std::size_t na = features.n_actions();
  Vector logits(features.n_states() * na);
  for (std::size_t x = 0; x < features.n_states(); ++x) {
    for (std::size_t a = 0; a < na; ++a) logits[x * na + a] = features.dot(x, a, theta);
  }
  return Policy(features.n_states(), na, std::move(logits));
}

double max_tv_distance(const Policy& p, const Policy& q) {
  double worst = 0.0;
  Vector pp(p.n_actions());
  Vector qq(q.n_actions());
  for (std::size_t x = 0; x < p.n_states(); ++x) {
    p.probabilities(x, pp);
    q.probabilities(x, qq);
    double tv = 0.0;
    for (std::size_t a = 0; a < pp.size(); ++a) tv += std::abs(pp[a] - qq[a]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

}  // namespace spoil
