#include "spoil/env_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

namespace {

// Substream tags for gen_linear_mdp.
enum : std::uint64_t { kAnchorStream = 1, kFeatureStream = 2, kRewardStream = 3, kSparsityStream = 4 };

// Symmetric Dirichlet(1) draw, i.e. uniform on the simplex.
void uniform_simplex(Rng& rng, std::span<double> out) {
  double total = 0.0;
  for (double& v : out) {
    v = rng.exponential();
    total += v;
  }
  for (double& v : out) v /= total;
}

}  // namespace

void EnvSpec::validate() const {
  if (n_states == 0 || n_actions == 0 || dim == 0) throw ValidationError("env: n_states, n_actions and dim must be positive");
  if (dim > n_states * n_actions) throw ValidationError("env: dim must not exceed n_states * n_actions");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("env: gamma must lie in [0, 1)");
  if (!(reward_sparsity >= 0.0 && reward_sparsity <= 1.0)) throw ValidationError("env: reward_sparsity must lie in [0, 1]");
  if (features == FeatureKind::one_hot && dim != n_states * n_actions) {
    throw ValidationError("env: one-hot features need dim = n_states * n_actions");
  }
}

Environment gen_linear_mdp(const EnvSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_states;
  const std::size_t na = spec.n_actions;
  const std::size_t d = spec.dim;

  Rng anchor_rng = Rng::substream(spec.seed, kAnchorStream);
  Vector anchors(d * n);
  for (std::size_t j = 0; j < d; ++j) uniform_simplex(anchor_rng, std::span<double>(anchors).subspan(j * n, n));

  Vector phi(n * na * d, 0.0);
  if (spec.features == FeatureKind::one_hot) {
    for (std::size_t i = 0; i < n * na; ++i) phi[i * d + i] = 1.0;
  } else {
    Rng feature_rng = Rng::substream(spec.seed, kFeatureStream);
    for (std::size_t i = 0; i < n * na; ++i) uniform_simplex(feature_rng, std::span<double>(phi).subspan(i * d, d));
  }

  Rng reward_rng = Rng::substream(spec.seed, kRewardStream);
  Vector theta_r(d);
  for (double& t : theta_r) t = reward_rng.uniform();
  const auto n_zero = static_cast<std::size_t>(std::llround(spec.reward_sparsity * static_cast<double>(d)));
  if (n_zero > 0) {
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    Rng sparsity_rng = Rng::substream(spec.seed, kSparsityStream);
    for (std::size_t i = 0; i < n_zero; ++i) {
      const auto k = i + static_cast<std::size_t>(sparsity_rng.below(d - i));
      std::swap(order[i], order[k]);
      theta_r[order[i]] = 0.0;
    }
  }

  Vector reward(n * na);
  for (std::size_t i = 0; i < n * na; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < d; ++j) r += phi[i * d + j] * theta_r[j];
    reward[i] = std::clamp(r, 0.0, 1.0);
  }
  Vector nu0(n, 1.0 / static_cast<double>(n));

  auto features = std::make_shared<const FeatureMap>(n, na, d, phi, 1.0);
  const double entries = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(na);
  if (entries > spec.dense_limit) {
    FiniteMdp::Factored f{d, std::move(phi), std::move(anchors)};
    return {FiniteMdp::factored(n, na, spec.gamma, std::move(nu0), std::move(reward), std::move(f)), features};
  }
  Vector transition(n * na * n, 0.0);
  for (std::size_t i = 0; i < n * na; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double w = phi[i * d + j];
      for (std::size_t y = 0; y < n; ++y) transition[i * n + y] += w * anchors[j * n + y];
    }
  }
  return {FiniteMdp::dense(n, na, spec.gamma, std::move(nu0), std::move(reward), std::move(transition)), features};
}

std::string to_string(ExpertKind kind) {
  switch (kind) {
    case ExpertKind::soft_optimal: return "soft_optimal";
    case ExpertKind::perturbed_table: return "perturbed_table";
    case ExpertKind::quadratic_softmax_single_state: return "quadratic_softmax_single_state";
  }
  return "unknown";
}

ExpertKind parse_expert_kind(const std::string& name) {
  if (name == "soft_optimal") return ExpertKind::soft_optimal;
  if (name == "perturbed_table") return ExpertKind::perturbed_table;
  if (name == "quadratic_softmax_single_state") return ExpertKind::quadratic_softmax_single_state;
  throw ValidationError("unknown expert kind `" + name + "`");
}

void ExpertSpec::validate() const {
  if (!(temperature > 0.0)) throw ValidationError("expert: temperature must be positive");
  if (!(perturb_strength >= 0.0)) throw ValidationError("expert: perturb_strength must be non-negative");
  if (!(tol > 0.0) || max_iters == 0) throw ValidationError("expert: tol and max_iters must be positive");
}

std::string ExpertSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind) << "(t=" << format_real(temperature);
  if (kind == ExpertKind::perturbed_table) os << ",s=" << format_real(perturb_strength) << ",seed=" << seed;
  os << ')';
  return os.str();
}

Policy soft_optimal_policy(const FiniteMdp& mdp, double temperature, double tol,
                           std::size_t max_iters) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  Vector v(n, 0.0);
  Vector q;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iters; ++it) {
    q = bellman_backup(mdp, v);
    residual = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      const double* row = q.data() + x * na;
      const double m = *std::max_element(row, row + na);
      double total = 0.0;
      for (std::size_t a = 0; a < na; ++a) total += std::exp((row[a] - m) / temperature);
      const double next = m + temperature * std::log(total);
      if (!std::isfinite(next)) throw NumericalError("soft value iteration produced non-finite values");
      residual = std::max(residual, std::abs(next - v[x]));
      v[x] = next;
    }
    if (residual <= tol) {
      q = bellman_backup(mdp, v);
      for (double& l : q) l /= temperature;
      return Policy(n, na, std::move(q));
    }
  }
  throw NumericalError("soft value iteration did not converge; last residual " + format_real(residual));
}

Policy perturbed_expert(const Policy& base, double strength, std::uint64_t seed) {
  if (!(strength >= 0.0)) throw ValidationError("perturbation strength must be non-negative");
  Vector logits(base.logits().begin(), base.logits().end());
  if (strength > 0.0) {
    Rng rng(seed);
    for (double& l : logits) l += strength * rng.normal();
  }
  return Policy(base.n_states(), base.n_actions(), std::move(logits));
}

Policy make_expert(const Environment& env, const ExpertSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ExpertKind::soft_optimal:
      return soft_optimal_policy(env.mdp, spec.temperature, spec.tol, spec.max_iters);
    case ExpertKind::perturbed_table:
      return perturbed_expert(soft_optimal_policy(env.mdp, spec.temperature, spec.tol, spec.max_iters),
                              spec.perturb_strength, spec.seed);
    case ExpertKind::quadratic_softmax_single_state:
      break;
  }
  throw ValidationError("the quadratic expert lives on its own single-state instance");
}

QuadraticInstance quadratic_softmax_expert(std::size_t n_actions) {
  if (n_actions < 2) throw ValidationError("quadratic expert needs at least two actions");
  const double center = (static_cast<double>(n_actions) + 1.0) / 2.0;
  Vector phi(n_actions);
  Vector logits(n_actions);
  for (std::size_t i = 0; i < n_actions; ++i) {
    phi[i] = static_cast<double>(i + 1) - center;
    logits[i] = phi[i] * phi[i];
  }
  auto features = std::make_shared<const FeatureMap>(1, n_actions, 1, phi);
  auto mdp = FiniteMdp::dense(1, n_actions, 0.0, Vector{1.0}, Vector(n_actions, 0.0), Vector(n_actions, 1.0));
  return {Environment{std::move(mdp), std::move(features)}, Policy(1, n_actions, std::move(logits))};
}

double softmax_fit_residual(const Policy& pi, const FeatureMap& features) {
  const std::size_t n = pi.n_states();
  const std::size_t na = pi.n_actions();
  const std::size_t d = features.dim();
  Eigen::MatrixXd design(n * na, d);
  Eigen::VectorXd target(n * na);
  for (std::size_t x = 0; x < n; ++x) {
    const auto l = pi.logits(x);
    const double lmean = std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(na);
    Eigen::VectorXd fmean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t j = 0; j < d; ++j) fmean(j) += features.at(x, a)[j];
    }
    fmean /= static_cast<double>(na);
    for (std::size_t a = 0; a < na; ++a) {
      const auto r = static_cast<Eigen::Index>(x * na + a);
      target(r) = l[a] - lmean;
      for (std::size_t j = 0; j < d; ++j) design(r, j) = features.at(x, a)[j] - fmean(j);
    }
  }
  const Eigen::VectorXd theta = design.completeOrthogonalDecomposition().solve(target);
  return (design * theta - target).lpNorm<Eigen::Infinity>();
}

RealizabilityReport realizability_report(const FiniteMdp& mdp, const FeatureMap& features,
                                         std::size_t n_probe_policies, std::uint64_t seed) {
  const Eigen::MatrixXd design = features.design_matrix();
  const auto cod = design.completeOrthogonalDecomposition();
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  RealizabilityReport report;
  for (std::size_t k = 0; k < n_probe_policies; ++k) {
    Rng rng = Rng::substream(seed, k);
    Vector logits(n * na);
    for (double& l : logits) l = 3.0 * rng.normal();
    const auto q = evaluate_q(mdp, Policy(n, na, std::move(logits)), 1e-12).to_table();
    const Eigen::Map<const Eigen::VectorXd> target(q.data(), static_cast<Eigen::Index>(q.size()));
    const Eigen::VectorXd theta = cod.solve(target);
    report.max_residual = std::max(report.max_residual, (design * theta - target).lpNorm<Eigen::Infinity>());
    report.max_theta_norm = std::max(report.max_theta_norm, theta.norm());
  }
  return report;
}

double realizability_residual(const FiniteMdp& mdp, const FeatureMap& features,
                              std::size_t n_probe_policies, std::uint64_t seed) {
  return realizability_report(mdp, features, n_probe_policies, seed).max_residual;
}

}  // namespace spoil
