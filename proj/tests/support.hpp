#pragma once

// Random instances and brute-force oracles shared by the unit tests.

#include <cmath>
#include <numeric>
#include <vector>

#include "spoil/dataset.hpp"
#include "spoil/mdp.hpp"
#include "spoil/rng.hpp"

namespace spoil::testing {

inline Vector random_distribution(Rng& rng, std::size_t n) {
  Vector p(n);
  double total = 0.0;
  for (double& v : p) {
    v = rng.exponential();
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

/// Dense tabular MDP with Dirichlet(1) rows and uniform rewards.
inline FiniteMdp random_mdp(Rng& rng, std::size_t n, std::size_t na, double gamma) {
  Vector nu0 = random_distribution(rng, n);
  Vector reward(n * na);
  for (double& r : reward) r = rng.uniform();
  Vector transition;
  transition.reserve(n * na * n);
  for (std::size_t i = 0; i < n * na; ++i) {
    const Vector row = random_distribution(rng, n);
    transition.insert(transition.end(), row.begin(), row.end());
  }
  return FiniteMdp::dense(n, na, gamma, std::move(nu0), std::move(reward), std::move(transition));
}

inline Policy random_policy(Rng& rng, std::size_t n, std::size_t na, double scale = 2.0) {
  Vector logits(n * na);
  for (double& l : logits) l = scale * rng.normal();
  return Policy(n, na, std::move(logits));
}

inline double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

/// Pairs drawn uniformly over the state-action grid.
inline ExpertDataset random_dataset(Rng& rng, std::size_t n, std::size_t na, std::size_t tau) {
  ExpertDataset data;
  data.n_states = n;
  data.n_actions = na;
  for (std::size_t i = 0; i < tau; ++i) data.pairs.push_back({rng.below(n), rng.below(na)});
  return data;
}

/// Explicit transition matrix P[(x*A+a)][x'].
inline std::vector<Vector> transition_rows(const FiniteMdp& mdp) {
  std::vector<Vector> rows(mdp.n_pairs(), Vector(mdp.n_states()));
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) mdp.transition_row(x, a, rows[mdp.index(x, a)]);
  }
  return rows;
}

/// Q^pi by summing gamma^h E[r_h] for h <= horizon via repeated application of
/// the state-action transition operator.
inline Vector truncated_rollout_q(const FiniteMdp& mdp, const Policy& pi, std::size_t horizon) {
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  const auto rows = transition_rows(mdp);
  const Vector probs = pi.probability_table();
  Vector expected_r(mdp.rewards().begin(), mdp.rewards().end());  // E[r_h | x_0, a_0]
  Vector q(n * na, 0.0);
  double discount = 1.0;
  for (std::size_t h = 0; h <= horizon; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += discount * expected_r[i];
    Vector v(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t a = 0; a < na; ++a) v[x] += probs[x * na + a] * expected_r[x * na + a];
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
      double s = 0.0;
      for (std::size_t y = 0; y < n; ++y) s += rows[i][y] * v[y];
      expected_r[i] = s;
    }
    discount *= mdp.gamma();
  }
  return q;
}

/// (1-gamma) sum_{h<=horizon} gamma^h Pr[X_h = x] by forward propagation.
inline Vector forward_state_occupancy(const FiniteMdp& mdp, const Policy& pi, std::size_t horizon) {
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  const auto rows = transition_rows(mdp);
  const Vector probs = pi.probability_table();
  Vector dist(mdp.nu0().begin(), mdp.nu0().end());
  Vector nu(n, 0.0);
  double discount = 1.0 - mdp.gamma();
  for (std::size_t h = 0; h <= horizon; ++h) {
    for (std::size_t x = 0; x < n; ++x) nu[x] += discount * dist[x];
    Vector next(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t a = 0; a < na; ++a) {
        const double w = dist[x] * probs[x * na + a];
        for (std::size_t y = 0; y < n; ++y) next[y] += w * rows[x * na + a][y];
      }
    }
    dist = std::move(next);
    discount *= mdp.gamma();
  }
  return nu;
}

/// Largest per-state total variation between two row-major probability tables.
inline double max_tv(std::span<const double> p, std::span<const double> q, std::size_t na) {
  double worst = 0.0;
  for (std::size_t x = 0; x * na < p.size(); ++x) {
    double tv = 0.0;
    for (std::size_t a = 0; a < na; ++a) tv += std::abs(p[x * na + a] - q[x * na + a]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

}  // namespace spoil::testing
