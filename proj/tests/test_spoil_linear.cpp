#include <cmath>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "spoil/error.hpp"
#include "spoil/spoil_general.hpp"
#include "spoil/spoil_linear.hpp"
#include "support.hpp"

using namespace spoil;
using namespace spoil::testing;

namespace {

FeatureMap random_features(Rng& rng, std::size_t n, std::size_t na, std::size_t d) {
  Vector phi(n * na * d);
  for (double& v : phi) v = rng.normal();
  return FeatureMap(n, na, d, std::move(phi));
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST_CASE("feature gap estimate") {
  SUBCASE("hand example") {
    const FeatureMap features(1, 2, 2, {1.0, 0.0, 0.0, 1.0});
    ExpertDataset data{1, 2, "", 0, {{0, 0}}};
    const Vector g = feature_gap_estimate(data, features, Policy::uniform(1, 2));
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(-0.5));
  }
  SUBCASE("deterministic policy matching the data") {
    Rng rng(1);
    const FeatureMap features = random_features(rng, 5, 3, 4);
    const std::vector<std::size_t> actions{0, 2, 1, 1, 0};
    ExpertDataset data{5, 3, "", 0, {}};
    for (int i = 0; i < 40; ++i) {
      const std::size_t x = rng.below(5);
      data.pairs.push_back({x, actions[x]});
    }
    const Vector g = feature_gap_estimate(data, features, Policy::greedy(5, 3, actions));
    CHECK(norm2(g) <= 1e-12);
  }
  SUBCASE("naive double loop") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const FeatureMap features = random_features(rng, 6, 4, 3);
      const ExpertDataset data = random_dataset(rng, 6, 4, 1 + rng.below(60));
      const Policy pi = random_policy(rng, 6, 4);
      Vector naive(3, 0.0);
      for (const auto& [x, a] : data.pairs) {
        const Vector p = pi.probabilities(x);
        for (std::size_t j = 0; j < 3; ++j) {
          naive[j] += features.at(x, a)[j] / data.tau_e();
          for (std::size_t b = 0; b < 4; ++b) naive[j] -= p[b] * features.at(x, b)[j] / data.tau_e();
        }
      }
      const Vector g = feature_gap_estimate(data, features, pi);
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(g[j] - naive[j]) <= 1e-12);
      // The linear-softmax estimator agrees with the generic one.
      Vector w(3);
      for (double& v : w) v = rng.normal();
      const Vector g_lin = FeatureGapEstimator(data, features).gap(w);
      const Vector g_ref = feature_gap_estimate(data, features, linear_softmax_policy(features, w));
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(g_lin[j] - g_ref[j]) <= 1e-12);
    }
  }
}

TEST_CASE("closed-form critic") {
  const Vector t = critic_best_response_linear(Vector{3.0, 4.0}, 1.0);
  CHECK(t[0] == doctest::Approx(0.6));
  CHECK(t[1] == doctest::Approx(0.8));
  const Vector z = critic_best_response_linear(Vector{0.0, 0.0, 0.0}, 2.0);
  CHECK(norm2(z) == 0.0);

  Rng rng(3);
  Vector g(5);
  for (double& v : g) v = rng.normal();
  const Vector best = critic_best_response_linear(g, 7.0);
  CHECK(std::abs(norm2(best) - 7.0) <= 1e-12);
  const double value = dot(best, g);
  CHECK(std::abs(value - 7.0 * norm2(g)) <= 1e-12);
  for (int i = 0; i < 1000; ++i) {
    Vector probe(5);
    for (double& v : probe) v = rng.normal();
    const double scale = 7.0 * rng.uniform() / norm2(probe);
    for (double& v : probe) v *= scale;
    CHECK(value >= dot(probe, g));
  }
}

TEST_CASE("schedule") {
  const Schedule two = linear_schedule(2, 0.0, 1.0);
  CHECK(two.k_iters == 2);
  CHECK(two.eta == doctest::Approx(std::sqrt(std::log(2.0))));
  const Schedule e2 = schedule_from_log_actions(2.0, 0.5, 0.5);
  CHECK(e2.k_iters == 64);
  CHECK(e2.eta == doctest::Approx(0.125).epsilon(1e-12));
  // 2 ln 20 / (0.01 * 0.0625) = 9586.6...
  const Schedule twenty = linear_schedule(20, 0.9, 0.25);
  CHECK(twenty.k_iters == 9587);
  CHECK(twenty.eta == doctest::Approx(0.1 * std::sqrt(2.0 * std::log(20.0) / 9587.0)));
  for (double eps : {0.05, 0.1, 0.3, 0.7}) {
    const std::size_t k1 = linear_schedule(7, 0.8, eps).k_iters;
    const std::size_t k2 = linear_schedule(7, 0.8, 2.0 * eps).k_iters;
    CHECK(k2 <= (k1 + 3) / 4 + 1);
    CHECK(4 * k2 >= k1);
  }
  CHECK_THROWS_AS(linear_schedule(1, 0.5, 0.1), ValidationError);
  CHECK_THROWS_AS(linear_schedule(3, 1.0, 0.1), ValidationError);
  CHECK_THROWS_AS(linear_schedule(3, 0.5, 0.0), ValidationError);
}

TEST_CASE("linear run") {
  Rng rng(4);
  const FeatureMap features = random_features(rng, 6, 3, 4);
  const ExpertDataset data = random_dataset(rng, 6, 3, 50);

  SUBCASE("one iteration returns the uniform policy") {
    SpoilConfig cfg;
    cfg.k_iters = 1;
    cfg.eta = 0.5;
    const auto [pi, record] = run_spoil_linear(data, features, cfg);
    CHECK(record.selected == 1);
    CHECK(max_tv_distance(pi, Policy::uniform(6, 3)) == 0.0);
  }
  SUBCASE("invalid configuration") {
    SpoilConfig cfg;
    cfg.k_iters = 0;
    CHECK_THROWS_AS(run_spoil_linear(data, features, cfg), ValidationError);
    cfg.k_iters = 3;
    cfg.eta = 0.0;
    CHECK_THROWS_AS(run_spoil_linear(data, features, cfg), ValidationError);
  }
  SUBCASE("trace properties") {
    SpoilConfig cfg;
    cfg.k_iters = 40;
    cfg.eta = 0.2;
    cfg.b_theta = 1.5;
    cfg.output_seed = 11;
    const auto [pi, record] = run_spoil_linear(data, features, cfg);
    REQUIRE(record.theta.size() == 40);
    CHECK(record.selected >= 1);
    CHECK(record.selected <= 40);
    CHECK(max_tv_distance(pi, spoil_linear_iterate(features, record, record.selected)) <= 1e-12);

    Policy stepwise = Policy::uniform(6, 3);
    auto features_ptr = std::make_shared<const FeatureMap>(features);
    for (std::size_t k = 1; k <= 40; ++k) {
      const Policy pk = spoil_linear_iterate(features, record, k);
      CHECK(max_tv_distance(pk, stepwise) <= 1e-10);
      const Vector g = feature_gap_estimate(data, features, pk);
      const Vector& theta = record.theta[k - 1];
      const double n = norm2(theta);
      CHECK((n == 0.0 || std::abs(n - 1.5) <= 1e-12));
      CHECK(std::abs(dot(theta, g) - 1.5 * norm2(g)) <= 1e-12);
      CHECK(std::abs(record.g_hat_norm[k - 1] - norm2(g)) <= 1e-12);
      // The linear objective equals the generic empirical objective on Q_theta.
      Vector probe(4);
      for (double& v : probe) v = rng.normal();
      CHECK(std::abs(dot(probe, g) - empirical_objective(data, pk, QFunction::linear(features_ptr, probe))) <=
            1e-12);
      stepwise = policy_update_mw(stepwise, QFunction::linear(features_ptr, theta), cfg.eta);
    }
  }
  SUBCASE("output index is uniform over iterates") {
    SpoilConfig cfg;
    cfg.k_iters = 4;
    cfg.eta = 0.1;
    cfg.record_diagnostics = false;
    std::vector<int> hits(4, 0);
    for (std::uint64_t s = 0; s < 400; ++s) {
      cfg.output_seed = s;
      ++hits[run_spoil_linear(data, features, cfg).second.selected - 1];
    }
    for (int h : hits) CHECK(h > 60);
  }
}

TEST_CASE("separable single-state problem") {
  // The expert always plays action 0; its occupancy is the point mass on (0, 0).
  const FeatureMap features(1, 2, 1, {1.0, -1.0});
  ExpertDataset data{1, 2, "", 0, std::vector<StateAction>(30, StateAction{0, 0})};
  const double gamma = 0.9;
  SpoilConfig cfg;
  cfg.k_iters = 200;
  cfg.eta = (1.0 - gamma) * std::sqrt(2.0 * std::log(2.0) / 200.0);
  cfg.b_theta = default_b_theta(gamma, features.b_phi());
  cfg.output_seed = 5;
  const auto [pi, record] = run_spoil_linear(data, features, cfg);
  CHECK(spoil_linear_iterate(features, record, 200).probabilities(0)[0] >= 0.95);
  // Iterates are monotone toward the expert action, so late iterates all qualify.
  std::size_t first_good = 0;
  for (std::size_t k = 1; k <= 200; ++k) {
    if (spoil_linear_iterate(features, record, k).probabilities(0)[0] >= 0.95) {
      first_good = k;
      break;
    }
  }
  REQUIRE(first_good > 0);
  for (std::size_t k = first_good; k <= 200; ++k) {
    CHECK(spoil_linear_iterate(features, record, k).probabilities(0)[0] >= 0.95);
  }
  CHECK(first_good <= 20);
}

TEST_CASE("run record CSV round trip") {
  Rng rng(5);
  const FeatureMap features = random_features(rng, 4, 3, 3);
  const ExpertDataset data = random_dataset(rng, 4, 3, 30);
  SpoilConfig cfg;
  cfg.k_iters = 12;
  cfg.eta = 0.3;
  const SpoilRunRecord record = run_spoil_linear(data, features, cfg).second;
  std::stringstream ss;
  write_run_csv(ss, record);
  const SpoilRunRecord back = read_run_csv(ss);
  CHECK(back.k_iters == 12);
  REQUIRE(back.theta.size() == 12);
  for (std::size_t k = 0; k < 12; ++k) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(back.theta[k][j] == record.theta[k][j]);
    CHECK(back.g_hat_norm[k] == record.g_hat_norm[k]);
    CHECK(back.objective[k] == record.objective[k]);
  }
}
