#include <cmath>

#include "doctest.h"
#include "spoil/baselines.hpp"
#include "spoil/dataset.hpp"
#include "spoil/env_gen.hpp"
#include "spoil/error.hpp"
#include "spoil/spoil_linear.hpp"
#include "support.hpp"

using namespace spoil;
using namespace spoil::testing;

namespace {

double log_likelihood(const ExpertDataset& data, std::span<const double> probs, std::size_t na) {
  double total = 0.0;
  for (const auto& [x, a] : data.pairs) total += std::log(probs[x * na + a]);
  return total / data.tau_e();
}

FeatureMap unit_ball_features(Rng& rng, std::size_t n, std::size_t na, std::size_t d) {
  Vector phi(n * na * d);
  for (std::size_t i = 0; i < n * na; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      phi[i * d + j] = rng.normal();
      norm += phi[i * d + j] * phi[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) phi[i * d + j] /= std::max(1.0, std::sqrt(norm));
  }
  return FeatureMap(n, na, d, std::move(phi));
}

/// States uniform, actions drawn from pi.
ExpertDataset draw_from_policy(Rng& rng, const Policy& pi, std::size_t tau) {
  ExpertDataset data{pi.n_states(), pi.n_actions(), "", 0, {}};
  for (std::size_t i = 0; i < tau; ++i) {
    const std::size_t x = rng.below(pi.n_states());
    data.pairs.push_back({x, rng.categorical(pi.probabilities(x))});
  }
  return data;
}

}  // namespace

TEST_CASE("tabular behavior cloning") {
  ExpertDataset data{2, 2, "", 0, {{0, 0}, {0, 0}, {0, 1}}};
  const Policy pi = bc_tabular(data, 2, 2, 0.0);
  CHECK(pi.probabilities(0)[0] == doctest::Approx(2.0 / 3.0));
  CHECK(pi.probabilities(0)[1] == doctest::Approx(1.0 / 3.0));
  CHECK(pi.probabilities(1)[0] == doctest::Approx(0.5));

  Rng rng(1);
  const ExpertDataset wide = random_dataset(rng, 6, 4, 100);
  CHECK(max_tv_distance(bc_tabular(wide, 6, 4, 1e9), Policy::uniform(6, 4)) <= 1e-6);

  SUBCASE("MLE is not improved by perturbations") {
    const Policy fit = bc_tabular(wide, 6, 4, 0.0);
    const Vector probs = fit.probability_table();
    const double best = log_likelihood(wide, probs, 4);
    const PairCounts counts(wide);
    for (int trial = 0; trial < 100; ++trial) {
      Vector other = probs;
      for (std::size_t x = 0; x < 6; ++x) {
        if (counts.state[x] == 0) continue;
        double total = 0.0;
        for (std::size_t a = 0; a < 4; ++a) {
          double& p = other[x * 4 + a];
          p = std::max(1e-12, p + 0.05 * rng.normal());
          total += p;
        }
        for (std::size_t a = 0; a < 4; ++a) other[x * 4 + a] /= total;
      }
      CHECK(log_likelihood(wide, other, 4) <= best + 1e-12);
    }
  }
}

TEST_CASE("linear-softmax likelihood gradient") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap features = unit_ball_features(rng, 5, 3, 4);
    const ExpertDataset data = random_dataset(rng, 5, 3, 40);
    const LinearSoftmaxLikelihood ll(data, features);
    Vector theta(4);
    if (trial > 0) {
      for (double& v : theta) v = 2.0 * rng.normal();
    }
    const Vector grad = ll.gradient(theta);
    const double h = 1e-5;
    for (std::size_t j = 0; j < 4; ++j) {
      Vector plus = theta;
      Vector minus = theta;
      plus[j] += h;
      minus[j] -= h;
      const double fd = (ll.value(plus) - ll.value(minus)) / (2.0 * h);
      CHECK(std::abs(fd - grad[j]) <= 1e-6 * std::max(1.0, std::abs(grad[j])));
    }
  }
}

TEST_CASE("likelihood gradient equals the feature gap estimate") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap features = unit_ball_features(rng, 6, 4, 3);
    const ExpertDataset data = random_dataset(rng, 6, 4, 50);
    Vector theta(3);
    for (double& v : theta) v = rng.normal();
    const Vector grad = LinearSoftmaxLikelihood(data, features).gradient(theta);
    const Vector gap = feature_gap_estimate(data, features, linear_softmax_policy(features, theta));
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(grad[j] - gap[j]) <= 1e-12);
  }
}

TEST_CASE("linear-softmax fit recovers a planted parameter") {
  Rng rng(3);
  const FeatureMap features = unit_ball_features(rng, 10, 4, 3);
  const Vector planted{2.0, -1.0, 1.5};
  const ExpertDataset data = draw_from_policy(rng, linear_softmax_policy(features, planted), 5000);
  BcConfig cfg;
  cfg.steps = 2000;
  const BcFit fit = bc_linear_softmax_fit(data, features, cfg);
  const double planted_ll = LinearSoftmaxLikelihood(data, features).value(planted);
  CHECK(std::abs(fit.log_likelihood.back() - planted_ll) <= 0.01);
  CHECK(fit.log_likelihood.back() >= planted_ll - 1e-9);
  CHECK(fit.log_likelihood.size() == 2001);
}

TEST_CASE("small steps increase the likelihood monotonically") {
  Rng rng(4);
  const FeatureMap features = unit_ball_features(rng, 8, 3, 3);
  const ExpertDataset data = random_dataset(rng, 8, 3, 200);
  BcConfig cfg;
  cfg.steps = 300;
  cfg.step_size = 1e-2 / (features.b_phi() * features.b_phi());
  const BcFit fit = bc_linear_softmax_fit(data, features, cfg);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-15);
  }
}

TEST_CASE("divergent step size is reported") {
  // Two-action scalar features +-1 with a 3:2 split: the optimum is atanh(0.2).
  const FeatureMap features(1, 2, 1, {-1.0, 1.0});
  ExpertDataset data{1, 2, "", 0, {{0, 0}, {0, 0}, {0, 1}, {0, 1}, {0, 1}}};
  CHECK(safe_step_size(data, features) == 1.0);
  BcConfig cfg;
  cfg.steps = 100;
  // Four actions whose scalar features spread unevenly: with a step of 10 the
  // iterates oscillate around the optimum with growing amplitude.
  const FeatureMap spread(1, 4, 1, {-0.35, -0.66, -1.37, -1.59});
  ExpertDataset spread_data{1, 4, "", 0, {}};
  for (std::size_t a = 0; a < 4; ++a) spread_data.pairs.insert(spread_data.pairs.end(), a == 0 || a == 3 ? 6 : 4, {0, a});
  cfg.step_size = 10.0;
  CHECK_THROWS_WITH_AS(bc_linear_softmax_fit(spread_data, spread, cfg), doctest::Contains("smaller step_size"),
                       NumericalError);
  cfg.step_size = 0.0;
  const BcFit fit = bc_linear_softmax_fit(data, features, cfg);
  CHECK(fit.step_size == 1.0);
  CHECK(fit.theta[0] == doctest::Approx(std::atanh(0.2)).epsilon(1e-9));
  cfg.step_size = -1.0;
  CHECK_THROWS_AS(bc_linear_softmax_fit(data, features, cfg), ValidationError);
}

TEST_CASE("linear-softmax cannot fit the single-state quadratic expert") {
  const QuadraticInstance inst = quadratic_softmax_expert(5);
  const ExpertDataset data = sample_dataset(inst.env.mdp, inst.expert, 20000, 6);
  const Policy fit = bc_linear_softmax(data, *inst.env.features, BcConfig{});
  CHECK(max_tv_distance(fit, inst.expert) >= 0.3);

  // Grid search over the scalar parameter: no member of the class is close.
  double best = 1.0;
  for (int i = -20000; i <= 20000; ++i) {
    const Vector theta{i * 1e-3};
    best = std::min(best, max_tv_distance(linear_softmax_policy(*inst.env.features, theta), inst.expert));
  }
  CHECK(best >= 0.3);
}

TEST_CASE("class names") {
  CHECK(parse_bc_class("tabular") == BcClass::tabular);
  CHECK(parse_bc_class(to_string(BcClass::linear_softmax)) == BcClass::linear_softmax);
  CHECK_THROWS_AS(parse_bc_class("neural"), ValidationError);
  Rng rng(7);
  const ExpertDataset data = random_dataset(rng, 3, 2, 10);
  BcConfig cfg;
  cfg.class_kind = BcClass::linear_softmax;
  CHECK_THROWS_AS(fit_bc(data, nullptr, cfg), ValidationError);
}
