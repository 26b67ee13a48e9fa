#include <cmath>
#include <sstream>

#include "doctest.h"
#include "spoil/dataset.hpp"
#include "spoil/error.hpp"
#include "spoil/io.hpp"
#include "support.hpp"

using namespace spoil;
using namespace spoil::testing;

namespace {

Vector empirical_pairs(const ExpertDataset& data) {
  const PairCounts counts(data);
  Vector freq(counts.pair.size());
  for (std::size_t i = 0; i < freq.size(); ++i) freq[i] = static_cast<double>(counts.pair[i]) / counts.total;
  return freq;
}

double total_variation(const Vector& p, const Vector& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("single-state single-action sampling") {
  const auto mdp = FiniteMdp::dense(1, 1, 0.9, {1.0}, {0.5}, {1.0});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_occupancy_pair(mdp, Policy::uniform(1, 1), rng) == StateAction{0, 0});
}

TEST_CASE("zero discount samples the initial distribution") {
  Rng setup(2);
  const FiniteMdp mdp = random_mdp(setup, 4, 2, 0.0);
  const Policy pi = random_policy(setup, 4, 2);
  Rng rng(3);
  std::vector<double> counts(4, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[sample_occupancy_pair(mdp, pi, rng).state] += 1.0;
  double chi2 = 0.0;
  for (std::size_t x = 0; x < 4; ++x) {
    const double expected = draws * mdp.nu0()[x];
    chi2 += (counts[x] - expected) * (counts[x] - expected) / expected;
  }
  // Upper 0.001 quantile of chi-square with 3 degrees of freedom.
  CHECK(chi2 < 16.266);
}

TEST_CASE("sampled pairs follow the occupancy measure") {
  Rng setup(5);
  const FiniteMdp mdp = random_mdp(setup, 4, 3, 0.8);
  const Policy pi = random_policy(setup, 4, 3);
  const Vector mu = occupancy_measures(mdp, pi).mu;

  Rng rng(6);
  Vector freq(12, 0.0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const auto p = sample_occupancy_pair(mdp, pi, rng);
    freq[p.state * 3 + p.action] += 1.0 / draws;
  }
  CHECK(total_variation(freq, mu) <= 0.01);
  CHECK(total_variation(empirical_pairs(sample_dataset(mdp, pi, 50000, 7)), mu) <= 0.02);
}

TEST_CASE("dataset sampling basics") {
  Rng setup(8);
  const FiniteMdp mdp = random_mdp(setup, 5, 2, 0.9);
  const Policy pi = random_policy(setup, 5, 2);
  const auto one = sample_dataset(mdp, pi, 1, 3);
  CHECK(one.tau_e() == 1);
  CHECK(one.env_hash == mdp_hash(mdp));
  CHECK(sample_dataset(mdp, pi, 300, 9) == sample_dataset(mdp, pi, 300, 9));
  CHECK(sample_dataset(mdp, pi, 300, 9).pairs != sample_dataset(mdp, pi, 300, 10).pairs);
  // Pair i depends only on (seed, i): a longer dataset extends a shorter one.
  const auto short_data = sample_dataset(mdp, pi, 50, 11);
  const auto long_data = sample_dataset(mdp, pi, 80, 11);
  CHECK(std::equal(short_data.pairs.begin(), short_data.pairs.end(), long_data.pairs.begin()));
}

TEST_CASE("sample mean of a test function is unbiased") {
  Rng setup(12);
  const FiniteMdp mdp = random_mdp(setup, 4, 3, 0.7);
  const Policy pi = random_policy(setup, 4, 3);
  const Vector mu = occupancy_measures(mdp, pi).mu;
  Vector f(12);
  for (double& v : f) v = setup.uniform();
  double exact = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    exact += mu[i] * f[i];
    second += mu[i] * f[i] * f[i];
  }
  const double sd = std::sqrt(second - exact * exact);
  const auto data = sample_dataset(mdp, pi, 10000, 13);
  double mean = 0.0;
  for (const auto& p : data.pairs) mean += f[p.state * 3 + p.action] / 10000.0;
  CHECK(std::abs(mean - exact) <= 4.0 * sd / std::sqrt(10000.0));
}

TEST_CASE("consecutive pairs are uncorrelated") {
  Rng setup(14);
  const FiniteMdp mdp = random_mdp(setup, 6, 2, 0.9);
  const Policy pi = random_policy(setup, 6, 2);
  const std::size_t n = 100000;
  const auto data = sample_dataset(mdp, pi, n, 15);
  double mean = 0.0;
  for (const auto& p : data.pairs) mean += static_cast<double>(p.state) / n;
  double var = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data.pairs[i].state - mean;
    var += d * d;
    if (i + 1 < n) cov += d * (data.pairs[i + 1].state - mean);
  }
  CHECK(std::abs(cov / var) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("dataset files") {
  Rng setup(16);
  const FiniteMdp mdp = random_mdp(setup, 3, 2, 0.9);
  const auto data = sample_dataset(mdp, Policy::uniform(3, 2), 40, 17);
  std::stringstream ss;
  write_dataset(ss, data);
  CHECK(read_dataset(ss) == data);

  std::istringstream bad_action("dataset 2 3 2 - 0\n0 1\n2 2\n");
  CHECK_THROWS_WITH_AS(read_dataset(bad_action), doctest::Contains("line 3"), ValidationError);
  std::istringstream empty("dataset 0 3 2 - 0\n");
  CHECK_THROWS_AS(read_dataset(empty), ValidationError);
  std::istringstream short_file("dataset 3 3 2 - 0\n0 1\n");
  CHECK_THROWS_AS(read_dataset(short_file), ValidationError);
  std::istringstream garbage("dataset 1 3 2 - 0\nzero one\n");
  CHECK_THROWS_AS(read_dataset(garbage), ParseError);
}
