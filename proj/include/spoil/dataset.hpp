#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "spoil/mdp.hpp"

namespace spoil {

struct StateAction {
  std::size_t state;
  std::size_t action;
  bool operator==(const StateAction&) const = default;
};

/// State-action pairs drawn i.i.d. from an expert's occupancy measure.
struct ExpertDataset {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::string env_hash;
  std::uint64_t seed = 0;
  std::vector<StateAction> pairs;

  std::size_t tau_e() const { return pairs.size(); }
  /// Throws ValidationError when empty or when an index is out of range.
  void validate() const;
  bool operator==(const ExpertDataset&) const = default;
};

/// Empirical counts of a dataset. Every dataset average in this library is
/// computed from these counts, so results do not depend on pair order.
struct PairCounts {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t total = 0;
  std::vector<std::size_t> pair;   ///< count(x,a), row-major
  std::vector<std::size_t> state;  ///< count(x)

  explicit PairCounts(const ExpertDataset& data);
};

/// One draw from mu^pi: H ~ Geometric(1 - gamma), roll H steps from nu0 under
/// pi, return (X_H, A_H).
StateAction sample_occupancy_pair(const FiniteMdp& mdp, std::span<const double> probs, Rng& rng);
StateAction sample_occupancy_pair(const FiniteMdp& mdp, const Policy& pi, Rng& rng);

/// tau_e independent draws; pair i uses substream i of `seed`.
ExpertDataset sample_dataset(const FiniteMdp& mdp, const Policy& pi, std::size_t tau_e,
                             std::uint64_t seed);

// Dataset file: header `dataset tau_e n_states n_actions env_hash seed`, then
// one `x a` pair per line.
void write_dataset(std::ostream& out, const ExpertDataset& data);
ExpertDataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const ExpertDataset& data);
ExpertDataset load_dataset(const std::filesystem::path& path);

}  // namespace spoil
