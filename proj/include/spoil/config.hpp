#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spoil/baselines.hpp"
#include "spoil/env_gen.hpp"

namespace spoil {

enum class Algorithm { spoil_linear, spoil_general, bc_tabular, bc_linear_softmax };

std::string to_string(Algorithm algo);
Algorithm parse_algorithm(const std::string& name);

/// Experiment configuration. Text form is flat `key = value` lines with
/// dotted sections, e.g. `env.n_states = 50`; `#` starts a comment line.
///
/// Keys: seed, env.{n_states,n_actions,dim,gamma,seed,reward_sparsity,
/// features,dense_limit}, expert.{kind,temperature,perturb_strength,seed},
/// algorithms, tau_e_grid, n_seeds, epsilon, output_dir, threads,
/// spoil.{k_iters,eta,b_theta}, spoil_general.n_policies,
/// bc.{smoothing,steps,step_size}. Lists are comma separated.
struct ExperimentConfig {
  std::uint64_t seed = 0;  ///< master seed; env and expert seeds derive from it unless set
  EnvSpec env;
  ExpertSpec expert;
  bool env_seed_set = false;
  bool expert_seed_set = false;

  std::vector<Algorithm> algorithms{Algorithm::spoil_linear, Algorithm::bc_linear_softmax};
  std::vector<std::size_t> tau_e_grid{125, 500, 2000, 8000};
  std::size_t n_seeds = 10;
  std::optional<double> epsilon = 0.1;
  std::filesystem::path output_dir = "out";
  std::size_t threads = 0;  ///< 0 uses the hardware concurrency

  std::size_t spoil_k_iters = 0;  ///< used when epsilon is unset
  double spoil_eta = 0.0;         ///< used when epsilon is unset
  double spoil_b_theta = 0.0;     ///< 0 selects 1/((1-gamma) b_phi)
  std::size_t general_n_policies = 20;

  double bc_smoothing = 0.0;
  std::size_t bc_steps = 2000;
  double bc_step_size = 0.0;  ///< 0 selects the automatic step

  void validate() const;
  /// Applies the master seed to env and expert seeds that were not given.
  void resolve_seeds();
  /// Seed of the dataset for one (tau_e, seed index) cell; shared by all algorithms.
  std::uint64_t dataset_seed(std::size_t tau_e, std::size_t seed_index) const;
  BcConfig bc_config(BcClass kind) const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(write_config(c)) reproduces c.
void write_config(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace spoil
