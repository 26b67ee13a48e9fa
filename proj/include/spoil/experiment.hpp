#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spoil/config.hpp"
#include "spoil/dataset.hpp"
#include "spoil/env_gen.hpp"
#include "spoil/spoil_general.hpp"
#include "spoil/spoil_linear.hpp"

namespace spoil {

/// Everything shared by the cells of one experiment.
struct ExperimentSetup {
  Environment env;
  Policy expert;
  double expert_value = 0.0;   ///< normalized return of the expert
  double uniform_value = 0.0;  ///< normalized return of the uniform policy
  Schedule schedule{1, 1.0};
  double b_theta = 0.0;
  std::optional<QClass> general_class;  ///< built only when spoil_general runs
};

/// Generates the environment, expert, schedule and (if needed) the critic
/// class. Refuses environments stored in factored form, whose exact
/// evaluation is out of reach.
ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

/// Exact Q^pi of `n_policies` random policies plus the expert, clipped.
QClass make_policy_class(const Environment& env, const Policy& expert, std::size_t n_policies, std::uint64_t seed);

/// Trains one algorithm on a dataset. `record` receives the SPOIL trace.
Policy train_algorithm(Algorithm algo, const ExpertDataset& data, const ExperimentSetup& setup,
                       const ExperimentConfig& cfg, std::uint64_t output_seed, SpoilRunRecord* record = nullptr);

struct CellResult {
  Algorithm algo;
  std::size_t tau_e;
  std::size_t seed;
  double suboptimality = 0.0;
  double suboptimality_unnormalized = 0.0;
  double runtime_ms = 0.0;
  std::string error;  ///< empty on success
};

struct SummaryRow {
  std::string algo;
  std::size_t tau_e;
  std::size_t n;  ///< successful runs
  double mean;
  double std_error;
};

struct ExperimentResult {
  std::vector<CellResult> rows;  ///< sorted by (algo name, tau_e, seed)
  double uniform_gap = 0.0;      ///< rho_E - rho(uniform)
  Schedule schedule{1, 1.0};
};

/// Runs every (algorithm, tau_e, seed) cell on `threads` workers (0 = hardware
/// concurrency). Per-cell failures become rows with an error message.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::size_t threads);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<SummaryRow> summarize(const ExperimentResult& result);
/// Mean suboptimality of one algorithm at one tau_e; NaN when absent.
double mean_suboptimality(const ExperimentResult& result, Algorithm algo, std::size_t tau_e);

/// `algo,tau_e,seed,suboptimality,suboptimality_unnormalized,runtime_ms,error`.
void write_results_csv(std::ostream& out, const ExperimentResult& result);
/// `algo,tau_e,n,mean_suboptimality,std_error`, with a `uniform` reference row.
void write_summary_csv(std::ostream& out, const ExperimentResult& result);
/// The results CSV with the runtime_ms column removed.
std::string strip_runtime_column(const std::string& csv);

/// Writes results.csv, summary.csv and run_info.txt into cfg.output_dir.
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                              const ExperimentResult& result);

}  // namespace spoil
