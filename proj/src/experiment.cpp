#include "spoil/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "spoil/baselines.hpp"
#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

namespace {

bool needs(const ExperimentConfig& cfg, Algorithm algo) {
  return std::find(cfg.algorithms.begin(), cfg.algorithms.end(), algo) != cfg.algorithms.end();
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

QClass make_policy_class(const Environment& env, const Policy& expert, std::size_t n_policies, std::uint64_t seed) {
  const std::size_t n = env.mdp.n_states();
  const std::size_t na = env.mdp.n_actions();
  std::vector<Policy> policies;
  policies.reserve(n_policies + 1);
  for (std::size_t i = 0; i < n_policies; ++i) {
    Rng rng = Rng::substream(seed, i);
    Vector logits(n * na);
    for (double& l : logits) l = 3.0 * rng.normal();
    policies.emplace_back(n, na, std::move(logits));
  }
  policies.push_back(expert);
  return QClass::policy_induced(env.mdp, policies);
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Environment env = gen_linear_mdp(cfg.env);
  if (env.mdp.is_factored()) {
    throw ValidationError("exact evaluation is refused for environments above the dense threshold (|X|^2 A = " +
                          format_real(static_cast<double>(cfg.env.n_states) * cfg.env.n_states * cfg.env.n_actions) +
                          " > " + format_real(cfg.env.dense_limit) + ")");
  }
  Policy expert = make_expert(env, cfg.expert);
  ExperimentSetup setup{std::move(env), std::move(expert), 0.0, 0.0, Schedule{1, 1.0}, 0.0, std::nullopt};
  const auto& mdp = setup.env.mdp;
  setup.expert_value = expected_return(mdp, setup.expert);
  setup.uniform_value = expected_return(mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()));
  setup.schedule = cfg.epsilon ? linear_schedule(mdp.n_actions(), mdp.gamma(), *cfg.epsilon)
                               : Schedule{cfg.spoil_k_iters, cfg.spoil_eta};
  setup.b_theta = cfg.spoil_b_theta > 0.0 ? cfg.spoil_b_theta
                                          : default_b_theta(mdp.gamma(), setup.env.features->b_phi());
  if (needs(cfg, Algorithm::spoil_general)) {
    setup.general_class =
        make_policy_class(setup.env, setup.expert, cfg.general_n_policies, derive_seed(cfg.seed, 4));
  }
  return setup;
}

Policy train_algorithm(Algorithm algo, const ExpertDataset& data, const ExperimentSetup& setup,
                       const ExperimentConfig& cfg, std::uint64_t output_seed, SpoilRunRecord* record) {
  const auto& mdp = setup.env.mdp;
  switch (algo) {
    case Algorithm::spoil_linear: {
      SpoilConfig sc{setup.schedule.k_iters, setup.schedule.eta, setup.b_theta, output_seed, record != nullptr};
      auto [pi, rec] = run_spoil_linear(data, *setup.env.features, sc);
      if (record) *record = std::move(rec);
      return pi;
    }
    case Algorithm::spoil_general: {
      if (!setup.general_class) throw ValidationError("spoil_general needs a critic class");
      SpoilConfig sc{setup.schedule.k_iters, setup.schedule.eta, setup.b_theta, output_seed, record != nullptr};
      auto [pi, rec] = run_spoil_general(data, *setup.general_class, mdp.n_states(), mdp.n_actions(), sc);
      if (record) *record = std::move(rec);
      return pi;
    }
    case Algorithm::bc_tabular:
      return bc_tabular(data, mdp.n_states(), mdp.n_actions(), cfg.bc_smoothing);
    case Algorithm::bc_linear_softmax:
      return bc_linear_softmax(data, *setup.env.features, cfg.bc_config(BcClass::linear_softmax));
  }
  throw ValidationError("unknown algorithm");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::size_t threads) {
  std::vector<CellResult> cells;
  for (Algorithm algo : cfg.algorithms) {
    for (std::size_t tau : cfg.tau_e_grid) {
      for (std::size_t s = 0; s < cfg.n_seeds; ++s) cells.push_back(CellResult{algo, tau, s, 0.0, 0.0, 0.0, {}});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tuple(to_string(a.algo), a.tau_e, a.seed) < std::tuple(to_string(b.algo), b.tau_e, b.seed);
  });
  cells.erase(std::unique(cells.begin(), cells.end(),
                          [](const CellResult& a, const CellResult& b) {
                            return a.algo == b.algo && a.tau_e == b.tau_e && a.seed == b.seed;
                          }),
              cells.end());

  const auto& mdp = setup.env.mdp;
  const double horizon = 1.0 / (1.0 - mdp.gamma());
  auto run_cell = [&](CellResult& cell) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const std::uint64_t data_seed = cfg.dataset_seed(cell.tau_e, cell.seed);
      const ExpertDataset data = sample_dataset(mdp, setup.expert, cell.tau_e, data_seed);
      const Policy pi = train_algorithm(cell.algo, data, setup, cfg, derive_seed(data_seed, 1));
      cell.suboptimality = setup.expert_value - expected_return(mdp, pi);
      cell.suboptimality_unnormalized = cell.suboptimality * horizon;
    } catch (const std::exception& e) {
      cell.error = one_line(e.what());
      cell.suboptimality = std::numeric_limits<double>::quiet_NaN();
      cell.suboptimality_unnormalized = cell.suboptimality;
    }
    cell.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  std::size_t workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(1, cells.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  ExperimentResult result;
  result.rows = std::move(cells);
  result.uniform_gap = setup.expert_value - setup.uniform_value;
  result.schedule = setup.schedule;
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentConfig resolved = cfg;
  resolved.resolve_seeds();
  const ExperimentSetup setup = prepare_experiment(resolved);
  return run_experiment(resolved, setup, resolved.threads);
}

std::vector<SummaryRow> summarize(const ExperimentResult& result) {
  std::vector<SummaryRow> out;
  std::size_t i = 0;
  while (i < result.rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    while (j < result.rows.size() && result.rows[j].algo == result.rows[i].algo &&
           result.rows[j].tau_e == result.rows[i].tau_e) {
      if (result.rows[j].error.empty()) {
        sum += result.rows[j].suboptimality;
        sq += result.rows[j].suboptimality * result.rows[j].suboptimality;
        ++n;
      }
      ++j;
    }
    SummaryRow row{to_string(result.rows[i].algo), result.rows[i].tau_e, n,
                   std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    if (n > 0) {
      row.mean = sum / static_cast<double>(n);
      row.std_error = 0.0;
      if (n > 1) {
        const double var = std::max(0.0, (sq - static_cast<double>(n) * row.mean * row.mean) / static_cast<double>(n - 1));
        row.std_error = std::sqrt(var / static_cast<double>(n));
      }
    }
    out.push_back(row);
    i = j;
  }
  return out;
}

double mean_suboptimality(const ExperimentResult& result, Algorithm algo, std::size_t tau_e) {
  for (const auto& row : summarize(result)) {
    if (row.algo == to_string(algo) && row.tau_e == tau_e) return row.mean;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << "algo,tau_e,seed,suboptimality,suboptimality_unnormalized,runtime_ms,error\n";
  for (const auto& r : result.rows) {
    out << to_string(r.algo) << ',' << r.tau_e << ',' << r.seed << ',';
    if (r.error.empty()) out << format_real(r.suboptimality) << ',' << format_real(r.suboptimality_unnormalized);
    else out << ',';
    out << ',' << format_real(r.runtime_ms) << ',' << r.error << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "algo,tau_e,n,mean_suboptimality,std_error\n";
  for (const auto& s : summarize(result)) {
    out << s.algo << ',' << s.tau_e << ',' << s.n << ',';
    if (s.n > 0) out << format_real(s.mean) << ',' << format_real(s.std_error);
    else out << ',';
    out << '\n';
  }
  out << "uniform,0,1," << format_real(result.uniform_gap) << ",0\n";
}

std::string strip_runtime_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      cells.push_back(line.substr(start, pos - start));
    }
    cells.push_back(line.substr(start));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 5) continue;
      if (i > 0) out << ',';
      out << cells[i];
    }
    out << '\n';
  }
  return out.str();
}

void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                              const ExperimentResult& result) {
  std::ostringstream results;
  write_results_csv(results, result);
  write_file(cfg.output_dir / "results.csv", results.str());
  std::ostringstream summary;
  write_summary_csv(summary, result);
  write_file(cfg.output_dir / "summary.csv", summary.str());

  std::ostringstream info;
  info << "env_hash = " << mdp_hash(setup.env.mdp) << '\n'
       << "expert = " << cfg.expert.describe() << '\n'
       << "expert_value = " << format_real(setup.expert_value) << '\n'
       << "uniform_value = " << format_real(setup.uniform_value) << '\n'
       << "k_iters = " << setup.schedule.k_iters << '\n'
       << "eta = " << format_real(setup.schedule.eta) << '\n'
       << "b_theta = " << format_real(setup.b_theta) << '\n';
  if (setup.general_class) {
    info << "critic_class = exact Q of " << cfg.general_n_policies
         << " random policies plus the expert; covers only these policies, not every policy\n"
         << "critic_class_clipped = " << (setup.general_class->was_clipped() ? "true" : "false") << '\n';
  }
  write_file(cfg.output_dir / "run_info.txt", info.str());
  std::ostringstream config;
  write_config(config, cfg);
  write_file(cfg.output_dir / "config_used.txt", config.str());
}

}  // namespace spoil
