// Command-line driver: environment, expert and dataset generation, training,
// evaluation, experiment sweeps, run diagnostics and the single-state
// misspecification table.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "spoil/baselines.hpp"
#include "spoil/config.hpp"
#include "spoil/dataset.hpp"
#include "spoil/diagnostics.hpp"
#include "spoil/env_gen.hpp"
#include "spoil/error.hpp"
#include "spoil/experiment.hpp"
#include "spoil/io.hpp"
#include "spoil/spoil_general.hpp"
#include "spoil/spoil_linear.hpp"
#include "spoil/text.hpp"

namespace fs = std::filesystem;
using namespace spoil;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment configuration file");
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_option("--threads", o.threads, "worker threads, 0 for all cores");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.threads) cfg.threads = *o.threads;
  cfg.resolve_seeds();
  cfg.validate();
  return cfg;
}

fs::path require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw IoError("missing `" + path.string() + "`; " + hint);
  return path;
}

template <typename F>
auto read_with(const fs::path& path, F reader) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open `" + path.string() + "`");
  return reader(in);
}

template <typename F>
void write_with(const fs::path& path, F writer) {
  std::ostringstream os;
  writer(os);
  write_file(path, os.str());
}

Environment load_environment(const fs::path& dir, const std::string& hint) {
  FiniteMdp mdp = read_with(require_file(dir / "env.mdp", hint), [](std::istream& in) { return read_mdp(in); });
  auto features = read_with(require_file(dir / "features.txt", hint), [&](std::istream& in) {
    return read_features(in, mdp.n_states(), mdp.n_actions());
  });
  return {std::move(mdp), std::make_shared<const FeatureMap>(std::move(features))};
}

Policy load_policy(const fs::path& path, const Environment& env) {
  Policy pi = read_with(path, [](std::istream& in) { return read_policy(in); });
  if (pi.n_states() != env.mdp.n_states() || pi.n_actions() != env.mdp.n_actions()) {
    throw ValidationError("policy `" + path.string() + "` does not match the environment");
  }
  return pi;
}

const char* kEnvHint = "run gen-env first";
const char* kExpertHint = "run gen-expert first";

// Run metadata not carried by the run CSV.
void write_run_meta(const fs::path& path, const SpoilRunRecord& r) {
  write_with(path, [&](std::ostream& os) {
    os << "k_iters " << r.k_iters << "\neta " << format_real(r.eta) << "\nb_theta " << format_real(r.b_theta)
       << "\nselected " << r.selected << '\n';
  });
}

void read_run_meta(const fs::path& path, SpoilRunRecord& r) {
  read_with(path, [&](std::istream& in) {
    LineReader reader(in);
    while (auto tok = reader.next_line()) {
      if (tok->size() != 2) throw ParseError("expected `key value`", reader.line_number());
      const auto& key = (*tok)[0];
      if (key == "k_iters") {
        if (reader.parse_count((*tok)[1]) != r.k_iters) {
          throw ValidationError("run metadata and run CSV disagree on the number of iterations");
        }
      } else if (key == "eta") r.eta = reader.parse_real((*tok)[1]);
      else if (key == "b_theta") r.b_theta = reader.parse_real((*tok)[1]);
      else if (key == "selected") r.selected = reader.parse_count((*tok)[1]);
      else throw ParseError("unknown key `" + key + "`", reader.line_number());
    }
    return 0;
  });
}

// Run CSV of a general run: `k,critic_index,objective_value`.
void write_general_run_csv(std::ostream& out, const SpoilRunRecord& r) {
  out << "k,critic_index,objective_value\n";
  for (std::size_t k = 0; k < r.critic_index.size(); ++k) {
    out << (k + 1) << ',' << r.critic_index[k] << ','
        << (k < r.objective.size() ? format_real(r.objective[k]) : "") << '\n';
  }
}

SpoilRunRecord read_general_run_csv(std::istream& in) {
  SpoilRunRecord r;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "k,critic_index,objective_value") throw ParseError("expected general run CSV header", line_no);
      continue;
    }
    std::stringstream ss(line);
    std::string k, idx, obj;
    std::getline(ss, k, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, obj, ',');
    try {
      if (std::stoull(k) != r.critic_index.size() + 1) throw ParseError("iterations must be consecutive", line_no);
      r.critic_index.push_back(std::stoull(idx));
      r.objective.push_back(std::stod(obj));
    } catch (const std::logic_error&) {
      throw ParseError("malformed row", line_no);
    }
  }
  r.k_iters = r.critic_index.size();
  if (r.k_iters == 0) throw ValidationError("run CSV holds no iterations");
  return r;
}

ExperimentSetup setup_from_files(const ExperimentConfig& cfg, const fs::path& dir, bool need_expert) {
  Environment env = load_environment(dir, kEnvHint);
  Policy expert = need_expert ? load_policy(require_file(dir / "expert.policy", kExpertHint), env)
                              : Policy::uniform(env.mdp.n_states(), env.mdp.n_actions());
  ExperimentSetup setup{std::move(env), std::move(expert), 0.0, 0.0, Schedule{1, 1.0}, 0.0, std::nullopt};
  const auto& mdp = setup.env.mdp;
  setup.schedule = cfg.epsilon ? linear_schedule(mdp.n_actions(), mdp.gamma(), *cfg.epsilon)
                               : Schedule{cfg.spoil_k_iters, cfg.spoil_eta};
  setup.b_theta = cfg.spoil_b_theta > 0.0 ? cfg.spoil_b_theta
                                          : default_b_theta(mdp.gamma(), setup.env.features->b_phi());
  return setup;
}

int cmd_gen_env(const ExperimentConfig& cfg) {
  const Environment env = gen_linear_mdp(cfg.env);
  const auto report = realizability_report(env.mdp, *env.features, 20, derive_seed(cfg.env.seed, 99));
  std::cout << "realizability_residual " << format_real(report.max_residual) << '\n'
            << "max_theta_norm " << format_real(report.max_theta_norm) << '\n';
  if (!(report.max_residual <= 1e-6)) {
    throw NumericalError("environment rejected: realizability residual " + format_real(report.max_residual) +
                         " exceeds 1e-6");
  }
  write_with(cfg.output_dir / "env.mdp", [&](std::ostream& os) { write_mdp(os, env.mdp); });
  write_with(cfg.output_dir / "features.txt", [&](std::ostream& os) { write_features(os, *env.features); });
  std::cout << "env_hash " << mdp_hash(env.mdp) << '\n';
  return 0;
}

int cmd_gen_expert(const ExperimentConfig& cfg) {
  const Environment env = load_environment(cfg.output_dir, kEnvHint);
  const Policy expert = make_expert(env, cfg.expert);
  write_with(cfg.output_dir / "expert.policy", [&](std::ostream& os) { write_policy(os, expert); });
  std::cout << "expert " << cfg.expert.describe() << '\n'
            << "expert_value " << format_real(expected_return(env.mdp, expert)) << '\n';
  return 0;
}

int cmd_sample_data(const ExperimentConfig& cfg, std::optional<std::size_t> tau_e, std::size_t index) {
  const Environment env = load_environment(cfg.output_dir, kEnvHint);
  const Policy expert = load_policy(require_file(cfg.output_dir / "expert.policy", kExpertHint), env);
  const std::size_t tau = tau_e.value_or(cfg.tau_e_grid.front());
  if (tau == 0) throw ValidationError("tau_e must be positive");
  const ExpertDataset data = sample_dataset(env.mdp, expert, tau, cfg.dataset_seed(tau, index));
  save_dataset(cfg.output_dir / "dataset.txt", data);
  std::cout << "tau_e " << tau << "\nseed " << data.seed << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& algo_name, const std::string& qclass_path) {
  const Algorithm algo = parse_algorithm(algo_name);
  const bool general = algo == Algorithm::spoil_general;
  ExperimentSetup setup = setup_from_files(cfg, cfg.output_dir, general && qclass_path.empty());
  const ExpertDataset data = load_dataset(require_file(cfg.output_dir / "dataset.txt", "run sample-data first"));
  if (!data.env_hash.empty() && data.env_hash != mdp_hash(setup.env.mdp)) {
    throw ValidationError("dataset was sampled from a different environment");
  }
  if (general) {
    setup.general_class = qclass_path.empty()
                              ? make_policy_class(setup.env, setup.expert, cfg.general_n_policies, derive_seed(cfg.seed, 4))
                              : read_with(qclass_path, [](std::istream& in) { return read_qclass(in); });
    write_with(cfg.output_dir / "qclass.txt",
               [&](std::ostream& os) { write_qclass(os, *setup.general_class, setup.env.mdp.gamma()); });
    if (setup.general_class->was_clipped()) std::cout << "critic class entries were clipped to 1/(1-gamma)\n";
  }
  SpoilRunRecord record;
  const Policy pi = train_algorithm(algo, data, setup, cfg, derive_seed(cfg.seed, 5), &record);
  const fs::path base = cfg.output_dir / algo_name;
  write_with(base.string() + ".policy", [&](std::ostream& os) { write_policy(os, pi); });
  if (algo == Algorithm::spoil_linear) {
    write_with(base.string() + "_run.csv", [&](std::ostream& os) { write_run_csv(os, record); });
  } else if (general) {
    write_with(base.string() + "_run.csv", [&](std::ostream& os) { write_general_run_csv(os, record); });
  }
  if (algo == Algorithm::spoil_linear || general) {
    write_run_meta(base.string() + "_run.meta", record);
    std::cout << "k_iters " << record.k_iters << "\neta " << format_real(record.eta) << "\nselected "
              << record.selected << '\n';
  }
  std::cout << "policy " << base.string() << ".policy\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& policies) {
  const Environment env = load_environment(cfg.output_dir, kEnvHint);
  const Policy expert = load_policy(require_file(cfg.output_dir / "expert.policy", kExpertHint), env);
  const double expert_value = expected_return(env.mdp, expert);
  const double horizon = 1.0 / (1.0 - env.mdp.gamma());
  std::ostringstream os;
  os << "policy,expert_value,value,suboptimality,suboptimality_unnormalized\n";
  for (const auto& path : policies) {
    const double value = expected_return(env.mdp, load_policy(path, env));
    os << path << ',' << format_real(expert_value) << ',' << format_real(value) << ','
       << format_real(expert_value - value) << ',' << format_real((expert_value - value) * horizon) << '\n';
  }
  std::cout << os.str();
  write_file(cfg.output_dir / "evaluation.csv", os.str());
  return 0;
}

int cmd_experiment(const ExperimentConfig& cfg) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  const ExperimentResult result = run_experiment(cfg, setup, cfg.threads);
  write_experiment_outputs(cfg, setup, result);
  std::cout << "k_iters " << setup.schedule.k_iters << "\neta " << format_real(setup.schedule.eta) << '\n';
  write_summary_csv(std::cout, result);
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg, const std::string& algo_name) {
  const Algorithm algo = parse_algorithm(algo_name);
  if (algo != Algorithm::spoil_linear && algo != Algorithm::spoil_general) {
    throw ValidationError("diagnose audits spoil_linear or spoil_general runs");
  }
  const fs::path dir = cfg.output_dir;
  const std::string hint = "diagnostics need the environment for exact quantities";
  const Environment env = load_environment(dir, hint);
  const Policy expert = load_policy(require_file(dir / "expert.policy", hint), env);
  const ExpertDataset data = load_dataset(require_file(dir / "dataset.txt", "run sample-data first"));
  const fs::path run_csv = require_file(dir / (algo_name + "_run.csv"), "run train first");
  DecompositionReport report;
  if (algo == Algorithm::spoil_linear) {
    SpoilRunRecord record = read_with(run_csv, [](std::istream& in) { return read_run_csv(in); });
    read_run_meta(require_file(dir / (algo_name + "_run.meta"), "run train first"), record);
    report = decomposition_report_linear(env.mdp, expert, data, *env.features, record);
  } else {
    SpoilRunRecord record = read_with(run_csv, [](std::istream& in) { return read_general_run_csv(in); });
    read_run_meta(require_file(dir / (algo_name + "_run.meta"), "run train first"), record);
    const QClass qclass = read_with(require_file(dir / "qclass.txt", "run train first"),
                                    [](std::istream& in) { return read_qclass(in); });
    report = decomposition_report_general(env.mdp, expert, data, qclass, record);
  }
  write_with(dir / "decomposition.csv", [&](std::ostream& os) { write_decomposition_csv(os, report); });
  write_with(dir / "decomposition_summary.csv", [&](std::ostream& os) { write_decomposition_summary(os, report); });
  const auto& last = report.rows.back();
  write_with(dir / "regret_audit.csv", [&](std::ostream& os) {
    os << "lhs,bound,holds\n"
       << format_real(last.cumulative_regret) << ',' << format_real(last.regret_bound) << ','
       << (last.cumulative_regret <= last.regret_bound ? "true" : "false") << '\n';
  });
  write_decomposition_summary(std::cout, report);
  return 0;
}

int cmd_misspec_table(std::size_t n_actions, double zeta, const std::string& out) {
  const QuadraticInstance inst = quadratic_softmax_expert(n_actions);
  const auto& features = *inst.env.features;
  const Policy plus = linear_softmax_policy(features, Vector{1.0});
  const Policy minus = linear_softmax_policy(features, Vector{-1.0});
  const Vector pe = inst.expert.probabilities(0);
  const Vector pp = plus.probabilities(0);
  const Vector pm = minus.probabilities(0);

  std::ostringstream table;
  table << "action,phi,pi_expert,pi_lin_plus,pi_lin_minus\n";
  for (std::size_t a = 0; a < n_actions; ++a) {
    table << (a + 1) << ',' << format_real(features.at(0, a)[0]) << ',' << format_real(pe[a]) << ','
          << format_real(pp[a]) << ',' << format_real(pm[a]) << '\n';
  }
  std::ostringstream rewards;
  rewards << "policy,expected_reward,tv_to_expert\n";
  auto row = [&](const char* name, const Policy& pi) {
    const Vector p = pi.probabilities(0);
    double mean_phi = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) mean_phi += p[a] * features.at(0, a)[0];
    rewards << name << ',' << format_real(zeta * mean_phi) << ',' << format_real(max_tv_distance(pi, inst.expert))
            << '\n';
  };
  row("expert", inst.expert);
  row("lin_plus", plus);
  row("lin_minus", minus);
  std::cout << table.str() << '\n' << rewards.str();
  if (!out.empty()) {
    write_file(fs::path(out) / "misspec_table.csv", table.str());
    write_file(fs::path(out) / "misspec_rewards.csv", rewards.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual offline imitation learning on finite MDPs"};
  app.require_subcommand(1);

  CommonOptions gen_env_o, gen_expert_o, sample_o, train_o, eval_o, exp_o, diag_o;
  auto* gen_env = app.add_subcommand("gen-env", "generate a linear MDP and its features");
  add_common(gen_env, gen_env_o);
  auto* gen_expert = app.add_subcommand("gen-expert", "build the expert policy for a generated MDP");
  add_common(gen_expert, gen_expert_o);
  auto* sample = app.add_subcommand("sample-data", "sample an expert dataset");
  add_common(sample, sample_o);
  std::optional<std::size_t> tau_e;
  std::size_t index = 0;
  sample->add_option("--tau-e", tau_e, "number of expert pairs (default: first grid entry)");
  sample->add_option("--index", index, "replicate index within the tau_e cell");
  auto* train = app.add_subcommand("train", "train one algorithm on the sampled dataset");
  add_common(train, train_o);
  std::string algo = "spoil_linear";
  std::string qclass_path;
  train->add_option("--algo", algo, "spoil_linear, spoil_general, bc_tabular or bc_linear_softmax");
  train->add_option("--qclass", qclass_path, "finite critic class file for spoil_general");
  auto* evaluate = app.add_subcommand("evaluate", "exact suboptimality of policy files");
  add_common(evaluate, eval_o);
  std::vector<std::string> policies;
  evaluate->add_option("policies", policies, "policy files")->required();
  auto* experiment = app.add_subcommand("experiment", "run the full (algorithm, tau_e, seed) sweep");
  add_common(experiment, exp_o);
  auto* diagnose = app.add_subcommand("diagnose", "audit a SPOIL run against exact quantities");
  add_common(diagnose, diag_o);
  std::string diag_algo = "spoil_linear";
  diagnose->add_option("--algo", diag_algo, "spoil_linear or spoil_general");
  auto* table_cmd = app.add_subcommand("misspec-table", "single-state misspecification table");
  std::size_t n_actions = 5;
  double zeta = 1.0;
  std::string table_out;
  table_cmd->add_option("--actions", n_actions, "number of actions");
  table_cmd->add_option("--zeta", zeta, "reward slope r(a) = zeta * phi(a)");
  table_cmd->add_option("--out", table_out, "directory for CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen_env) return cmd_gen_env(resolve_config(gen_env_o));
    if (*gen_expert) return cmd_gen_expert(resolve_config(gen_expert_o));
    if (*sample) return cmd_sample_data(resolve_config(sample_o), tau_e, index);
    if (*train) return cmd_train(resolve_config(train_o), algo, qclass_path);
    if (*evaluate) return cmd_evaluate(resolve_config(eval_o), policies);
    if (*experiment) return cmd_experiment(resolve_config(exp_o));
    if (*diagnose) return cmd_diagnose(resolve_config(diag_o), diag_algo);
    if (*table_cmd) return cmd_misspec_table(n_actions, zeta, table_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
