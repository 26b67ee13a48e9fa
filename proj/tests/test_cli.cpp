#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("spoil_cli_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SPOIL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kSmallConfig =
    "seed = 11\n"
    "env.n_states = 10\n"
    "env.n_actions = 4\n"
    "env.dim = 3\n"
    "env.gamma = 0.8\n"
    "tau_e_grid = 300\n"
    "n_seeds = 1\n"
    "epsilon = 0.5\n"
    "threads = 1\n"
    "spoil_general.n_policies = 5\n"
    "bc.steps = 200\n";

}  // namespace

TEST_CASE("cli pipeline") {
  TempDir dir("pipeline");
  const fs::path cfg = dir.path / "config.txt";
  write_text(cfg, kSmallConfig);
  const fs::path log = dir.path / "log.txt";
  const std::string common = " --config " + cfg.string() + " --out " + dir.path.string();

  REQUIRE(run("gen-env" + common, log) == 0);
  CHECK(slurp(log).find("realizability_residual") != std::string::npos);
  REQUIRE(run("gen-expert" + common, log) == 0);
  REQUIRE(run("sample-data" + common, log) == 0);
  for (const char* algo : {"spoil_linear", "spoil_general", "bc_tabular", "bc_linear_softmax"}) {
    CAPTURE(algo);
    REQUIRE(run("train --algo " + std::string(algo) + common, log) == 0);
    CHECK(fs::exists(dir.path / (std::string(algo) + ".policy")));
  }
  REQUIRE(run("evaluate" + common + " " + (dir.path / "spoil_linear.policy").string() + " " +
                  (dir.path / "bc_tabular.policy").string(),
              log) == 0);
  const std::string evaluation = slurp(dir.path / "evaluation.csv");
  CHECK(std::count(evaluation.begin(), evaluation.end(), '\n') == 3);

  for (const char* algo : {"spoil_linear", "spoil_general"}) {
    CAPTURE(algo);
    REQUIRE(run("diagnose --algo " + std::string(algo) + common, log) == 0);
    CHECK(fs::exists(dir.path / "decomposition.csv"));
    CHECK(slurp(dir.path / "regret_audit.csv").find(",true") != std::string::npos);
  }
  REQUIRE(run("diagnose --algo spoil_linear" + common, log) == 0);
  CHECK(slurp(dir.path / "decomposition_summary.csv").find(",true") != std::string::npos);

  SUBCASE("tampered trace") {
    const fs::path run_csv = dir.path / "spoil_linear_run.csv";
    std::istringstream lines(slurp(run_csv));
    std::ostringstream edited;
    std::string line;
    int row = 0;
    while (std::getline(lines, line)) {
      // Negate the critic of iteration 2: it stops being a best response.
      if (row == 2) {
        std::istringstream cells(line);
        std::string cell;
        int col = 0;
        std::string out;
        while (std::getline(cells, cell, ',')) {
          if (col >= 3) cell = cell[0] == '-' ? cell.substr(1) : "-" + cell;
          out += (col ? "," : "") + cell;
          ++col;
        }
        line = out;
      }
      edited << line << '\n';
      ++row;
    }
    write_text(run_csv, edited.str());
    CHECK(run("diagnose --algo spoil_linear" + common, log) == 1);
    CHECK(slurp(log).find("best response") != std::string::npos);
  }
  SUBCASE("missing environment") {
    fs::remove(dir.path / "env.mdp");
    CHECK(run("diagnose --algo spoil_linear" + common, log) == 3);
    CHECK(slurp(log).find("exact quantities") != std::string::npos);
  }
}

TEST_CASE("cli single-iteration diagnose") {
  TempDir dir("k1");
  const fs::path cfg = dir.path / "config.txt";
  write_text(cfg, std::string(kSmallConfig) + "epsilon = none\nspoil.k_iters = 1\nspoil.eta = 0.5\n");
  // The duplicate epsilon line must be rejected; rewrite without it.
  const fs::path log = dir.path / "log.txt";
  CHECK(run("gen-env --config " + cfg.string() + " --out " + dir.path.string(), log) == 1);
  std::string text = kSmallConfig;
  text.replace(text.find("epsilon = 0.5\n"), 14, "epsilon = none\nspoil.k_iters = 1\nspoil.eta = 0.5\n");
  write_text(cfg, text);
  const std::string common = " --config " + cfg.string() + " --out " + dir.path.string();
  REQUIRE(run("gen-env" + common, log) == 0);
  REQUIRE(run("gen-expert" + common, log) == 0);
  REQUIRE(run("sample-data" + common, log) == 0);
  REQUIRE(run("train --algo spoil_linear" + common, log) == 0);
  REQUIRE(run("diagnose --algo spoil_linear" + common, log) == 0);
  const std::string audit = slurp(dir.path / "regret_audit.csv");
  CHECK(audit.rfind("lhs,bound,holds\n", 0) == 0);
  CHECK(audit.find(",true") != std::string::npos);
}

TEST_CASE("cli determinism and validation") {
  TempDir a("det_a");
  TempDir b("det_b");
  const fs::path cfg = a.path / "config.txt";
  write_text(cfg, kSmallConfig);
  const fs::path log = a.path / "log.txt";
  REQUIRE(run("gen-env --config " + cfg.string() + " --out " + a.path.string(), log) == 0);
  REQUIRE(run("gen-env --config " + cfg.string() + " --out " + b.path.string(), log) == 0);
  CHECK(slurp(a.path / "env.mdp") == slurp(b.path / "env.mdp"));
  CHECK(slurp(a.path / "features.txt") == slurp(b.path / "features.txt"));
  REQUIRE(run("gen-env --seed 12 --config " + cfg.string() + " --out " + b.path.string(), log) == 0);
  CHECK(slurp(a.path / "env.mdp") != slurp(b.path / "env.mdp"));

  const fs::path bad = a.path / "bad.txt";
  write_text(bad, std::string(kSmallConfig) + "env.dim = 41\n");
  CHECK(run("gen-env --config " + bad.string() + " --out " + a.path.string(), log) == 1);
  write_text(bad, "env.n_states = 10\nenv.n_actions = 4\nenv.dim = 41\n");
  CHECK(run("gen-env --config " + bad.string() + " --out " + a.path.string(), log) == 1);
  CHECK(run("gen-env --no-such-flag", log) == 1);
  CHECK(run("train --algo gail --config " + cfg.string() + " --out " + a.path.string(), log) == 1);
  CHECK(run("gen-expert --config " + cfg.string() + " --out " + (a.path / "empty").string(), log) == 3);
}

TEST_CASE("cli experiment and misspecification table") {
  TempDir dir("experiment");
  const fs::path cfg = dir.path / "config.txt";
  write_text(cfg, std::string(kSmallConfig) + "algorithms = spoil_linear\n");
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run("experiment --config " + cfg.string() + " --out " + dir.path.string(), log) == 0);
  const std::string results = slurp(dir.path / "results.csv");
  CHECK(std::count(results.begin(), results.end(), '\n') == 2);
  CHECK(fs::exists(dir.path / "summary.csv"));
  CHECK(fs::exists(dir.path / "config_used.txt"));
  CHECK(slurp(log).find("k_iters") != std::string::npos);

  REQUIRE(run("misspec-table --actions 5 --out " + dir.path.string(), log) == 0);
  const std::string table = slurp(dir.path / "misspec_table.csv");
  CHECK(table.rfind("action,phi,pi_expert,pi_lin_plus,pi_lin_minus\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);
  CHECK(run("misspec-table --actions 1", log) == 1);
}
