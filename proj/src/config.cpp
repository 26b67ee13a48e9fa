#include "spoil/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "spoil/error.hpp"
#include "spoil/io.hpp"

namespace spoil {

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::spoil_linear: return "spoil_linear";
    case Algorithm::spoil_general: return "spoil_general";
    case Algorithm::bc_tabular: return "bc_tabular";
    case Algorithm::bc_linear_softmax: return "bc_linear_softmax";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::spoil_linear, Algorithm::spoil_general, Algorithm::bc_tabular, Algorithm::bc_linear_softmax}) {
    if (to_string(a) == name) return a;
  }
  throw ValidationError("unknown algorithm `" + name + "`");
}

void ExperimentConfig::validate() const {
  env.validate();
  expert.validate();
  if (expert.kind == ExpertKind::quadratic_softmax_single_state) {
    throw ValidationError("config: the quadratic expert is only available through misspec-table");
  }
  if (algorithms.empty()) throw ValidationError("config: algorithms must be nonempty");
  if (tau_e_grid.empty()) throw ValidationError("config: tau_e_grid must be nonempty");
  for (std::size_t t : tau_e_grid) {
    if (t == 0) throw ValidationError("config: tau_e_grid entries must be positive");
  }
  if (n_seeds == 0) throw ValidationError("config: n_seeds must be at least 1");
  if (epsilon && !(*epsilon > 0.0)) throw ValidationError("config: epsilon must be positive");
  if (!epsilon && (spoil_k_iters == 0 || !(spoil_eta > 0.0))) {
    throw ValidationError("config: without epsilon, spoil.k_iters and spoil.eta must be set");
  }
  if (!(spoil_b_theta >= 0.0)) throw ValidationError("config: spoil.b_theta must be non-negative");
  if (general_n_policies == 0) throw ValidationError("config: spoil_general.n_policies must be at least 1");
  bc_config(BcClass::linear_softmax).validate();
}

void ExperimentConfig::resolve_seeds() {
  if (!env_seed_set) env.seed = derive_seed(seed, 1);
  if (!expert_seed_set) expert.seed = derive_seed(seed, 2);
}

std::uint64_t ExperimentConfig::dataset_seed(std::size_t tau_e, std::size_t seed_index) const {
  return derive_seed(derive_seed(derive_seed(seed, 3), tau_e), seed_index);
}

BcConfig ExperimentConfig::bc_config(BcClass kind) const {
  BcConfig c;
  c.class_kind = kind;
  c.smoothing = bc_smoothing;
  c.steps = bc_steps;
  c.step_size = bc_step_size;
  c.seed = seed;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct ValueParser {
  std::size_t line;

  double real(const std::string& s) const {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
      throw ParseError("invalid real `" + s + "`", line);
    }
    return v;
  }
  std::uint64_t u64(const std::string& s) const {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("invalid non-negative integer `" + s + "`", line);
    }
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno == ERANGE) throw ParseError("integer out of range `" + s + "`", line);
    return v;
  }
  std::size_t count(const std::string& s) const { return static_cast<std::size_t>(u64(s)); }
};

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected `key = value`", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError("duplicate key `" + key + "`", line_no);
    const ValueParser p{line_no};
    try {
      if (key == "seed") cfg.seed = p.u64(value);
      else if (key == "env.n_states") cfg.env.n_states = p.count(value);
      else if (key == "env.n_actions") cfg.env.n_actions = p.count(value);
      else if (key == "env.dim") cfg.env.dim = p.count(value);
      else if (key == "env.gamma") cfg.env.gamma = p.real(value);
      else if (key == "env.seed") { cfg.env.seed = p.u64(value); cfg.env_seed_set = true; }
      else if (key == "env.reward_sparsity") cfg.env.reward_sparsity = p.real(value);
      else if (key == "env.features") {
        if (value == "simplex") cfg.env.features = FeatureKind::simplex;
        else if (value == "one_hot") cfg.env.features = FeatureKind::one_hot;
        else throw ParseError("env.features must be simplex or one_hot", line_no);
      }
      else if (key == "env.dense_limit") cfg.env.dense_limit = p.real(value);
      else if (key == "expert.kind") cfg.expert.kind = parse_expert_kind(value);
      else if (key == "expert.temperature") cfg.expert.temperature = p.real(value);
      else if (key == "expert.perturb_strength") cfg.expert.perturb_strength = p.real(value);
      else if (key == "expert.seed") { cfg.expert.seed = p.u64(value); cfg.expert_seed_set = true; }
      else if (key == "algorithms") {
        cfg.algorithms.clear();
        for (const auto& name : split_list(value)) cfg.algorithms.push_back(parse_algorithm(name));
      }
      else if (key == "tau_e_grid") {
        cfg.tau_e_grid.clear();
        for (const auto& t : split_list(value)) cfg.tau_e_grid.push_back(p.count(t));
      }
      else if (key == "n_seeds") cfg.n_seeds = p.count(value);
      else if (key == "epsilon") {
        if (value == "none") cfg.epsilon.reset();
        else cfg.epsilon = p.real(value);
      }
      else if (key == "output_dir") cfg.output_dir = value;
      else if (key == "threads") cfg.threads = p.count(value);
      else if (key == "spoil.k_iters") cfg.spoil_k_iters = p.count(value);
      else if (key == "spoil.eta") cfg.spoil_eta = p.real(value);
      else if (key == "spoil.b_theta") cfg.spoil_b_theta = p.real(value);
      else if (key == "spoil_general.n_policies") cfg.general_n_policies = p.count(value);
      else if (key == "bc.smoothing") cfg.bc_smoothing = p.real(value);
      else if (key == "bc.steps") cfg.bc_steps = p.count(value);
      else if (key == "bc.step_size") cfg.bc_step_size = p.real(value);
      else throw ParseError("unknown key `" + key + "`", line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config `" + path.string() + "`");
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  auto join = [](const auto& items, auto fmt) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ", ") + fmt(i);
    return s;
  };
  out << "seed = " << cfg.seed << '\n'
      << "env.n_states = " << cfg.env.n_states << '\n'
      << "env.n_actions = " << cfg.env.n_actions << '\n'
      << "env.dim = " << cfg.env.dim << '\n'
      << "env.gamma = " << format_real(cfg.env.gamma) << '\n';
  if (cfg.env_seed_set) out << "env.seed = " << cfg.env.seed << '\n';
  out << "env.reward_sparsity = " << format_real(cfg.env.reward_sparsity) << '\n'
      << "env.features = " << (cfg.env.features == FeatureKind::simplex ? "simplex" : "one_hot") << '\n'
      << "env.dense_limit = " << format_real(cfg.env.dense_limit) << '\n'
      << "expert.kind = " << to_string(cfg.expert.kind) << '\n'
      << "expert.temperature = " << format_real(cfg.expert.temperature) << '\n'
      << "expert.perturb_strength = " << format_real(cfg.expert.perturb_strength) << '\n';
  if (cfg.expert_seed_set) out << "expert.seed = " << cfg.expert.seed << '\n';
  out << "algorithms = " << join(cfg.algorithms, [](Algorithm a) { return to_string(a); }) << '\n'
      << "tau_e_grid = " << join(cfg.tau_e_grid, [](std::size_t t) { return std::to_string(t); }) << '\n'
      << "n_seeds = " << cfg.n_seeds << '\n'
      << "epsilon = " << (cfg.epsilon ? format_real(*cfg.epsilon) : std::string("none")) << '\n'
      << "output_dir = " << cfg.output_dir.string() << '\n'
      << "threads = " << cfg.threads << '\n'
      << "spoil.k_iters = " << cfg.spoil_k_iters << '\n'
      << "spoil.eta = " << format_real(cfg.spoil_eta) << '\n'
      << "spoil.b_theta = " << format_real(cfg.spoil_b_theta) << '\n'
      << "spoil_general.n_policies = " << cfg.general_n_policies << '\n'
      << "bc.smoothing = " << format_real(cfg.bc_smoothing) << '\n'
      << "bc.steps = " << cfg.bc_steps << '\n'
      << "bc.step_size = " << format_real(cfg.bc_step_size) << '\n';
}

}  // namespace spoil
