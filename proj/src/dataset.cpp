#include "spoil/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "spoil/error.hpp"
#include "spoil/io.hpp"
#include "spoil/text.hpp"

namespace spoil {

void ExpertDataset::validate() const {
  if (pairs.empty()) throw ValidationError("dataset: tau_e must be at least 1");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].state >= n_states || pairs[i].action >= n_actions) {
      throw ValidationError("dataset: pair " + std::to_string(i) + " is out of range");
    }
  }
}

PairCounts::PairCounts(const ExpertDataset& data)
    : n_states(data.n_states),
      n_actions(data.n_actions),
      total(data.pairs.size()),
      pair(data.n_states * data.n_actions, 0),
      state(data.n_states, 0) {
  for (const auto& p : data.pairs) {
    ++pair[p.state * n_actions + p.action];
    ++state[p.state];
  }
}

StateAction sample_occupancy_pair(const FiniteMdp& mdp, std::span<const double> probs, Rng& rng) {
  const std::size_t na = mdp.n_actions();
  const std::uint64_t horizon = rng.geometric(mdp.gamma());
  std::size_t x = rng.categorical(mdp.nu0());
  std::size_t a = rng.categorical(probs.subspan(x * na, na));
  for (std::uint64_t h = 0; h < horizon; ++h) {
    x = mdp.sample_next(x, a, rng);
    a = rng.categorical(probs.subspan(x * na, na));
  }
  return {x, a};
}

StateAction sample_occupancy_pair(const FiniteMdp& mdp, const Policy& pi, Rng& rng) {
  const auto probs = pi.probability_table();
  return sample_occupancy_pair(mdp, probs, rng);
}

ExpertDataset sample_dataset(const FiniteMdp& mdp, const Policy& pi, std::size_t tau_e,
                             std::uint64_t seed) {
  if (tau_e == 0) throw ValidationError("tau_e must be at least 1");
  const auto probs = pi.probability_table();
  ExpertDataset data;
  data.n_states = mdp.n_states();
  data.n_actions = mdp.n_actions();
  data.env_hash = mdp_hash(mdp);
  data.seed = seed;
  data.pairs.reserve(tau_e);
  for (std::size_t i = 0; i < tau_e; ++i) {
    Rng rng = Rng::substream(seed, i);
    data.pairs.push_back(sample_occupancy_pair(mdp, probs, rng));
  }
  return data;
}

void write_dataset(std::ostream& out, const ExpertDataset& data) {
  out << "dataset " << data.tau_e() << ' ' << data.n_states << ' ' << data.n_actions << ' '
      << (data.env_hash.empty() ? "-" : data.env_hash) << ' ' << data.seed << '\n';
  for (const auto& p : data.pairs) out << p.state << ' ' << p.action << '\n';
}

ExpertDataset read_dataset(std::istream& in) {
  LineReader reader(in);
  const auto header = reader.expect_line("dataset header");
  if (header.size() != 6 || header[0] != "dataset") {
    throw ParseError("expected `dataset tau_e n_states n_actions env_hash seed`", reader.line_number());
  }
  ExpertDataset data;
  const std::size_t tau_e = reader.parse_count(header[1]);
  data.n_states = reader.parse_count(header[2]);
  data.n_actions = reader.parse_count(header[3]);
  data.env_hash = header[4] == "-" ? "" : header[4];
  data.seed = reader.parse_u64(header[5]);
  if (tau_e == 0) throw ValidationError("line " + std::to_string(reader.line_number()) + ": tau_e must be at least 1");
  data.pairs.reserve(tau_e);
  while (auto tok = reader.next_line()) {
    if (tok->size() != 2) throw ParseError("expected `x a`", reader.line_number());
    const std::size_t x = reader.parse_count((*tok)[0]);
    const std::size_t a = reader.parse_count((*tok)[1]);
    if (x >= data.n_states || a >= data.n_actions) {
      throw ValidationError("line " + std::to_string(reader.line_number()) + ": pair (" + std::to_string(x) +
                            "," + std::to_string(a) + ") outside the declared " + std::to_string(data.n_states) +
                            "x" + std::to_string(data.n_actions) + " space");
    }
    data.pairs.push_back({x, a});
  }
  if (data.pairs.size() != tau_e) {
    throw ValidationError("dataset header declares " + std::to_string(tau_e) + " pairs but " +
                          std::to_string(data.pairs.size()) + " were read");
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const ExpertDataset& data) {
  std::ostringstream os;
  write_dataset(os, data);
  write_file(path, os.str());
}

ExpertDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace spoil
