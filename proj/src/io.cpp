#include "spoil/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "spoil/error.hpp"
#include "spoil/text.hpp"

namespace spoil {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_mdp(std::ostream& out, const FiniteMdp& mdp) {
  const std::size_t n = mdp.n_states();
  out << "mdp " << n << ' ' << mdp.n_actions() << ' ' << format_real(mdp.gamma()) << '\n';
  out << "nu0";
  for (double p : mdp.nu0()) out << ' ' << format_real(p);
  out << '\n';
  Vector row(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      mdp.transition_row(x, a, row);
      out << x << ' ' << a << ' ' << format_real(mdp.reward(x, a));
      for (double p : row) out << ' ' << format_real(p);
      out << '\n';
    }
  }
}

FiniteMdp read_mdp(std::istream& in) {
  LineReader reader(in);
  auto header = reader.expect_line("mdp header");
  if (header.size() != 4 || header[0] != "mdp") {
    throw ParseError("expected `mdp n_states n_actions gamma`", reader.line_number());
  }
  const std::size_t n = reader.parse_count(header[1]);
  const std::size_t na = reader.parse_count(header[2]);
  const double gamma = reader.parse_real(header[3]);

  auto nu_line = reader.expect_line("nu0 line");
  if (nu_line.size() != n + 1 || nu_line[0] != "nu0") {
    throw ParseError("expected `nu0` followed by " + std::to_string(n) + " reals", reader.line_number());
  }
  Vector nu0(n);
  for (std::size_t i = 0; i < n; ++i) nu0[i] = reader.parse_real(nu_line[i + 1]);

  Vector reward(n * na);
  Vector transition(n * na * n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < na; ++a) {
      auto tok = reader.expect_line("transition line");
      if (tok.size() != n + 3) throw ParseError("expected `x a r` followed by " + std::to_string(n) + " reals", reader.line_number());
      if (reader.parse_count(tok[0]) != x || reader.parse_count(tok[1]) != a) {
        throw ParseError("state-action lines must appear in row-major order", reader.line_number());
      }
      reward[x * na + a] = reader.parse_real(tok[2]);
      for (std::size_t y = 0; y < n; ++y) transition[(x * na + a) * n + y] = reader.parse_real(tok[y + 3]);
    }
  }
  return FiniteMdp::dense(n, na, gamma, std::move(nu0), std::move(reward), std::move(transition));
}

std::string serialize_mdp(const FiniteMdp& mdp) {
  std::ostringstream os;
  write_mdp(os, mdp);
  return os.str();
}

std::string mdp_hash(const FiniteMdp& mdp) { return hex64(fnv1a(serialize_mdp(mdp))); }

void write_features(std::ostream& out, const FeatureMap& features) {
  for (std::size_t x = 0; x < features.n_states(); ++x) {
    for (std::size_t a = 0; a < features.n_actions(); ++a) {
      out << x << ' ' << a;
      for (double v : features.at(x, a)) out << ' ' << format_real(v);
      out << '\n';
    }
  }
}

FeatureMap read_features(std::istream& in, std::size_t n_states, std::size_t n_actions) {
  LineReader reader(in);
  std::size_t dim = 0;
  Vector phi;
  for (std::size_t x = 0; x < n_states; ++x) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto tok = reader.expect_line("feature line");
      if (tok.size() < 3) throw ParseError("expected `x a phi_1 ... phi_d`", reader.line_number());
      if (dim == 0) {
        dim = tok.size() - 2;
        phi.reserve(n_states * n_actions * dim);
      }
      if (tok.size() != dim + 2) throw ParseError("inconsistent feature dimension", reader.line_number());
      if (reader.parse_count(tok[0]) != x || reader.parse_count(tok[1]) != a) {
        throw ParseError("state-action lines must appear in row-major order", reader.line_number());
      }
      for (std::size_t j = 0; j < dim; ++j) phi.push_back(reader.parse_real(tok[j + 2]));
    }
  }
  return FeatureMap(n_states, n_actions, dim, std::move(phi));
}

void write_policy(std::ostream& out, const Policy& pi) {
  for (std::size_t x = 0; x < pi.n_states(); ++x) {
    const auto row = pi.logits(x);
    for (std::size_t a = 0; a < row.size(); ++a) out << (a ? " " : "") << format_real(row[a]);
    out << '\n';
  }
}

Policy read_policy(std::istream& in) {
  LineReader reader(in);
  Vector logits;
  std::size_t na = 0;
  std::size_t n = 0;
  while (auto tok = reader.next_line()) {
    if (na == 0) na = tok->size();
    if (tok->size() != na) throw ParseError("every policy row needs the same number of actions", reader.line_number());
    for (const auto& t : *tok) logits.push_back(reader.parse_real(t));
    ++n;
  }
  if (n == 0) throw ValidationError("policy file is empty");
  return Policy(n, na, std::move(logits));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace spoil
