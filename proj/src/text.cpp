#include "spoil/text.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "spoil/error.hpp"

namespace spoil {

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::optional<std::vector<std::string>> LineReader::next_line() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    auto tok = split_whitespace(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    return tok;
  }
  return std::nullopt;
}

std::vector<std::string> LineReader::expect_line(const std::string& what) {
  auto tok = next_line();
  if (!tok) throw ParseError("unexpected end of input, expected " + what, line_ + 1);
  return *tok;
}

double LineReader::parse_real(const std::string& token) const {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("invalid real `" + token + "`", line_);
  }
  return v;
}

std::uint64_t LineReader::parse_u64(const std::string& token) const {
  if (token.empty() || token[0] == '-' || token[0] == '+') throw ParseError("invalid count `" + token + "`", line_);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError("invalid count `" + token + "`", line_);
  }
  return v;
}

std::size_t LineReader::parse_count(const std::string& token) const {
  return static_cast<std::size_t>(parse_u64(token));
}

}  // namespace spoil
