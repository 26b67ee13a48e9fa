#pragma once

#include <cstddef>
#include <istream>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spoil {

/// Whitespace tokenizer over a text stream that tracks line numbers.
/// Blank lines and lines starting with '#' are skipped.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::optional<std::vector<std::string>> next_line();
  /// Like next_line, but a missing line is a ParseError naming `what`.
  std::vector<std::string> expect_line(const std::string& what);

  std::size_t line_number() const { return line_; }

  double parse_real(const std::string& token) const;
  std::size_t parse_count(const std::string& token) const;
  std::uint64_t parse_u64(const std::string& token) const;

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<std::string> split_whitespace(const std::string& line);

}  // namespace spoil
