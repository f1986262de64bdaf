#pragma once

// Small text helpers shared by the registry, config and CSV readers/writers.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sicspin {

/// Input error carrying the 1-based line number it refers to (0 = unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Fixed 9-significant-digit formatting used by every table the tools emit.
std::string format_number(double v);
/// Shortest representation that parses back to the identical double.
std::string format_exact(double v);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Strict full-string double parse; throws ParseError naming `field`.
double parse_double(std::string_view text, std::size_t line, std::string_view field);
long long parse_integer(std::string_view text, std::size_t line, std::string_view field);

/// One `key = value` assignment from a sectioned key/value file.
struct KeyValue {
  std::size_t line = 0;
  std::string section;  // "" before the first [section] header
  std::string key;
  std::string value;    // raw text, trimmed, trailing comment removed
};

/// Parses the flat TOML subset: `# comments`, `[section]` headers, and
/// `key = value` lines where value is a number, a "quoted string", a bare
/// word, or a list `[a, b]` / `a, b`.
std::vector<KeyValue> parse_key_values(std::string_view text);

/// Removes surrounding double quotes if present.
std::string unquote(std::string_view value);
/// Splits a list value, with or without enclosing brackets.
std::vector<std::string> parse_list(std::string_view value);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);

}  // namespace sicspin
