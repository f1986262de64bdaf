#include "sicspin/text_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sicspin {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.9g", v);
  return buf.data();
}

std::string format_exact(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view text, std::size_t line, std::string_view field) {
  const std::string_view t = trim(text);
  double v = 0.0;
  const char* begin = t.data();
  if (!t.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ParseError(line, "field '" + std::string(field) + "': expected a number, got '" +
                               std::string(t) + "'");
  }
  return v;
}

long long parse_integer(std::string_view text, std::size_t line, std::string_view field) {
  const std::string_view t = trim(text);
  std::string_view digits = t;
  if (digits.size() > 1 && digits.front() == '+' && digits[1] != '-') digits.remove_prefix(1);
  long long v = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
    throw ParseError(line, "field '" + std::string(field) + "': expected an integer, got '" +
                               std::string(t) + "'");
  }
  return v;
}

namespace {

// Drops a trailing `# comment` that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text) {
  std::vector<KeyValue> out;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ParseError(line_no, "invalid section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ParseError(line_no, "invalid key '" + std::string(key) + "'");
    if (value.empty()) throw ParseError(line_no, "missing value for '" + std::string(key) + "'");
    if (std::count(value.begin(), value.end(), '"') % 2 != 0) {
      throw ParseError(line_no, "unterminated string for '" + std::string(key) + "'");
    }
    out.push_back({line_no, section, std::string(key), std::string(value)});
  }
  return out;
}

std::string unquote(std::string_view value) {
  const std::string_view v = trim(value);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

std::vector<std::string> parse_list(std::string_view value) {
  std::string_view v = trim(value);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ParseError(0, "unterminated list");
    v = trim(v.substr(1, v.size() - 2));
  }
  if (v.empty()) return {};
  auto items = split(v, ',');
  for (auto& item : items) item = unquote(item);
  return items;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace sicspin
