#include "pod/config.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "pod/binary_io.hpp"
#include "pod/error.hpp"
#include "pod/random.hpp"

namespace pod {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    const std::string where = "config line " + std::to_string(number);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) fail(ErrorKind::Config, where + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::Config, where + ": empty key");
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') fail(ErrorKind::Config, where + ": unterminated string");
      value = value.substr(1, value.size() - 2);
    }
    c.values_[section.empty() ? key : section + "." + key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) { return parse(read_text_file(path)); }

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Config::digest() const {
  Fnv1a h;
  for (const auto& [k, v] : values_) {
    h.add(std::string_view(k));
    h.add(std::string_view(v));
  }
  return h.value();
}

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) fail(ErrorKind::Config, what + ": expected an integer, got '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    fail(ErrorKind::Config, what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  fail(ErrorKind::Config, what + ": expected a number, got '" + text + "'");
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  fail(ErrorKind::Config, what + ": expected true or false, got '" + text + "'");
}

}  // namespace pod
