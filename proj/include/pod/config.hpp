#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace pod {

/// Plain `key = value` lines with optional `[section]` headers; keys inside
/// a section are stored as `section.key`. `#` starts a comment outside
/// quotes, and double-quoted values may contain spaces.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  std::uint64_t digest() const;

 private:
  std::map<std::string, std::string> values_;
};

int parse_int(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);

}  // namespace pod
