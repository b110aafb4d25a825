#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace overnet {

// Error taxonomy used across the library. The CLI maps these to exit codes:
// ConfigError -> 2, IoError -> 3, NumericError -> 4, ScaleError -> 5.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested scale exceeds what a model/checkpoint supports.
class ScaleError : public UsageError {
 public:
  explicit ScaleError(const std::string& msg) : UsageError(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r'))
    --b;
  return s.substr(a, b - a);
}

// One `key = value` line; empty and `#` comment lines yield nullopt.
// A line that is neither is a ConfigError.
inline std::optional<std::pair<std::string, std::string>> parse_kv_line(
    const std::string& raw) {
  std::string line = raw;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return std::nullopt;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected `key = value`, got: " + trim(raw));
  std::string key = trim(line.substr(0, eq));
  std::string val = trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError("missing key in line: " + trim(raw));
  return std::make_pair(std::move(key), std::move(val));
}

}  // namespace detail

}  // namespace overnet
