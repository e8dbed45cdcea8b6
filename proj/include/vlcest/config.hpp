#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vlcest {

/// Flat `key = value` configuration. `#` starts a comment; blank lines are ignored.
/// Later assignments override earlier ones, so flag overrides are just `set` calls.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool contains(const std::string& key) const { return entries_.contains(key); }
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Canonical `key = value` lines in key order.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Parses "a,b,c" or an inclusive range "start:stop:step".
std::vector<double> parse_number_list(const std::string& text);

/// 64-bit FNV-1a, used to fingerprint resolved configurations.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace vlcest
