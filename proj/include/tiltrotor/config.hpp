#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace tiltrotor {

/// Flat `key = value` configuration file. Lines starting with '#' are comments,
/// blank lines are ignored, duplicate keys are rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(std::string_view text, std::string source = "<string>");

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& source() const { return source_; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::string source_;
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a, used for config and checkpoint fingerprints in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_file_hex(const std::filesystem::path& path);
std::string to_hex(std::uint64_t value);

}  // namespace tiltrotor
