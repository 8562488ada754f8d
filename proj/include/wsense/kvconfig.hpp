#pragma once

// INI-style configuration: "key = value" lines, optional [section] headers,
// ';' or '#' comments. Keys are addressed as "section.key".

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include <boost/property_tree/ptree.hpp>

namespace wsense {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig load(const std::filesystem::path& path);
  static KvConfig parse(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  long long get_int(const std::string& key, std::optional<long long> fallback = std::nullopt) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const;

  /// Throws ConfigError for the first key that no getter has asked for.
  void reject_unknown() const;

 private:
  const std::string* raw(const std::string& key) const;

  boost::property_tree::ptree tree_;
  mutable std::set<std::string> seen_;
};

}  // namespace wsense
