#include "wsense/kvconfig.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

namespace wsense {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// ptree's INI reader only understands ';' comments.
std::string normalise_comments(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t[0] == '#') continue;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig c;
  std::istringstream in(normalise_comments(text));
  try {
    boost::property_tree::ini_parser::read_ini(in, c.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  return c;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

const std::string* KvConfig::raw(const std::string& key) const {
  seen_.insert(key);
  const auto node = tree_.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
  if (!node || !node->empty()) return nullptr;
  return &node->data();
}

bool KvConfig::has(const std::string& key) const {
  return tree_.get_child_optional(boost::property_tree::ptree::path_type(key, '.')).has_value();
}

std::string KvConfig::get_string(const std::string& key, std::optional<std::string> fallback) const {
  if (const auto* v = raw(key)) return trim(*v);
  if (fallback) return *fallback;
  throw ConfigError(key, "missing");
}

double KvConfig::get_double(const std::string& key, std::optional<double> fallback) const {
  const auto* v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key, "missing");
  }
  const auto s = trim(*v);
  double out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key, "expected a number, got '" + s + "'");
  return out;
}

long long KvConfig::get_int(const std::string& key, std::optional<long long> fallback) const {
  const auto* v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key, "missing");
  }
  const auto s = trim(*v);
  long long out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key, "expected an integer, got '" + s + "'");
  return out;
}

bool KvConfig::get_bool(const std::string& key, std::optional<bool> fallback) const {
  const auto* v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(key, "missing");
  }
  auto s = trim(*v);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + s + "'");
}

void KvConfig::reject_unknown() const {
  for (const auto& [name, node] : tree_) {
    if (node.empty()) {
      if (!seen_.count(name)) throw ConfigError(name, "unknown key");
      continue;
    }
    for (const auto& [sub, leaf] : node) {
      const auto key = name + "." + sub;
      if (!seen_.count(key)) throw ConfigError(key, "unknown key");
    }
  }
}

}  // namespace wsense
