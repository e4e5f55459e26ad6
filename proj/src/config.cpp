#include "normlab/config.hpp"

#include <cstdlib>
#include <fstream>

namespace normlab {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap parse_config_file(const std::filesystem::path& path,
                            const std::string& subcommand) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(subcommand, path.string(), "cannot open config file");
  ConfigMap cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(subcommand, line,
                        "line " + std::to_string(lineno) + " is not key = value:");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(subcommand, line,
                        "empty key on line " + std::to_string(lineno) + ":");
    cfg[key] = value;
  }
  return cfg;
}

void apply_override(ConfigMap& cfg, const std::string& token,
                    const std::string& subcommand) {
  const auto eq = token.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(subcommand, token, "override is not key=value:");
  cfg[trim(token.substr(0, eq))] = trim(token.substr(eq + 1));
}

ConfigView::ConfigView(ConfigMap values, std::string subcommand,
                       const std::set<std::string>& allowed)
    : values_(std::move(values)), subcommand_(std::move(subcommand)) {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key))
      throw ConfigError(subcommand_, key, "unknown key");
  }
}

void ConfigView::fail(const std::string& key, const std::string& msg) const {
  throw ConfigError(subcommand_, key, msg);
}

double ConfigView::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    fail(key, "expected a real number for");
  return v;
}

int ConfigView::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    fail(key, "expected an integer for");
  return static_cast<int>(v);
}

std::uint64_t ConfigView::get_u64(const std::string& key,
                                  std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    fail(key, "expected an unsigned integer for");
  return v;
}

bool ConfigView::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected a boolean for");
}

std::string ConfigView::get_string(const std::string& key,
                                   std::string fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::vector<double> ConfigView::get_list(const std::string& key,
                                         std::vector<double> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::size_t pos = 0;
  const std::string& s = it->second;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item =
        trim(s.substr(pos, comma == std::string::npos ? std::string::npos
                                                      : comma - pos));
    if (item.empty()) fail(key, "empty element in list for");
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') fail(key, "bad list element in");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) fail(key, "empty list for");
  return out;
}

}  // namespace normlab
