#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Flat `key = value` experiment configs. A file supplies the base values,
// command-line `key=value` overrides win over the file, and the dedicated
// --seed/--out flags win over both.

namespace normlab {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& subcommand, const std::string& key,
              const std::string& message)
      : std::runtime_error(subcommand + ": " + message +
                           (key.empty() ? "" : " '" + key + "'")),
        subcommand_(subcommand),
        key_(key) {}

  const std::string& subcommand() const { return subcommand_; }
  const std::string& key() const { return key_; }

 private:
  std::string subcommand_;
  std::string key_;
};

using ConfigMap = std::map<std::string, std::string>;

// `#` starts a comment, blank lines are skipped, later duplicates win.
ConfigMap parse_config_file(const std::filesystem::path& path,
                            const std::string& subcommand);

// Applies one `key=value` token on top of an existing map.
void apply_override(ConfigMap& cfg, const std::string& token,
                    const std::string& subcommand);

// Typed access with defaults. Construction rejects keys outside `allowed`
// naming the offending key and the subcommand.
class ConfigView {
 public:
  ConfigView(ConfigMap values, std::string subcommand,
             const std::set<std::string>& allowed);

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  // Comma-separated list of reals; a single value is a one-element list.
  std::vector<double> get_list(const std::string& key,
                               std::vector<double> fallback) const;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

 private:
  ConfigMap values_;
  std::string subcommand_;
};

}  // namespace normlab
