#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdc/errors.hpp"

namespace pdc {

// Config files are `key = value` lines; '#' starts a comment. A subcommand
// declares its key set with defaults; unknown keys in files or --set
// overrides are rejected. Precedence: defaults < file < PDC_SEED < --set.
// Every run writes the fully resolved set back out as a snapshot so reruns
// are exact.
class Config {
 public:
  struct KeyDef {
    std::string key;
    std::string default_value;
    std::string help;
  };

  static Config resolve(const std::vector<KeyDef>& schema,
                        const std::optional<std::filesystem::path>& file,
                        const std::vector<std::string>& overrides) {
    Config cfg;
    for (const KeyDef& def : schema) cfg.values_[def.key] = def.default_value;

    if (file) {
      std::ifstream f(*file);
      if (!f) throw io_error("cannot open config file: " + file->string());
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
          throw config_error(file->string() + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
        }
        cfg.set_known(trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                      file->string() + ":" + std::to_string(lineno));
      }
    }

    if (const char* env_seed = std::getenv("PDC_SEED")) {
      if (cfg.values_.count("seed")) cfg.values_["seed"] = env_seed;
    }

    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw config_error("--set expects key=value, got '" + kv + "'");
      }
      cfg.set_known(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "--set " + kv);
    }
    return cfg;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error("internal: unresolved config key " + key);
    return it->second;
  }

  long integer(const std::string& key) const {
    try {
      std::size_t pos = 0;
      const long v = std::stol(str(key), &pos);
      if (pos != str(key).size()) throw std::invalid_argument("trailing chars");
      return v;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "' expects an integer, got '" + str(key) + "'");
    }
  }

  std::uint64_t unsigned64(const std::string& key) const {
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(str(key), &pos);
      if (pos != str(key).size()) throw std::invalid_argument("trailing chars");
      return v;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "' expects an unsigned integer, got '" +
                         str(key) + "'");
    }
  }

  double real(const std::string& key) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(str(key), &pos);
      if (pos != str(key).size()) throw std::invalid_argument("trailing chars");
      return v;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "' expects a number, got '" + str(key) + "'");
    }
  }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config key '" + key + "' expects a boolean, got '" + v + "'");
  }

  void write_snapshot(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot write config snapshot: " + path.string());
    for (const auto& [k, v] : values_) f << k << " = " << v << '\n';
    if (!f) throw io_error("short write: " + path.string());
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void set_known(const std::string& key, const std::string& value, const std::string& where) {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw config_error("unknown config key '" + key + "' (" + where + ")");
    }
    it->second = value;
  }

  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace pdc
