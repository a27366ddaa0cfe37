#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace psw {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `name = value` configuration with `#` comments.
//
// Values are pulled out by the modules that own them with the take_* family;
// whatever is left untaken at the end is an unknown key and is reported by
// require_all_consumed().
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  // Inserts or overrides a value (used for command-line overrides).
  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const;

  std::optional<std::string> take_string(const std::string& key);
  std::string take_string(const std::string& key, const std::string& fallback);
  std::optional<double> take_double(const std::string& key);
  double take_double(const std::string& key, double fallback);
  std::optional<std::int64_t> take_int(const std::string& key);
  std::int64_t take_int(const std::string& key, std::int64_t fallback);
  bool take_bool(const std::string& key, bool fallback);

  // Throws ConfigError naming every key nobody took.
  void require_all_consumed() const;

  // Every key with its value, in file order (for manifests).
  std::vector<std::pair<std::string, std::string>> entries() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool taken = false;
  };
  const Entry* find(const std::string& key) const;
  Entry* find(const std::string& key);

  std::string source_ = "<config>";
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

// Records a resolved key=value list as a text manifest.
class Manifest {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, std::int64_t value);
  void write(const std::filesystem::path& path) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

std::string format_double(double value);

}  // namespace psw
