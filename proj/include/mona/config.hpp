#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mona {

/// Line-oriented `key = value` settings. `#` starts a comment; later keys
/// override earlier ones. Every key must be read (or explicitly ignored)
/// before finish() so misspelled keys are reported.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = {value, 0}; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback);

  /// Throws ConfigError naming the first key that nobody read.
  void finish() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* lookup(const std::string& key);

  std::map<std::string, Entry> values_;
  std::set<std::string> used_;
};

}  // namespace mona
