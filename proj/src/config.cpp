#include "mona/config.hpp"

#include <charconv>
#include <fstream>

#include "mona/errors.hpp"

namespace mona {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line);
    cfg.values_[key] = {trim(text.substr(eq + 1)), line};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in);
}

const KeyValueConfig::Entry* KeyValueConfig::lookup(const std::string& key) {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = lookup(key);
  return e ? e->value : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  const Entry* e = lookup(key);
  return e ? parse_number<double>(key, e->value) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) {
  const Entry* e = lookup(key);
  return e ? parse_number<std::size_t>(key, e->value) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const Entry* e = lookup(key);
  return e ? parse_number<std::uint64_t>(key, e->value) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + e->value + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key, const std::vector<std::string>& fallback) {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= e->value.size()) {
    const auto comma = e->value.find(',', start);
    const std::string item = trim(e->value.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void KeyValueConfig::finish() const {
  for (const auto& [key, entry] : values_)
    if (!used_.count(key)) {
      throw ConfigError("unknown config key '" + key + "'" +
                        (entry.line ? " (line " + std::to_string(entry.line) + ")" : std::string(" (override)")));
    }
}

}  // namespace mona
