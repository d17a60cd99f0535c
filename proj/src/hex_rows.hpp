#pragma once

#include <charconv>
#include <ostream>
#include <span>
#include <string_view>

namespace mona::detail {

// Space-separated hex floats; exact round trip.
inline void write_hex_row(std::ostream& out, std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, values[i], std::chars_format::hex);
    out << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(p - buf));
  }
  out << '\n';
}

// False on a malformed token or a count mismatch.
inline bool read_hex_row(std::string_view rest, std::span<double> out) {
  for (double& v : out) {
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    const auto end = rest.find(' ');
    const std::string_view tok = rest.substr(0, end);
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) return false;
    rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
  }
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  return rest.empty();
}

}  // namespace mona::detail
