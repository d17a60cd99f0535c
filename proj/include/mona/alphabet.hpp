#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mona {

/// Output symbol inventory for CTC: a blank plus one id per character.
class Alphabet {
 public:
  /// `symbols` lists the non-blank characters in id order; the blank is
  /// inserted at id `blank`.
  explicit Alphabet(std::string symbols, int blank = 0);

  /// Space followed by the first `letters` lowercase letters, blank at 0.
  static Alphabet lowercase(std::size_t letters);

  std::size_t size() const { return symbols_.size() + 1; }
  int blank() const { return blank_; }
  char symbol(int id) const;
  int id(char c) const;
  bool contains(char c) const;
  const std::string& symbols() const { return symbols_; }

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

 private:
  std::string symbols_;
  int blank_;
};

/// Trims and collapses runs of spaces.
std::string normalize_transcript(std::string_view text);

}  // namespace mona
