#include "mona/alphabet.hpp"

#include <string>

#include "mona/errors.hpp"

namespace mona {

Alphabet::Alphabet(std::string symbols, int blank) : symbols_(std::move(symbols)), blank_(blank) {
  if (blank_ < 0 || static_cast<std::size_t>(blank_) > symbols_.size()) {
    throw ConfigError("blank index outside the alphabet");
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_.find(symbols_[i], i + 1) != std::string::npos) {
      throw ConfigError(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
    }
}

Alphabet Alphabet::lowercase(std::size_t letters) {
  if (letters == 0 || letters > 26) throw ConfigError("alphabet needs 1..26 letters");
  std::string s = " ";
  for (std::size_t i = 0; i < letters; ++i) s.push_back(static_cast<char>('a' + i));
  return Alphabet(s, 0);
}

char Alphabet::symbol(int id) const {
  if (id == blank_ || id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw PreconditionError("no printable symbol for id " + std::to_string(id));
  }
  return symbols_[static_cast<std::size_t>(id < blank_ ? id : id - 1)];
}

int Alphabet::id(char c) const {
  const auto pos = symbols_.find(c);
  if (pos == std::string::npos) throw PreconditionError(std::string("character '") + c + "' not in alphabet");
  const int i = static_cast<int>(pos);
  return i < blank_ ? i : i + 1;
}

bool Alphabet::contains(char c) const { return symbols_.find(c) != std::string::npos; }

std::vector<int> Alphabet::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(id(c));
  return out;
}

std::string Alphabet::decode(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(symbol(i));
  return out;
}

std::string normalize_transcript(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace mona
