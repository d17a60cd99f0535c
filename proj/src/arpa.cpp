#include "mona/arpa.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mona/errors.hpp"

namespace mona {

namespace {

std::string join(std::span<const std::string> words) {
  std::string key;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) key.push_back(' ');
    key += words[i];
  }
  return key;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view text, std::size_t line) {
  // std::from_chars for double is available in libstdc++ 11
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("bad number '" + std::string(text) + "'", line);
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

}  // namespace

ArpaModel ArpaModel::parse(std::istream& in) {
  ArpaModel model;
  std::vector<std::size_t> declared;
  enum class State { Preamble, Data, Grams, End } state = State::Preamble;
  int current = 0;
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line == "\\data\\") {
      if (state != State::Preamble) throw ParseError("duplicate \\data\\ section", line_no);
      state = State::Data;
      continue;
    }
    if (line == "\\end\\") {
      if (state != State::Grams) throw ParseError("\\end\\ before any n-gram section", line_no);
      state = State::End;
      break;
    }
    if (line.front() == '\\') {
      // \N-grams:
      const auto dash = line.find("-grams:");
      if (dash == std::string_view::npos || state == State::Preamble) {
        throw ParseError("unexpected section header '" + std::string(line) + "'", line_no);
      }
      int n = 0;
      auto [p, ec] = std::from_chars(line.data() + 1, line.data() + dash, n);
      if (ec != std::errc() || p != line.data() + dash || n < 1) throw ParseError("bad n-gram header", line_no);
      if (n != current + 1) throw ParseError("n-gram sections out of order", line_no);
      if (static_cast<std::size_t>(n) > declared.size()) throw ParseError("section for undeclared order", line_no);
      if (current > 0 && model.tables_[current - 1].size() != declared[current - 1]) {
        throw ParseError(std::to_string(current) + "-gram count mismatch: declared " +
                             std::to_string(declared[current - 1]) + ", found " +
                             std::to_string(model.tables_[current - 1].size()),
                         line_no);
      }
      current = n;
      model.tables_.emplace_back();
      state = State::Grams;
      continue;
    }
    switch (state) {
      case State::Preamble:
        continue;  // free text before \data\ is allowed
      case State::Data: {
        if (line.substr(0, 6) != "ngram ") throw ParseError("expected 'ngram N=count'", line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'ngram N=count'", line_no);
        int n = 0;
        std::size_t cnt = 0;
        const std::string_view lhs = trim(line.substr(6, eq - 6)), rhs = trim(line.substr(eq + 1));
        auto r1 = std::from_chars(lhs.data(), lhs.data() + lhs.size(), n);
        auto r2 = std::from_chars(rhs.data(), rhs.data() + rhs.size(), cnt);
        if (r1.ec != std::errc() || r2.ec != std::errc() || n != static_cast<int>(declared.size()) + 1) {
          throw ParseError("bad ngram count line", line_no);
        }
        declared.push_back(cnt);
        break;
      }
      case State::Grams: {
        const auto fields = split_ws(line);
        const std::size_t n = static_cast<std::size_t>(current);
        if (fields.size() != n + 1 && fields.size() != n + 2) {
          throw ParseError("expected " + std::to_string(n) + " words in " + std::to_string(n) + "-gram entry",
                           line_no);
        }
        Entry e;
        e.log10_prob = parse_double(fields[0], line_no);
        if (e.log10_prob > 0.0) throw ParseError("positive log10 probability", line_no);
        if (fields.size() == n + 2) e.log10_backoff = parse_double(fields[n + 1], line_no);
        std::vector<std::string> words;
        for (std::size_t k = 1; k <= n; ++k) words.emplace_back(fields[k]);
        if (n > 1 && model.find(std::span(words).first(n - 1)) == nullptr) {
          throw ParseError("prefix of '" + join(words) + "' missing at order " + std::to_string(n - 1), line_no);
        }
        if (!model.tables_.back().emplace(join(words), e).second) {
          throw ParseError("duplicate n-gram '" + join(words) + "'", line_no);
        }
        break;
      }
      case State::End:
        break;
    }
  }
  if (state != State::End) throw ParseError("missing \\end\\", line_no);
  if (model.tables_.size() != declared.size()) throw ParseError("declared orders without sections", line_no);
  if (!model.tables_.empty() && model.tables_.back().size() != declared.back()) {
    throw ParseError(std::to_string(current) + "-gram count mismatch", line_no);
  }
  return model;
}

ArpaModel ArpaModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open language model '" + path + "'");
  return parse(in);
}

bool ArpaModel::contains(std::string_view word) const {
  return !tables_.empty() && tables_[0].count(std::string(word)) > 0;
}

const ArpaModel::Entry* ArpaModel::find(std::span<const std::string> words) const {
  if (words.empty() || words.size() > tables_.size()) return nullptr;
  const auto& table = tables_[words.size() - 1];
  auto it = table.find(join(words));
  return it == table.end() ? nullptr : &it->second;
}

double ArpaModel::log10_prob(std::span<const std::string> context, const std::string& word) const {
  if (tables_.empty()) return oov_log10_;
  const std::size_t max_ctx = tables_.size() - 1;
  if (context.size() > max_ctx) context = context.last(max_ctx);
  std::vector<std::string> gram(context.begin(), context.end());
  gram.push_back(word);
  double backoff = 0.0;
  for (std::size_t start = 0; start < gram.size(); ++start) {
    std::span<const std::string> g = std::span<const std::string>(gram).subspan(start);
    if (const Entry* e = find(g)) return backoff + e->log10_prob;
    if (const Entry* ctx = find(g.first(g.size() - 1))) backoff += ctx->log10_backoff;
  }
  static const std::string kUnk = "<unk>";
  if (const Entry* unk = find(std::span<const std::string>(&kUnk, 1))) return backoff + unk->log10_prob;
  return backoff + oov_log10_;
}

double ArpaModel::sentence_log10(std::span<const std::string> words) const {
  std::vector<std::string> history = {"<s>"};
  double total = 0.0;
  for (const std::string& w : words) {
    total += log10_prob(history, w);
    history.push_back(w);
  }
  return total + log10_prob(history, "</s>");
}

}  // namespace mona
