#include "mona/decoding.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "mona/errors.hpp"

namespace mona {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct Prefix {
  double blank = kNegInf;      // paths ending in blank
  double non_blank = kNegInf;  // paths ending in the last symbol
  double lm = 0.0;             // alpha-free natural-log LM score of closed words
  std::size_t words = 0;

  double acoustic() const { return log_add(blank, non_blank); }
};

struct Searcher {
  const Alphabet& alphabet;
  const ArpaModel* lm;
  const DecodeConfig& cfg;

  bool use_lm() const { return lm != nullptr && cfg.lm_weight != 0.0; }

  // LM state for `text + c` given the state of `text`.
  void extend_lm(const std::string& text, const Prefix& from, char c, Prefix& to) const {
    to.lm = from.lm;
    to.words = from.words;
    if (c != ' ' || text.empty() || text.back() == ' ') return;
    ++to.words;
    if (!use_lm()) return;
    auto words = split_words(text);
    std::vector<std::string> ctx = {"<s>"};
    ctx.insert(ctx.end(), words.begin(), words.end() - 1);
    to.lm += std::numbers::ln10 * lm->log10_prob(ctx, words.back());
  }

  double search_score(const Prefix& p) const {
    return p.acoustic() + cfg.lm_weight * p.lm + cfg.word_bonus * static_cast<double>(p.words);
  }
};

}  // namespace

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (!std::isfinite(lm_weight) || !std::isfinite(word_bonus)) throw ConfigError("LM weights must be finite");
}

std::string to_string(NBestSource s) { return s == NBestSource::BeamSearch ? "beam_search" : "ensemble"; }

NBestSource nbest_source_from_string(std::string_view s) {
  if (s == "beam_search") return NBestSource::BeamSearch;
  if (s == "ensemble") return NBestSource::Ensemble;
  throw ConfigError("unknown n-best source '" + std::string(s) + "'");
}

void NBestList::validate() const {
  if (entries.empty()) throw ContractError("n-best list for '" + utterance + "' is empty");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].combined > entries[i - 1].combined) {
      throw ContractError("n-best scores increase at rank " + std::to_string(i + 1));
    }
    if (!seen.insert(entries[i].transcript).second) {
      throw ContractError("duplicate n-best transcript '" + entries[i].transcript + "'");
    }
  }
}

const NBestEntry& NBestList::top() const {
  if (entries.empty()) throw ContractError("n-best list for '" + utterance + "' is empty");
  return entries.front();
}

std::vector<std::string> NBestList::transcripts() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.transcript);
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) out.emplace_back(text.substr(b, i - b));
  }
  return out;
}

std::vector<int> greedy_ctc_ids(const Tensor& logits, int blank) {
  if (logits.rank() != 2) throw DimensionError("greedy decode expects T x K logits");
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    int best = 0;
    for (std::size_t k = 1; k < logits.cols(); ++k)
      if (logits(t, k) > logits(t, static_cast<std::size_t>(best))) best = static_cast<int>(k);
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

std::string greedy_ctc_decode(const Tensor& logits, const Alphabet& alphabet) {
  if (logits.rank() == 2 && logits.cols() != alphabet.size()) {
    throw DimensionError("logits have " + std::to_string(logits.cols()) + " classes, alphabet has " +
                         std::to_string(alphabet.size()));
  }
  return alphabet.decode(greedy_ctc_ids(logits, alphabet.blank()));
}

double combined_score(double acoustic, double lm, std::size_t words, const DecodeConfig& cfg) {
  return acoustic + cfg.lm_weight * lm + cfg.word_bonus * static_cast<double>(words);
}

double lm_score(const ArpaModel& lm, std::string_view transcript) {
  const auto words = split_words(transcript);
  return std::numbers::ln10 * lm.sentence_log10(words);
}

NBestList beam_search(const Tensor& logits, const Alphabet& alphabet, const ArpaModel* lm,
                      const DecodeConfig& cfg, std::size_t k) {
  cfg.validate();
  if (logits.rank() != 2 || logits.rows() == 0) throw PreconditionError("beam search needs nonempty T x K logits");
  if (logits.cols() != alphabet.size()) {
    throw DimensionError("logits have " + std::to_string(logits.cols()) + " classes, alphabet has " +
                         std::to_string(alphabet.size()));
  }
  if (k < 1 || k > cfg.beam_width) throw PreconditionError("k must be in [1, beam_width]");
  if (!logits.all_finite()) throw PreconditionError("logits contain non-finite values");

  const Tensor logp = log_softmax_rows(logits);
  const std::size_t T = logp.rows(), K = logp.cols();
  const int blank = alphabet.blank();
  Searcher s{alphabet, lm, cfg};

  using Beam = std::unordered_map<std::string, Prefix>;
  Beam beam;
  beam[""].blank = 0.0;

  std::vector<std::pair<double, const std::string*>> order;
  for (std::size_t t = 0; t < T; ++t) {
    Beam next;
    next.reserve(beam.size() * K);
    const double pb = logp(t, static_cast<std::size_t>(blank));
    // Carry LM state over for surviving prefixes; acoustic mass is rebuilt.
    for (const auto& [text, p] : beam) {
      Prefix& stay = next.try_emplace(text, p).first->second;
      stay.blank = stay.non_blank = kNegInf;
    }
    for (const auto& [text, p] : beam) {
      const double total = p.acoustic();
      Prefix& same = next.at(text);
      same.blank = log_add(same.blank, total + pb);
      const char last = text.empty() ? '\0' : text.back();
      for (std::size_t c = 0; c < K; ++c) {
        if (static_cast<int>(c) == blank) continue;
        const double pc = logp(t, c);
        const char ch = alphabet.symbol(static_cast<int>(c));
        std::string ext = text + ch;
        auto [it, inserted] = next.try_emplace(std::move(ext));
        Prefix& e = it->second;
        if (inserted) s.extend_lm(text, p, ch, e);
        if (ch == last) {
          e.non_blank = log_add(e.non_blank, p.blank + pc);
          same.non_blank = log_add(same.non_blank, p.non_blank + pc);
        } else {
          e.non_blank = log_add(e.non_blank, total + pc);
        }
      }
    }
    // Prune to the beam width with a deterministic tie-break.
    order.clear();
    for (const auto& [text, p] : next) {
      if (p.acoustic() == kNegInf) continue;
      order.emplace_back(s.search_score(p), &text);
    }
    const std::size_t keep = std::min(cfg.beam_width, order.size());
    auto better = [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : *a.second < *b.second;
    };
    if (keep < order.size()) std::nth_element(order.begin(), order.begin() + static_cast<long>(keep), order.end(), better);
    Beam pruned;
    pruned.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) pruned.emplace(*order[i].second, next.at(*order[i].second));
    beam = std::move(pruned);
  }

  // Close the final word and the sentence, then dedupe on the normalized text.
  std::unordered_map<std::string, NBestEntry> finals;
  for (const auto& [text, p] : beam) {
    NBestEntry e;
    e.transcript = normalize_transcript(text);
    e.acoustic = p.acoustic();
    const auto words = split_words(e.transcript);
    e.lm = 0.0;
    if (s.use_lm()) e.lm = std::numbers::ln10 * lm->sentence_log10(words);
    e.combined = combined_score(e.acoustic, e.lm, words.size(), cfg);
    auto [it, inserted] = finals.try_emplace(e.transcript, e);
    if (!inserted && e.combined > it->second.combined) it->second = e;
  }
  NBestList out;
  out.source = NBestSource::BeamSearch;
  for (auto& [text, e] : finals) out.entries.push_back(std::move(e));
  std::sort(out.entries.begin(), out.entries.end(), [](const NBestEntry& a, const NBestEntry& b) {
    return a.combined != b.combined ? a.combined > b.combined : a.transcript < b.transcript;
  });
  if (out.entries.size() > k) out.entries.resize(k);
  return out;
}

std::vector<NBestList> beam_search_batch(std::span<const Tensor> logits, const Alphabet& alphabet,
                                         const ArpaModel* lm, const DecodeConfig& cfg, std::size_t k,
                                         unsigned threads) {
  std::vector<NBestList> out(logits.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, logits.size())));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = cursor++; i < logits.size(); i = cursor++) {
        out[i] = beam_search(logits[i], alphabet, lm, cfg, k);
      }
    } catch (...) {
      errors[w] = std::current_exception();
      cursor = logits.size();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_nbest(std::ostream& out, std::span<const NBestList> lists) {
  char buf[64];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  for (const auto& list : lists) {
    out << "# utterance " << list.utterance << ' ' << to_string(list.source) << '\n';
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      const auto& e = list.entries[i];
      out << (i + 1) << '\t' << num(e.combined) << '\t' << num(e.acoustic) << '\t' << num(e.lm) << '\t'
          << e.transcript << '\n';
    }
  }
}

std::vector<NBestList> read_nbest(std::istream& in) {
  std::vector<NBestList> lists;
  std::string line;
  std::size_t line_no = 0;
  auto parse_num = [&](std::string_view f) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) throw ParseError("bad score '" + std::string(f) + "'", line_no);
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# utterance ", 0) == 0) {
      const std::string rest = line.substr(12);
      const auto sp = rest.rfind(' ');
      if (sp == std::string::npos || sp == 0) throw ParseError("bad utterance header", line_no);
      NBestList list;
      list.utterance = rest.substr(0, sp);
      try {
        list.source = nbest_source_from_string(rest.substr(sp + 1));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_no);
      }
      lists.push_back(std::move(list));
      continue;
    }
    if (lists.empty()) throw ParseError("n-best row before any utterance header", line_no);
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (int i = 0; i < 4; ++i) {
      const auto tab = rest.find('\t');
      if (tab == std::string_view::npos) throw ParseError("expected 5 tab-separated fields", line_no);
      f.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    std::size_t rank = 0;
    auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), rank);
    auto& list = lists.back();
    if (ec != std::errc() || rank != list.entries.size() + 1) throw ParseError("ranks must count up from 1", line_no);
    list.entries.push_back({std::string(rest), parse_num(f[2]), parse_num(f[3]), parse_num(f[1])});
  }
  for (const auto& l : lists) l.validate();
  return lists;
}

}  // namespace mona
