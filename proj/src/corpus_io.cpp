#include "mona/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hex_rows.hpp"
#include "mona/errors.hpp"

namespace mona {

namespace {

constexpr int kCorpusVersion = 1;

struct SizeField {
  const char* key;
  std::size_t SyntheticCorpusConfig::*member;
};
struct RealField {
  const char* key;
  double SyntheticCorpusConfig::*member;
};

using C = SyntheticCorpusConfig;
constexpr SizeField kSizeFields[] = {
    {"letters", &C::letters},
    {"vocabulary", &C::vocabulary},
    {"min_word_len", &C::min_word_len},
    {"max_word_len", &C::max_word_len},
    {"min_words", &C::min_words},
    {"max_words", &C::max_words},
    {"min_letter_frames", &C::min_letter_frames},
    {"max_letter_frames", &C::max_letter_frames},
    {"min_silence_frames", &C::min_silence_frames},
    {"max_silence_frames", &C::max_silence_frames},
    {"silent", &C::silent},
    {"vocal", &C::vocal},
    {"librispeech", &C::librispeech},
    {"val_silent", &C::val_silent},
    {"val_vocal", &C::val_vocal},
    {"val_librispeech", &C::val_librispeech},
    {"source_dim", &C::source_dim},
    {"emg_features", &C::emg_features},
    {"audio_features", &C::audio_features},
};
constexpr RealField kRealFields[] = {
    {"coarticulation", &C::coarticulation}, {"source_noise", &C::source_noise},
    {"audio_noise", &C::audio_noise},       {"emg_noise", &C::emg_noise},
    {"silent_shift", &C::silent_shift},     {"warp_min", &C::warp_min},
    {"warp_max", &C::warp_max},             {"warp_jitter", &C::warp_jitter},
};

std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

Split split_from_string(const std::string& s, std::size_t line) {
  for (Split v : {Split::Train, Split::Validation, Split::Test})
    if (to_string(v) == s) return v;
  throw ParseError("unknown split '" + s + "'", line);
}

}  // namespace

void write_corpus_config(std::ostream& out, const SyntheticCorpusConfig& config) {
  for (const auto& f : kSizeFields) out << "corpus." << f.key << " = " << config.*f.member << '\n';
  for (const auto& f : kRealFields) out << "corpus." << f.key << " = " << shortest(config.*f.member) << '\n';
  out << "corpus.seed = " << config.seed << '\n';
}

SyntheticCorpusConfig read_corpus_config(KeyValueConfig& kv, SyntheticCorpusConfig c) {
  for (const auto& f : kSizeFields) c.*f.member = kv.get_size(std::string("corpus.") + f.key, c.*f.member);
  for (const auto& f : kRealFields) c.*f.member = kv.get_double(std::string("corpus.") + f.key, c.*f.member);
  c.seed = kv.get_u64("corpus.seed", c.seed);
  return c;
}

void save_corpus(std::ostream& out, const Corpus& corpus) {
  out << "mona-corpus " << kCorpusVersion << '\n';
  write_corpus_config(out, corpus.config);
  out << "end-config\n";
  out << "vocabulary";
  for (const auto& w : corpus.vocabulary) out << ' ' << w;
  out << '\n';
  for (const auto& u : corpus.utterances) {
    out << "utterance " << u.id << ' ' << to_string(u.cls) << ' ' << to_string(u.split) << ' '
        << (u.parallel ? std::to_string(*u.parallel) : "-") << '\n';
    out << "text " << u.text << '\n';
    out << "phonemes";
    for (int p : u.phonemes) out << ' ' << p;
    out << '\n';
    for (const auto& [name, signal] : {std::pair{"emg", &u.emg}, std::pair{"audio", &u.audio}}) {
      if (!*signal) continue;
      out << name << ' ' << (*signal)->rows() << ' ' << (*signal)->cols() << '\n';
      detail::write_hex_row(out, (*signal)->data());
    }
  }
  out << "end\n";
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write corpus '" + path + "'");
  save_corpus(out, corpus);
  if (!out) throw ConfigError("failed writing corpus '" + path + "'");
}

Corpus load_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&] {
    if (!std::getline(in, line)) throw ParseError("truncated corpus", line_no);
    ++line_no;
  };
  next();
  if (line != "mona-corpus " + std::to_string(kCorpusVersion)) throw ParseError("not a corpus file", line_no);

  std::ostringstream config_text;
  for (next(); line != "end-config"; next()) config_text << line << '\n';
  std::istringstream config_in(config_text.str());
  KeyValueConfig kv = KeyValueConfig::parse(config_in);
  Corpus corpus;
  corpus.config = read_corpus_config(kv);
  kv.finish();
  corpus.config.validate();
  corpus.alphabet = Alphabet::lowercase(corpus.config.letters);

  next();
  {
    std::istringstream s(line);
    std::string key, w;
    if (!(s >> key) || key != "vocabulary") throw ParseError("expected vocabulary", line_no);
    while (s >> w) corpus.vocabulary.push_back(w);
  }
  Utterance* u = nullptr;
  for (next(); line != "end"; next()) {
    std::istringstream s(line);
    std::string key;
    s >> key;
    if (key == "utterance") {
      std::string cls, split, parallel;
      Utterance fresh;
      if (!(s >> fresh.id >> cls >> split >> parallel)) throw ParseError("bad utterance header", line_no);
      try {
        fresh.cls = dataset_class_from_string(cls);
      } catch (const ConfigError&) {
        throw ParseError("unknown class '" + cls + "'", line_no);
      }
      fresh.split = split_from_string(split, line_no);
      if (parallel != "-") {
        std::size_t p = 0;
        auto [end, ec] = std::from_chars(parallel.data(), parallel.data() + parallel.size(), p);
        if (ec != std::errc() || end != parallel.data() + parallel.size()) throw ParseError("bad parallel index", line_no);
        fresh.parallel = p;
      }
      corpus.utterances.push_back(std::move(fresh));
      u = &corpus.utterances.back();
      continue;
    }
    if (!u) throw ParseError("expected utterance header", line_no);
    if (key == "text") {
      u->text = line.size() > 5 ? line.substr(5) : "";
    } else if (key == "phonemes") {
      int p = 0;
      while (s >> p) u->phonemes.push_back(p);
      if (!s.eof()) throw ParseError("bad phoneme id", line_no);
    } else if (key == "emg" || key == "audio") {
      std::size_t rows = 0, cols = 0;
      if (!(s >> rows >> cols)) throw ParseError("bad signal header", line_no);
      if (cols != u->frames()) throw ParseError("signal length differs from phoneme count", line_no);
      Tensor t({rows, cols});
      next();
      if (!detail::read_hex_row(line, t.data())) throw ParseError("bad signal values", line_no);
      (key == "emg" ? u->emg : u->audio) = std::move(t);
    } else {
      throw ParseError("unexpected '" + key + "'", line_no);
    }
  }
  for (const auto& u : corpus.utterances)
    if (u.parallel && *u.parallel >= corpus.utterances.size()) throw ParseError("parallel index out of range", line_no);
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus '" + path + "'");
  return load_corpus(in);
}

void write_manifest(std::ostream& out, const Corpus& corpus) {
  out << "id\tclass\tsplit\tframes\tparallel\ttext\n";
  for (const auto& u : corpus.utterances) {
    out << u.id << '\t' << to_string(u.cls) << '\t' << to_string(u.split) << '\t' << u.frames() << '\t'
        << (u.parallel ? corpus.utterances[*u.parallel].id : "-") << '\t' << u.text << '\n';
  }
}

}  // namespace mona
