#include "mona/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mona/errors.hpp"

namespace mona {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

void SyntheticCorpusConfig::validate() const {
  if (letters < 2 || letters > 26) throw ConfigError("letters must be in [2, 26]");
  if (min_word_len < 1 || min_word_len > max_word_len) throw ConfigError("bad word length range");
  if (min_words < 1 || min_words > max_words) throw ConfigError("bad words-per-utterance range");
  if (min_letter_frames < 1 || min_letter_frames > max_letter_frames) throw ConfigError("bad letter frame range");
  if (min_silence_frames < 1 || min_silence_frames > max_silence_frames) throw ConfigError("bad silence frame range");
  if (silent > vocal || val_silent > val_vocal) throw ConfigError("each silent utterance needs its own vocalized reading");
  if (vocabulary < 1) throw ConfigError("vocabulary must be nonempty");
  if (source_dim < 1 || emg_features < 1 || audio_features < 1) throw ConfigError("feature sizes must be >= 1");
  if (warp_min <= 0.0 || warp_min > warp_max) throw ConfigError("bad warp range");
  if (warp_jitter < 0.0 || warp_jitter >= 1.0) throw ConfigError("warp_jitter must be in [0, 1)");
  for (double v : {source_noise, audio_noise, emg_noise, silent_shift, coarticulation})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("noise levels must be finite and >= 0");
  // distinct words need enough letter strings with no adjacent repeats
  double possible = 0.0;
  for (std::size_t n = min_word_len; n <= max_word_len; ++n)
    possible += static_cast<double>(letters) * std::pow(static_cast<double>(letters - 1), static_cast<double>(n - 1));
  if (possible < static_cast<double>(vocabulary)) throw ConfigError("vocabulary larger than the word space");
}

std::vector<std::size_t> Corpus::select(DatasetClass cls, Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i)
    if (utterances[i].cls == cls && utterances[i].split == split) out.push_back(i);
  return out;
}

std::vector<int> phoneme_spelling(const Alphabet& alphabet, std::string_view text) {
  std::vector<int> out;
  for (char c : text)
    if (c != ' ') out.push_back(alphabet.id(c) - 1);
  return out;
}

std::vector<int> collapse_phonemes(const std::vector<int>& frames) {
  std::vector<int> out;
  int prev = -1;
  for (int p : frames) {
    if (p != prev && p != kSilencePhoneme) out.push_back(p);
    prev = p;
  }
  return out;
}

std::vector<PackingItem> training_items(const Corpus& corpus, const std::vector<DatasetClass>& classes) {
  std::vector<PackingItem> out;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const Utterance& u = corpus.utterances[i];
    if (u.split != Split::Train) continue;
    if (std::find(classes.begin(), classes.end(), u.cls) == classes.end()) continue;
    out.push_back({i, u.frames(), u.cls});
  }
  return out;
}

namespace {

using Rng = std::mt19937_64;

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor m({rows, cols});
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : m.data()) v = n(rng);
  return m;
}

// Segment = one phoneme run: (phoneme, frames).
using Segments = std::vector<std::pair<int, std::size_t>>;

class Generator {
 public:
  explicit Generator(const SyntheticCorpusConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.source_dim));
    prototypes_ = gaussian_matrix(rng_, cfg.letters + 1, cfg.source_dim, 1.0);
    audio_mix_ = gaussian_matrix(rng_, cfg.audio_features, cfg.source_dim, scale);
    emg_mix_ = gaussian_matrix(rng_, cfg.emg_features, cfg.source_dim, 1.5 * scale);
    silent_mix_ = gaussian_matrix(rng_, cfg.emg_features, cfg.source_dim, scale);
    for (std::size_t i = 0; i < silent_mix_.size(); ++i)
      silent_mix_.data()[i] = emg_mix_.data()[i] + cfg.silent_shift * silent_mix_.data()[i];
  }

  std::vector<std::string> vocabulary() {
    std::set<std::string> seen;
    std::vector<std::string> words;
    while (words.size() < cfg_.vocabulary) {
      const std::size_t len = uniform_size(rng_, cfg_.min_word_len, cfg_.max_word_len);
      std::string w;
      while (w.size() < len) {
        const char c = static_cast<char>('a' + uniform_size(rng_, 0, cfg_.letters - 1));
        if (w.empty() || w.back() != c) w.push_back(c);
      }
      if (seen.insert(w).second) words.push_back(w);
    }
    return words;
  }

  std::string sentence(const std::vector<std::string>& vocab) {
    const std::size_t n = uniform_size(rng_, cfg_.min_words, cfg_.max_words);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s.push_back(' ');
      s += vocab[uniform_size(rng_, 0, vocab.size() - 1)];
    }
    return s;
  }

  Segments segments(const std::string& text) {
    Segments out;
    auto silence = [&] { out.emplace_back(kSilencePhoneme, uniform_size(rng_, cfg_.min_silence_frames, cfg_.max_silence_frames)); };
    silence();
    for (char c : text) {
      if (c == ' ') {
        silence();
        continue;
      }
      out.emplace_back(c - 'a' + 1, uniform_size(rng_, cfg_.min_letter_frames, cfg_.max_letter_frames));
    }
    silence();
    return out;
  }

  // Source frames (source_dim x T) following the segment labels.
  Tensor source(const std::vector<int>& labels) {
    const std::size_t D = cfg_.source_dim, T = labels.size();
    Tensor s({D, T});
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = 0; d < D; ++d) {
        double v = prototypes_(static_cast<std::size_t>(labels[t]), d);
        if (t > 0) v = (1.0 - cfg_.coarticulation) * v + cfg_.coarticulation * s(d, t - 1);
        s(d, t) = v + cfg_.source_noise * noise(rng_);
      }
    return s;
  }

  Tensor observe(const Tensor& mix, const Tensor& src, double noise_level, bool squash) {
    const std::size_t R = mix.rows(), D = mix.cols(), T = src.cols();
    Tensor out({R, T});
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t r = 0; r < R; ++r) {
        double v = 0.0;
        for (std::size_t d = 0; d < D; ++d) v += mix(r, d) * src(d, t);
        if (squash) v = std::tanh(v);
        out(r, t) = v + noise_level * noise(rng_);
      }
    return out;
  }

  // Stretches each segment; returns the source frame read by each new frame.
  std::vector<std::size_t> warp(const Segments& segs) {
    const double r = std::uniform_real_distribution<double>(cfg_.warp_min, cfg_.warp_max)(rng_);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::size_t> map;
    std::size_t offset = 0;
    for (const auto& [phoneme, d] : segs) {
      const double factor = r * (1.0 + cfg_.warp_jitter * u(rng_));
      const std::size_t nd = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(d) * factor)));
      for (std::size_t k = 0; k < nd; ++k) map.push_back(offset + k * d / nd);
      offset += d;
    }
    return map;
  }

  const SyntheticCorpusConfig& cfg_;
  Rng rng_;
  Tensor prototypes_, audio_mix_, emg_mix_, silent_mix_;
};

std::vector<int> expand(const Segments& segs) {
  std::vector<int> labels;
  for (const auto& [p, d] : segs) labels.insert(labels.end(), d, p);
  return labels;
}

Tensor gather_frames(const Tensor& src, const std::vector<std::size_t>& map) {
  Tensor out({src.rows(), map.size()});
  for (std::size_t t = 0; t < map.size(); ++t)
    for (std::size_t r = 0; r < src.rows(); ++r) out(r, t) = src(r, map[t]);
  return out;
}

}  // namespace

Corpus generate_corpus(const SyntheticCorpusConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.config = config;
  corpus.alphabet = Alphabet::lowercase(config.letters);
  Generator gen(corpus.config);
  corpus.vocabulary = gen.vocabulary();

  auto emit = [&](Split split, std::size_t vocal, std::size_t silent, std::size_t libri) {
    const std::string prefix(to_string(split));
    for (std::size_t i = 0; i < vocal; ++i) {
      Utterance u;
      u.text = gen.sentence(corpus.vocabulary);
      const Segments segs = gen.segments(u.text);
      u.phonemes = expand(segs);
      const Tensor src = gen.source(u.phonemes);
      u.id = prefix + "/vocal/" + std::to_string(i);
      u.cls = DatasetClass::GaddyVocal;
      u.split = split;
      u.audio = gen.observe(gen.audio_mix_, src, config.audio_noise, false);
      u.emg = gen.observe(gen.emg_mix_, src, config.emg_noise, true);
      const std::size_t vocal_index = corpus.utterances.size();
      corpus.utterances.push_back(std::move(u));
      if (i < silent) {
        // The silent reading reuses the vocalized source on a new time base.
        Utterance s;
        s.id = prefix + "/silent/" + std::to_string(i);
        s.text = corpus.utterances[vocal_index].text;
        s.cls = DatasetClass::GaddySilent;
        s.split = split;
        const auto map = gen.warp(segs);
        for (std::size_t t : map) s.phonemes.push_back(corpus.utterances[vocal_index].phonemes[t]);
        s.emg = gen.observe(gen.silent_mix_, gather_frames(src, map), config.emg_noise, true);
        s.parallel = vocal_index;
        corpus.utterances.push_back(std::move(s));
      }
    }
    for (std::size_t i = 0; i < libri; ++i) {
      Utterance u;
      u.text = gen.sentence(corpus.vocabulary);
      u.phonemes = expand(gen.segments(u.text));
      const Tensor src = gen.source(u.phonemes);
      u.id = prefix + "/librispeech/" + std::to_string(i);
      u.cls = DatasetClass::LibriSpeech;
      u.split = split;
      u.audio = gen.observe(gen.audio_mix_, src, config.audio_noise, false);
      corpus.utterances.push_back(std::move(u));
    }
  };
  emit(Split::Train, config.vocal, config.silent, config.librispeech);
  emit(Split::Validation, config.val_vocal, config.val_silent, config.val_librispeech);
  return corpus;
}

}  // namespace mona
