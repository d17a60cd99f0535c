#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mona/alphabet.hpp"
#include "mona/sampler.hpp"
#include "mona/tensor.hpp"

namespace mona {

enum class Split { Train, Validation, Test };
std::string_view to_string(Split s);

/// Frame phoneme ids: 0 is silence, letter i of the alphabet is i + 1.
inline constexpr int kSilencePhoneme = 0;

struct Utterance {
  std::string id;
  std::string text;
  DatasetClass cls = DatasetClass::GaddyVocal;
  Split split = Split::Train;
  std::optional<Tensor> emg;    // features x T
  std::optional<Tensor> audio;  // features x T
  std::vector<int> phonemes;    // one per frame
  std::optional<std::size_t> parallel;  // silent utterance -> its vocalized reading

  std::size_t frames() const { return phonemes.size(); }
};

struct SyntheticCorpusConfig {
  std::size_t letters = 8;
  std::size_t vocabulary = 24;
  std::size_t min_word_len = 2, max_word_len = 4;
  std::size_t min_words = 2, max_words = 3;
  std::size_t min_letter_frames = 2, max_letter_frames = 4;
  std::size_t min_silence_frames = 1, max_silence_frames = 2;

  // Training utterances per class. Every silent utterance reads the same
  // sentence as a distinct vocalized one, so silent <= vocal.
  std::size_t silent = 30, vocal = 60, librispeech = 120;
  std::size_t val_silent = 20, val_vocal = 20, val_librispeech = 20;

  std::size_t source_dim = 8;
  std::size_t emg_features = 8;
  std::size_t audio_features = 8;
  double coarticulation = 0.3;  // weight of the previous frame in the source

  double source_noise = 0.1;
  double audio_noise = 0.1;
  double emg_noise = 0.3;
  double silent_shift = 0.5;  // scale of the silent-only EMG mixing perturbation

  // Silent timing: each phoneme segment is stretched by r * (1 + jitter * u)
  // with r drawn once per utterance from [warp_min, warp_max], u in [-1, 1].
  double warp_min = 0.8, warp_max = 1.25;
  double warp_jitter = 0.2;

  std::uint64_t seed = 0;

  void validate() const;
};

struct Corpus {
  SyntheticCorpusConfig config;
  Alphabet alphabet = Alphabet::lowercase(1);
  std::vector<std::string> vocabulary;
  std::vector<Utterance> utterances;

  std::vector<std::size_t> select(DatasetClass cls, Split split) const;
  std::size_t emg_features() const { return config.emg_features; }
  std::size_t audio_features() const { return config.audio_features; }
  std::size_t phoneme_classes() const { return alphabet.symbols().size(); }  // silence + letters
  /// CTC target for an utterance: alphabet ids of its text.
  std::vector<int> label(const Utterance& u) const { return alphabet.encode(u.text); }
};

Corpus generate_corpus(const SyntheticCorpusConfig& config);

/// Letters of `text` as phoneme ids, spaces dropped.
std::vector<int> phoneme_spelling(const Alphabet& alphabet, std::string_view text);
/// Frame labels with repeats merged and silence removed.
std::vector<int> collapse_phonemes(const std::vector<int>& frames);

/// Packing items for the training split (lengths in frames).
std::vector<PackingItem> training_items(const Corpus& corpus, const std::vector<DatasetClass>& classes);

}  // namespace mona
