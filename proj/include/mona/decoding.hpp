#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mona/alphabet.hpp"
#include "mona/arpa.hpp"
#include "mona/tensor.hpp"

namespace mona {

struct DecodeConfig {
  std::size_t beam_width = 150;
  double lm_weight = 1.0;   // alpha, multiplies the natural-log LM score
  double word_bonus = 0.5;  // beta, added per emitted word

  void validate() const;
};

inline constexpr std::size_t kTrainingBeamWidth = 150;
inline constexpr std::size_t kInferenceBeamWidth = 5000;

enum class NBestSource { BeamSearch, Ensemble };
std::string to_string(NBestSource s);
NBestSource nbest_source_from_string(std::string_view s);

struct NBestEntry {
  std::string transcript;
  double acoustic = 0.0;  // log P_ctc
  double lm = 0.0;        // natural-log LM score, unweighted
  double combined = 0.0;
};

struct NBestList {
  std::string utterance;
  NBestSource source = NBestSource::BeamSearch;
  std::vector<NBestEntry> entries;

  /// Nonempty, combined scores nonincreasing, transcripts unique.
  void validate() const;
  const NBestEntry& top() const;
  std::vector<std::string> transcripts() const;
};

/// Per-frame argmax ids with repeats collapsed and blanks dropped.
std::vector<int> greedy_ctc_ids(const Tensor& logits, int blank);
std::string greedy_ctc_decode(const Tensor& logits, const Alphabet& alphabet);

/// CTC prefix beam search over T x K logits (normalized internally with a
/// row log-softmax). Word-level LM fusion happens when a space closes a word
/// and once more at the end with the sentence end token. `lm` may be null.
NBestList beam_search(const Tensor& logits, const Alphabet& alphabet, const ArpaModel* lm,
                      const DecodeConfig& cfg, std::size_t k);

/// Decodes utterances on up to `threads` workers (0 picks hardware concurrency).
std::vector<NBestList> beam_search_batch(std::span<const Tensor> logits, const Alphabet& alphabet,
                                         const ArpaModel* lm, const DecodeConfig& cfg, std::size_t k,
                                         unsigned threads = 0);

/// Combined-score convention shared by the search and external rescoring.
double combined_score(double acoustic, double lm, std::size_t words, const DecodeConfig& cfg);
/// Natural-log LM score of a whitespace-separated transcript.
double lm_score(const ArpaModel& lm, std::string_view transcript);

std::vector<std::string> split_words(std::string_view text);

/// Line format: a "# utterance <id> <source>" header followed by
/// rank<TAB>combined<TAB>acoustic<TAB>lm<TAB>transcript rows, ranks from 1.
void write_nbest(std::ostream& out, std::span<const NBestList> lists);
std::vector<NBestList> read_nbest(std::istream& in);

}  // namespace mona
