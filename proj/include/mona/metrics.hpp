#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace mona {

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t distance() const { return substitutions + deletions + insertions; }
  double rate() const;
};

/// Word-level Levenshtein alignment. Among minimum-cost alignments the
/// backtrace prefers matches/substitutions, then deletions.
EditStats word_edit_stats(std::span<const std::string> hypothesis, std::span<const std::string> reference);
std::size_t word_edit_distance(std::span<const std::string> a, std::span<const std::string> b);

double wer(std::span<const std::string> hypothesis, std::span<const std::string> reference);
double wer(std::string_view hypothesis, std::string_view reference);

/// Pooled WER over a corpus: total edits / total reference words.
struct WerAccumulator {
  EditStats total;
  void add(std::string_view hypothesis, std::string_view reference);
  double rate() const { return total.rate(); }
};

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
  bool exact = false;  // permutation distribution rather than t approximation
};

inline constexpr std::size_t kSpearmanExactLimit = 10;

/// Rank correlation with average ranks for ties. Two-sided p-value from the
/// full permutation distribution for n <= 10, Student t approximation above.
SpearmanResult spearman_rho(std::span<const double> xs, std::span<const double> ys);

}  // namespace mona
