#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mona {

/// Backoff n-gram language model read from the ARPA text format.
/// Probabilities are stored as log10 values, as in the file.
class ArpaModel {
 public:
  static ArpaModel parse(std::istream& in);
  static ArpaModel load(const std::string& path);

  int order() const { return static_cast<int>(tables_.size()); }
  std::size_t vocabulary_size() const { return tables_.empty() ? 0 : tables_[0].size(); }
  bool contains(std::string_view word) const;
  /// Number of n-grams of the given order (1-based).
  std::size_t count(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)).size(); }

  /// Log10 floor used for out-of-vocabulary words when the model has no <unk>.
  double oov_log10() const { return oov_log10_; }
  void set_oov_log10(double value) { oov_log10_ = value; }

  /// log10 P(word | context) with standard backoff. Only the last
  /// order() - 1 context words are used.
  double log10_prob(std::span<const std::string> context, const std::string& word) const;

  /// Sum of word log10 probabilities with <s> / </s> framing.
  double sentence_log10(std::span<const std::string> words) const;

 private:
  struct Entry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
  };

  const Entry* find(std::span<const std::string> words) const;

  std::vector<std::unordered_map<std::string, Entry>> tables_;
  double oov_log10_ = -10.0;
};

}  // namespace mona
