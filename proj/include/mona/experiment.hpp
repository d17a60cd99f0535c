#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mona/config.hpp"
#include "mona/corpus.hpp"
#include "mona/decoding.hpp"
#include "mona/model.hpp"
#include "mona/sampler.hpp"

namespace mona {

/// A named training recipe: loss weights, whether silent utterances are
/// paired through DTW, and which dataset classes are packed into bins.
struct Variant {
  std::string name;
  LossWeights weights;
  bool silent_dtw = false;
  std::vector<DatasetClass> classes;
};

/// Known names: emg, emg_audio, suptcon, crosscon, crosscon_dtw,
/// suptcon_dtw, crosscon_suptcon_dtw.
Variant variant_by_name(const std::string& name);
std::vector<std::string> variant_names();

struct ExperimentConfig {
  SyntheticCorpusConfig corpus;

  std::size_t latent = 16;
  std::size_t encoder_blocks = 2;
  std::size_t encoder_hidden = 32;
  std::size_t decoder_hidden = 48;
  std::size_t decoder_context = 2;

  std::size_t epochs = 20;
  std::size_t max_len = 400;  // frames per bin
  ClassProportions proportions = default_proportions();
  LossConfig loss;
  OptimizerConfig optimizer;

  std::size_t eval_every = 5;
  std::size_t eval_beam = kTrainingBeamWidth;
  std::size_t nbest = 10;
  double lm_weight = 0.0;
  double word_bonus = 0.0;
  bool corpus_lm = false;  // decode with a bigram LM estimated from training texts

  std::vector<std::string> variants = {"emg", "emg_audio", "crosscon_dtw"};
  std::vector<std::uint64_t> seeds = {0, 1, 2};

  void validate() const;
  ModelConfig model_config(const Corpus& corpus, std::uint64_t seed) const;
  DecodeConfig decode_config() const;
  TrainConfig train_config(const Variant& v) const;

  /// Reads every documented key; unknown keys are an error.
  static ExperimentConfig from_config(KeyValueConfig& kv);
  static ExperimentConfig load(const std::string& path);
};

/// One row per (run, epoch). Loss components are epoch means over bins;
/// validation fields are filled on evaluation epochs only.
struct MetricsRecord {
  std::string run;
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_total = 0.0;
  std::optional<double> train_emg_ctc, train_audio_ctc, train_cross, train_sup;
  std::optional<double> val_silent_ctc;
  std::optional<double> wer_silent, wer_vocal, wer_audio;

  bool operator==(const MetricsRecord&) const = default;
};

extern const char* const kMetricsHeader;
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

struct ConditionResult {
  std::optional<double> wer;  // empty when the condition has no utterances
  std::vector<NBestList> nbest;
  std::vector<std::string> references;
};

struct Evaluation {
  ConditionResult silent, vocal, audio;
  std::optional<double> silent_ctc;
};

/// Validation decoding per condition: silent EMG, vocalized EMG and
/// LibriSpeech-like audio. Never modifies the model.
Evaluation evaluate(const Model& model, const Corpus& corpus, const DecodeConfig& decode, const ArpaModel* lm,
                    std::size_t nbest, Split split = Split::Validation);

/// Word bigram LM in ARPA text with absolute discounting and backoff.
std::string estimate_bigram_arpa(const std::vector<std::string>& sentences, double discount = 0.5);

/// Fails with ContractError if a bin breaks the sampler guarantees.
void check_bins(const PackingResult& result, const std::vector<PackingItem>& items, const PackingConfig& config);

struct RunResult {
  std::string run;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
  Model model;
  Evaluation final_eval;
  double seconds = 0.0;
};

struct RunHooks {
  std::function<void(const MetricsRecord&)> on_record;
  /// Called with the bin about to be trained (after the invariant check).
  std::function<void(const Bin&)> on_bin;
};

RunResult run_single(const Corpus& corpus, const ExperimentConfig& cfg, const Variant& variant, std::uint64_t seed,
                     const RunHooks& hooks = {});

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<MetricsRecord> records() const;
};

/// Every configured variant for every seed, in that order. When `out_dir` is
/// set, writes metrics.csv, timing.csv and per-run checkpoints and n-best files.
ExperimentResult run_experiment(const Corpus& corpus, const ExperimentConfig& cfg,
                                const std::optional<std::string>& out_dir = std::nullopt,
                                const RunHooks& hooks = {});

}  // namespace mona
