#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mona/alignment.hpp"
#include "mona/autodiff.hpp"
#include "mona/corpus.hpp"
#include "mona/losses.hpp"

namespace mona {

struct EncoderConfig {
  std::size_t input_features = 8;
  std::size_t latent_features = 16;
  std::size_t num_blocks = 2;
  std::size_t hidden = 32;  // width inside each residual block

  void validate() const;
};

struct ModelConfig {
  EncoderConfig emg;
  EncoderConfig audio;
  std::size_t decoder_hidden = 48;
  std::size_t decoder_context = 2;  // frames on each side seen by the decoder
  std::size_t classes = 10;         // alphabet size including the blank
  std::uint64_t seed = 0;

  void validate() const;
  /// Stable key = value rendering; its FNV-1a hash tags checkpoints.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Residual scale (1/sqrt 2)^l of block l (blocks count from 1).
double residual_scale(std::size_t block);

/// x <- x + residual_scale(l) * f(x, l) for l = 1..num_blocks.
Var residual_chain(Var x, std::size_t num_blocks, const std::function<Var(Var, std::size_t)>& f);

using ParamMap = std::map<std::string, Tensor>;

/// Parameters placed on a tape for one forward/backward pass.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamMap& params, bool trainable = true);
  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }
  std::size_t parameter_count() const;

  /// signal: features x T  ->  latent: F x T
  Var encode(const BoundParams& p, Modality m, Var signal) const;
  /// latent: F x T  ->  logits: T x K
  Var decode_logits(const BoundParams& p, Var latent) const;

  Tensor encode(Modality m, const Tensor& signal) const;
  Tensor decode_logits(const Tensor& latent) const;
  /// Logits for the given signal through its own encoder and the shared decoder.
  Tensor logits(Modality m, const Tensor& signal) const;

  /// Order-independent digest of every parameter bit pattern.
  std::uint64_t checksum() const;

 private:
  const EncoderConfig& encoder_config(Modality m) const;

  ModelConfig config_;
  ParamMap params_;
};

struct OptimizerConfig {
  double learning_rate = 3e-3;
  double decay = 0.9;      // running average of squared gradients
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm cap, 0 disables

  void validate() const;
};

/// Momentum-free adaptive step (RMSProp form) with global norm clipping.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

  /// Returns the gradient norm before clipping.
  double step(ParamMap& params, const ParamMap& grads);
  std::size_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  ParamMap second_moment_;
  std::size_t steps_ = 0;
};

void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::string& path);

struct TrainConfig {
  LossWeights weights;
  LossConfig loss;
  /// Silent utterances contribute DTW-mediated contrastive terms.
  bool silent_dtw = true;
  AlignmentSource alignment_source = AlignmentSource::VocalAudio;
  OptimizerConfig optimizer;

  void validate() const;
};

struct StepMetrics {
  double total = 0.0;
  std::optional<double> emg_ctc, audio_ctc, cross, sup;
  double grad_norm = 0.0;
  std::size_t frames = 0;
};

/// Loss of one bin of corpus utterances on `tape`; the pieces the training
/// step needs. Terms with zero weight are never built.
LossBreakdown bin_loss(const Model& model, const BoundParams& params, const Corpus& corpus,
                       std::span<const std::size_t> bin, const TrainConfig& cfg);

/// One optimizer update on one bin. Throws NumericError naming the loss
/// component when a term is not finite.
StepMetrics train_step(Model& model, Optimizer& optimizer, const Corpus& corpus, std::span<const std::size_t> bin,
                       const TrainConfig& cfg);

}  // namespace mona
