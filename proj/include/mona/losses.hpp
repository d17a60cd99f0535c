#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mona/autodiff.hpp"

namespace mona {

enum class Modality { Emg, Audio };

std::string_view to_string(Modality m);

/// Annotation of one latent column (one 10 ms frame of one utterance).
struct ColumnInfo {
  Modality modality = Modality::Emg;
  std::size_t utterance = 0;
  std::size_t timestep = 0;
  /// Phoneme class (silence is an ordinary class); absent when unknown.
  std::optional<int> label;
};

/// Embedding matrix Z (F x L) with per-column annotations and the partial
/// cross-modal pairing j(i).
struct LatentBatch {
  Var z;
  std::vector<ColumnInfo> columns;
  std::vector<std::optional<std::size_t>> partner;

  std::size_t size() const { return columns.size(); }

  /// Builds the pairing from (utterance, timestep) matches across
  /// modalities. Throws PreconditionError if a (u, t, modality) repeats.
  static LatentBatch paired_by_time(Var z, std::vector<ColumnInfo> columns);

  /// Checks shape agreement and that j is an involution pairing
  /// different modalities at the same (u, t).
  void validate() const;

  /// Columns satisfying `keep`, pairing remapped (partners outside the
  /// subset are dropped).
  LatentBatch subset(const std::function<bool(std::size_t)>& keep) const;
  LatentBatch paired_only() const;
  LatentBatch labeled_only() const;
};

struct LossWeights {
  double lambda_emg = 1.0;
  double lambda_audio = 0.0;
  double lambda_cross = 0.0;
  double lambda_sup = 0.0;

  /// Rows of the lambda configuration table: "audio", "emg",
  /// "emg_audio", "suptcon", "crosscon", "crosscon_suptcon".
  static LossWeights preset(std::string_view name);

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossConfig {
  double tau_cross = 0.1;
  double tau_sup = 0.1;
  int ctc_blank_index = 0;

  void validate() const;
};

/// exp(cos(z_i, z_j) / tau) for every pair of columns.
Tensor pairwise_sim(const LatentBatch& batch, double tau);

/// Cross-modal contrastive loss: mean over all L columns of
/// -log(sim(z_i, z_j(i)) / sum_{j != i} sim(z_i, z_j)).
/// Every column must have a partner.
Var crosscon(const LatentBatch& batch, double tau);

/// Supervised temporal contrastive loss: positives are all other columns
/// with the same class label, across modalities and utterances; columns
/// with no positive contribute zero but still count in the 1/L average.
Var suptcon(const LatentBatch& batch, double tau);

/// CTC negative log-likelihood of `label` under per-frame softmax of
/// `logits` (T x K). Forward-backward in log space.
Var ctc_loss(Var logits, std::span<const int> label, int blank);
double ctc_loss_value(const Tensor& logits, std::span<const int> label, int blank);

/// Minimum number of frames needed to emit `label` (repeats need a blank).
std::size_t ctc_min_frames(std::span<const int> label);

/// Lazily evaluated loss components; a component is only computed when
/// its weight is nonzero.
struct LossTerms {
  std::function<Var()> emg_ctc;
  std::function<Var()> audio_ctc;
  std::function<Var()> cross;
  std::function<Var()> sup;
};

/// Components actually evaluated by mona_loss (unset when short-circuited).
struct LossBreakdown {
  Var total;
  std::optional<double> emg_ctc, audio_ctc, cross, sup;
};

LossBreakdown mona_loss(Tape& tape, const LossTerms& terms, const LossWeights& w);
double mona_loss(double emg_ctc, double audio_ctc, double cross, double sup, const LossWeights& w);

}  // namespace mona
