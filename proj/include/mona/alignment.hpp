#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mona/autodiff.hpp"
#include "mona/losses.hpp"

namespace mona {

/// Euclidean distances between the columns of two latent sequences.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t a, std::size_t b) const { return values_[a * cols_ + b]; }
  DistanceMatrix transposed() const;

 private:
  std::size_t rows_, cols_;
  std::vector<double> values_;
};

/// Monotone alignment from (0, 0) to (T1 - 1, T2 - 1) using the steps
/// (1, 0), (0, 1) and (1, 1).
struct WarpPath {
  std::vector<std::pair<std::size_t, std::size_t>> steps;

  bool is_valid_for(std::size_t t1, std::size_t t2) const;
};

struct Alignment {
  WarpPath path;
  double cost = 0.0;
};

/// Warped vocalized sequence on the silent time base.
struct WarpedSequence {
  Tensor z_hat;                        // F x T1
  std::vector<int> labels;             // length T1
  std::vector<std::size_t> source;     // column of Z2 used for each silent frame
};

DistanceMatrix distance_matrix(const Tensor& z1, const Tensor& z2);

/// Minimum-cost warp path. Ties prefer the diagonal predecessor, then a
/// (0, 1) step, then a (1, 0) step.
Alignment dtw_align(const DistanceMatrix& d);

/// For each silent frame a, the Z2 column of the last path pair whose first
/// coordinate is a. Throws ContractError on an invalid path.
std::vector<std::size_t> warp_sources(const WarpPath& path, std::size_t t1, std::size_t t2);

WarpedSequence warp(const Tensor& z2, std::span<const int> p2, const WarpPath& path, std::size_t t1);

/// Which vocalized latents the silent utterance is aligned against.
enum class AlignmentSource { VocalAudio, VocalEmg };

/// Silent utterance latents joined with the warped parallel vocalized
/// latents. Gradients reach both encoders through the column selection; the
/// path itself is recomputed from values and is constant for the pass.
struct SilentPairing {
  LatentBatch batch;    // silent columns first, then the warped columns
  Alignment alignment;
  std::vector<int> labels;  // warped labels, one per silent frame
};

/// Aligns `vocal` onto `silent` and builds a batch fragment in which silent
/// EMG column t is paired with warped column t and both carry the warped
/// phoneme label. Pairing is by role: warped columns are tagged as the audio
/// side even when the caller aligns against vocalized EMG latents.
SilentPairing silent_pairing(Var silent, Var vocal, std::span<const int> vocal_phonemes,
                             std::size_t utterance);

}  // namespace mona
