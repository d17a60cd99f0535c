#include "mona/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mona/errors.hpp"

namespace mona {

DistanceMatrix::DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw DimensionError("distance matrix size mismatch");
}

DistanceMatrix DistanceMatrix::transposed() const {
  std::vector<double> t(values_.size());
  for (std::size_t a = 0; a < rows_; ++a)
    for (std::size_t b = 0; b < cols_; ++b) t[b * rows_ + a] = values_[a * cols_ + b];
  return DistanceMatrix(cols_, rows_, std::move(t));
}

bool WarpPath::is_valid_for(std::size_t t1, std::size_t t2) const {
  if (steps.empty() || t1 == 0 || t2 == 0) return false;
  if (steps.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (steps.back() != std::pair<std::size_t, std::size_t>{t1 - 1, t2 - 1}) return false;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const auto [a0, b0] = steps[k - 1];
    const auto [a1, b1] = steps[k];
    if (a1 < a0 || b1 < b0) return false;
    const std::size_t da = a1 - a0, db = b1 - b0;
    if (da > 1 || db > 1 || da + db == 0) return false;
  }
  return true;
}

DistanceMatrix distance_matrix(const Tensor& z1, const Tensor& z2) {
  if (z1.rows() != z2.rows()) {
    throw DimensionError("feature dimensions differ: " + std::to_string(z1.rows()) + " vs " +
                         std::to_string(z2.rows()));
  }
  const std::size_t f = z1.rows(), t1 = z1.cols(), t2 = z2.cols();
  std::vector<double> d(t1 * t2);
  for (std::size_t a = 0; a < t1; ++a)
    for (std::size_t b = 0; b < t2; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        const double diff = z1(k, a) - z2(k, b);
        s += diff * diff;
      }
      d[a * t2 + b] = std::sqrt(s);
    }
  return DistanceMatrix(t1, t2, std::move(d));
}

Alignment dtw_align(const DistanceMatrix& d) {
  const std::size_t n = d.rows(), m = d.cols();
  if (n == 0 || m == 0) throw PreconditionError("dtw on an empty distance matrix");
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (!std::isfinite(d(a, b))) throw NumericError("dtw: non-finite distance");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, kInf);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      double best = 0.0;
      if (a > 0 || b > 0) {
        best = kInf;
        if (a > 0 && b > 0) best = std::min(best, acc[(a - 1) * m + b - 1]);
        if (b > 0) best = std::min(best, acc[a * m + b - 1]);
        if (a > 0) best = std::min(best, acc[(a - 1) * m + b]);
      }
      acc[a * m + b] = best + d(a, b);
    }

  Alignment out;
  out.cost = acc[n * m - 1];
  std::size_t a = n - 1, b = m - 1;
  out.path.steps.emplace_back(a, b);
  while (a > 0 || b > 0) {
    // Candidates in tie-break order: diagonal, (0,1), (1,0).
    double best = kInf;
    std::size_t na = a, nb = b;
    if (a > 0 && b > 0 && acc[(a - 1) * m + b - 1] < best) {
      best = acc[(a - 1) * m + b - 1];
      na = a - 1;
      nb = b - 1;
    }
    if (b > 0 && acc[a * m + b - 1] < best) {
      best = acc[a * m + b - 1];
      na = a;
      nb = b - 1;
    }
    if (a > 0 && acc[(a - 1) * m + b] < best) {
      na = a - 1;
      nb = b;
    }
    a = na;
    b = nb;
    out.path.steps.emplace_back(a, b);
  }
  std::reverse(out.path.steps.begin(), out.path.steps.end());
  return out;
}

std::vector<std::size_t> warp_sources(const WarpPath& path, std::size_t t1, std::size_t t2) {
  if (!path.is_valid_for(t1, t2)) throw ContractError("warp path is not valid for the sequence lengths");
  std::vector<std::size_t> source(t1, 0);
  for (const auto& [a, b] : path.steps) source[a] = b;  // later pairs overwrite earlier ones
  return source;
}

WarpedSequence warp(const Tensor& z2, std::span<const int> p2, const WarpPath& path, std::size_t t1) {
  const std::size_t t2 = z2.cols();
  if (p2.size() != t2) throw PreconditionError("label sequence length differs from latent length");
  WarpedSequence out;
  out.source = warp_sources(path, t1, t2);
  out.z_hat = Tensor({z2.rows(), t1});
  for (std::size_t a = 0; a < t1; ++a) {
    for (std::size_t f = 0; f < z2.rows(); ++f) out.z_hat(f, a) = z2(f, out.source[a]);
    out.labels.push_back(p2[out.source[a]]);
  }
  return out;
}

SilentPairing silent_pairing(Var silent, Var vocal, std::span<const int> vocal_phonemes,
                             std::size_t utterance) {
  const std::size_t t1 = silent.value().cols(), t2 = vocal.value().cols();
  if (vocal_phonemes.size() != t2) throw PreconditionError("vocal phoneme count differs from vocal latent length");
  SilentPairing out;
  out.alignment = dtw_align(distance_matrix(silent.value(), vocal.value()));
  const std::vector<std::size_t> src = warp_sources(out.alignment.path, t1, t2);
  Var warped = select_cols(vocal, src);
  std::vector<ColumnInfo> columns;
  columns.reserve(2 * t1);
  for (std::size_t t = 0; t < t1; ++t) {
    out.labels.push_back(vocal_phonemes[src[t]]);
    columns.push_back({Modality::Emg, utterance, t, out.labels.back()});
  }
  for (std::size_t t = 0; t < t1; ++t) columns.push_back({Modality::Audio, utterance, t, out.labels[t]});
  std::vector<Var> parts = {silent, warped};
  out.batch = LatentBatch::paired_by_time(concat_cols(parts), std::move(columns));
  return out;
}

}  // namespace mona
