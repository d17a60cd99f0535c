#include "mona/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>

#include "mona/errors.hpp"

namespace mona {

std::string_view to_string(Modality m) { return m == Modality::Emg ? "emg" : "audio"; }

LatentBatch LatentBatch::paired_by_time(Var z, std::vector<ColumnInfo> columns) {
  LatentBatch batch{z, std::move(columns), {}};
  batch.partner.assign(batch.columns.size(), std::nullopt);
  std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> index;
  for (std::size_t i = 0; i < batch.columns.size(); ++i) {
    const ColumnInfo& c = batch.columns[i];
    auto [it, inserted] = index.emplace(std::tuple{c.utterance, c.timestep, static_cast<int>(c.modality)}, i);
    if (!inserted) {
      throw PreconditionError("duplicate column for utterance " + std::to_string(c.utterance) +
                              " timestep " + std::to_string(c.timestep));
    }
  }
  for (std::size_t i = 0; i < batch.columns.size(); ++i) {
    const ColumnInfo& c = batch.columns[i];
    const int other = c.modality == Modality::Emg ? 1 : 0;
    if (auto it = index.find({c.utterance, c.timestep, other}); it != index.end()) batch.partner[i] = it->second;
  }
  batch.validate();
  return batch;
}

void LatentBatch::validate() const {
  if (!z.valid()) throw PreconditionError("latent batch without embeddings");
  if (z.value().rank() != 2 || z.value().cols() != columns.size()) {
    throw DimensionError("latent matrix has " + std::to_string(z.value().cols()) + " columns but " +
                         std::to_string(columns.size()) + " annotations");
  }
  if (partner.size() != columns.size()) throw DimensionError("pairing map size mismatch");
  for (std::size_t i = 0; i < partner.size(); ++i) {
    if (!partner[i]) continue;
    const std::size_t j = *partner[i];
    if (j >= columns.size() || partner[j] != i) throw ContractError("pairing is not an involution");
    if (columns[i].modality == columns[j].modality || columns[i].utterance != columns[j].utterance ||
        columns[i].timestep != columns[j].timestep) {
      throw ContractError("paired columns must share (u, t) and differ in modality");
    }
  }
}

LatentBatch LatentBatch::subset(const std::function<bool(std::size_t)>& keep) const {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> remap(columns.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (keep(i)) {
      remap[i] = kept.size();
      kept.push_back(i);
    }
  LatentBatch out;
  out.z = select_cols(z, kept);
  for (std::size_t i : kept) {
    out.columns.push_back(columns[i]);
    std::optional<std::size_t> p;
    if (partner[i] && remap[*partner[i]] != std::numeric_limits<std::size_t>::max()) p = remap[*partner[i]];
    out.partner.push_back(p);
  }
  return out;
}

LatentBatch LatentBatch::paired_only() const {
  return subset([this](std::size_t i) { return partner[i].has_value(); });
}

LatentBatch LatentBatch::labeled_only() const {
  return subset([this](std::size_t i) { return columns[i].label.has_value(); });
}

LossWeights LossWeights::preset(std::string_view name) {
  // (audio, emg, sup, cross) as tabulated.
  struct Row {
    std::string_view name;
    double audio, emg, sup, cross;
  };
  static constexpr Row kRows[] = {
      {"audio", 1, 0, 0, 0},       {"emg", 0, 1, 0, 0},      {"emg_audio", 1, 1, 0, 0},
      {"suptcon", 1, 1, 0.1, 0},   {"crosscon", 1, 1, 0, 1}, {"crosscon_suptcon", 1, 1, 0.1, 1},
  };
  for (const Row& r : kRows)
    if (r.name == name) return LossWeights{r.emg, r.audio, r.cross, r.sup};
  throw ConfigError("unknown loss weight preset '" + std::string(name) + "'");
}

void LossWeights::validate() const {
  for (double v : {lambda_emg, lambda_audio, lambda_cross, lambda_sup})
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
}

void LossConfig::validate() const {
  if (!(tau_cross > 0.0) || !(tau_sup > 0.0)) throw ConfigError("temperature must be positive");
  if (ctc_blank_index < 0) throw ConfigError("blank index must be nonnegative");
}

namespace {

void require_finite(const LatentBatch& batch) {
  if (!batch.z.value().all_finite()) throw NumericError("non-finite latent embedding");
}

Var scaled_similarity_logits(const LatentBatch& batch, double tau) {
  if (!(tau > 0.0)) throw PreconditionError("temperature must be positive");
  require_finite(batch);
  return scale(cosine_matrix(batch.z, batch.z), 1.0 / tau);
}

Tensor off_diagonal_mask(std::size_t n) {
  Tensor mask({n, n}, 1.0);
  for (std::size_t i = 0; i < n; ++i) mask(i, i) = 0.0;
  return mask;
}

}  // namespace

Tensor pairwise_sim(const LatentBatch& batch, double tau) {
  batch.validate();
  Tape tape;
  Var z = tape.constant(batch.z.value());
  LatentBatch local{z, batch.columns, batch.partner};
  Tensor logits = scaled_similarity_logits(local, tau).value();
  for (double& v : logits.data()) v = std::exp(v);
  return logits;
}

Var crosscon(const LatentBatch& batch, double tau) {
  batch.validate();
  const std::size_t n = batch.size();
  if (n == 0) throw PreconditionError("crosscon on an empty batch");
  std::vector<std::pair<std::size_t, std::size_t>> positives;
  positives.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!batch.partner[i]) {
      throw PreconditionError("crosscon: column " + std::to_string(i) + " has no cross-modal partner");
    }
    positives.emplace_back(i, *batch.partner[i]);
  }
  Var logits = scaled_similarity_logits(batch, tau);
  Var denom = logsumexp_rows(logits, off_diagonal_mask(n));
  Var numer = gather(logits, positives);
  return mean(denom - numer);
}

Var suptcon(const LatentBatch& batch, double tau) {
  batch.validate();
  const std::size_t n = batch.size();
  if (n == 0) throw PreconditionError("suptcon on an empty batch");
  for (std::size_t i = 0; i < n; ++i)
    if (!batch.columns[i].label) throw PreconditionError("suptcon: column " + std::to_string(i) + " has no class label");

  // weights(i, q) = 1/|p(i)| for q in p(i); has_positive(i) = [p(i) nonempty]
  Tensor weights({n, n});
  Tensor has_positive({n});
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t q = 0; q < n; ++q)
      if (q != i && *batch.columns[q].label == *batch.columns[i].label) ++count;
    if (count == 0) continue;
    any = true;
    has_positive[i] = 1.0;
    for (std::size_t q = 0; q < n; ++q)
      if (q != i && *batch.columns[q].label == *batch.columns[i].label) weights(i, q) = 1.0 / static_cast<double>(count);
  }
  if (!any) throw PreconditionError("suptcon: no column has a positive");

  Tape& tape = batch.z.tape();
  Var logits = scaled_similarity_logits(batch, tau);
  Var denom = logsumexp_rows(logits, off_diagonal_mask(n));
  Var per_column = sum(denom * tape.constant(std::move(has_positive))) -
                   sum(logits * tape.constant(std::move(weights)));
  return scale(per_column, 1.0 / static_cast<double>(n));
}

std::size_t ctc_min_frames(std::span<const int> label) {
  std::size_t frames = label.size();
  for (std::size_t i = 1; i < label.size(); ++i)
    if (label[i] == label[i - 1]) ++frames;
  return frames;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct CtcLattice {
  Tensor log_probs;  // T x K
  std::vector<int> extended;
  std::vector<double> alpha;  // T x S
  std::vector<double> beta;   // T x S
  double log_likelihood = kNegInf;
};

CtcLattice ctc_lattice(const Tensor& logits, std::span<const int> label, int blank, bool with_beta) {
  if (logits.rank() != 2) throw DimensionError("ctc logits must be T x K");
  const std::size_t T = logits.rows(), K = logits.cols();
  if (blank < 0 || static_cast<std::size_t>(blank) >= K) throw PreconditionError("blank index outside the alphabet");
  for (int s : label) {
    if (s < 0 || static_cast<std::size_t>(s) >= K || s == blank) {
      throw PreconditionError("ctc label symbol " + std::to_string(s) + " invalid");
    }
  }
  if (!logits.all_finite()) throw NumericError("non-finite ctc logits");
  if (ctc_min_frames(label) > T) {
    throw InfeasibleLabelError("label needs " + std::to_string(ctc_min_frames(label)) +
                               " frames but only " + std::to_string(T) + " are available");
  }

  CtcLattice lat;
  lat.log_probs = log_softmax_rows(logits);
  lat.extended.reserve(2 * label.size() + 1);
  lat.extended.push_back(blank);
  for (int s : label) {
    lat.extended.push_back(s);
    lat.extended.push_back(blank);
  }
  const std::size_t S = lat.extended.size();
  const auto& ext = lat.extended;
  const Tensor& lp = lat.log_probs;
  auto can_skip = [&ext](std::size_t s) { return s >= 2 && ext[s] != ext[s - 2]; };

  lat.alpha.assign(T * S, kNegInf);
  lat.alpha[0] = lp(0, ext[0]);
  if (S > 1) lat.alpha[1] = lp(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = lat.alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, lat.alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = log_add(a, lat.alpha[(t - 1) * S + s - 2]);
      lat.alpha[t * S + s] = a == kNegInf ? kNegInf : a + lp(t, ext[s]);
    }
  }
  lat.log_likelihood = lat.alpha[(T - 1) * S + S - 1];
  if (S > 1) lat.log_likelihood = log_add(lat.log_likelihood, lat.alpha[(T - 1) * S + S - 2]);

  if (with_beta) {
    lat.beta.assign(T * S, kNegInf);
    lat.beta[(T - 1) * S + S - 1] = lp(T - 1, ext[S - 1]);
    if (S > 1) lat.beta[(T - 1) * S + S - 2] = lp(T - 1, ext[S - 2]);
    for (std::size_t t = T - 1; t-- > 0;) {
      for (std::size_t s = 0; s < S; ++s) {
        double b = lat.beta[(t + 1) * S + s];
        if (s + 1 < S) b = log_add(b, lat.beta[(t + 1) * S + s + 1]);
        if (s + 2 < S && ext[s + 2] != ext[s]) b = log_add(b, lat.beta[(t + 1) * S + s + 2]);
        lat.beta[t * S + s] = b == kNegInf ? kNegInf : b + lp(t, ext[s]);
      }
    }
  }
  return lat;
}

}  // namespace

double ctc_loss_value(const Tensor& logits, std::span<const int> label, int blank) {
  return -ctc_lattice(logits, label, blank, false).log_likelihood;
}

Var ctc_loss(Var logits, std::span<const int> label, int blank) {
  CtcLattice lat = ctc_lattice(logits.value(), label, blank, logits.tape().needs_grad(logits));
  const double loss = -lat.log_likelihood;
  if (!std::isfinite(loss)) throw NumericError("ctc loss is not finite");
  if (!logits.tape().needs_grad(logits)) return logits.tape().constant(Tensor::scalar(loss));
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [lat = std::move(lat)](const Tensor&, const Tensor& gy, std::span<const Tensor* const>,
                             std::span<Tensor* const> gin) {
        const std::size_t T = lat.log_probs.rows(), K = lat.log_probs.cols();
        const std::size_t S = lat.extended.size();
        // d(-log p)/d logit(t,k) = softmax(t,k) - occupancy(t,k)
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<double> occ(K, kNegInf);
          for (std::size_t s = 0; s < S; ++s) {
            // alpha and beta both include the emission at (t, s)
            const double ab = lat.alpha[t * S + s] + lat.beta[t * S + s] - lat.log_probs(t, lat.extended[s]);
            occ[lat.extended[s]] = log_add(occ[lat.extended[s]], ab);
          }
          for (std::size_t k = 0; k < K; ++k) {
            const double post = occ[k] == kNegInf ? 0.0 : std::exp(occ[k] - lat.log_likelihood);
            (*gin[0])(t, k) += gy[0] * (std::exp(lat.log_probs(t, k)) - post);
          }
        }
      });
}

LossBreakdown mona_loss(Tape& tape, const LossTerms& terms, const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  std::vector<Var> parts;
  auto take = [&](double weight, const std::function<Var()>& term, std::optional<double>& slot) {
    if (weight == 0.0) return;
    if (!term) throw PreconditionError("loss component with nonzero weight is missing");
    Var v = term();
    slot = v.value().item();
    parts.push_back(scale(v, weight));
  };
  take(w.lambda_emg, terms.emg_ctc, out.emg_ctc);
  take(w.lambda_audio, terms.audio_ctc, out.audio_ctc);
  take(w.lambda_cross, terms.cross, out.cross);
  take(w.lambda_sup, terms.sup, out.sup);
  if (parts.empty()) {
    out.total = tape.constant(Tensor::scalar(0.0));
    return out;
  }
  Var total = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) total = total + parts[k];
  out.total = total;
  return out;
}

double mona_loss(double emg_ctc, double audio_ctc, double cross, double sup, const LossWeights& w) {
  w.validate();
  double total = 0.0;
  if (w.lambda_emg != 0.0) total += w.lambda_emg * emg_ctc;
  if (w.lambda_audio != 0.0) total += w.lambda_audio * audio_ctc;
  if (w.lambda_cross != 0.0) total += w.lambda_cross * cross;
  if (w.lambda_sup != 0.0) total += w.lambda_sup * sup;
  return total;
}

}  // namespace mona
