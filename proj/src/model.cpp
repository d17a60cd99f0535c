#include "mona/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hex_rows.hpp"
#include "mona/errors.hpp"

namespace mona {

namespace {

constexpr double kNormEps = 1e-5;
constexpr int kCheckpointVersion = 1;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string prefix(Modality m) { return m == Modality::Emg ? "emg" : "audio"; }

}  // namespace

void EncoderConfig::validate() const {
  if (input_features < 1) throw ConfigError("encoder input_features must be >= 1");
  if (latent_features < 1) throw ConfigError("latent_features must be >= 1");
  if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
  if (hidden < 1) throw ConfigError("encoder hidden width must be >= 1");
}

void ModelConfig::validate() const {
  emg.validate();
  audio.validate();
  if (emg.latent_features != audio.latent_features) throw ConfigError("encoders must share the latent size");
  if (decoder_hidden < 1) throw ConfigError("decoder_hidden must be >= 1");
  if (classes < 2) throw ConfigError("need at least one symbol besides the blank");
}

std::string ModelConfig::canonical() const {
  std::ostringstream s;
  auto enc = [&](const char* name, const EncoderConfig& e) {
    s << name << ".input_features = " << e.input_features << '\n'
      << name << ".latent_features = " << e.latent_features << '\n'
      << name << ".num_blocks = " << e.num_blocks << '\n'
      << name << ".hidden = " << e.hidden << '\n';
  };
  enc("emg", emg);
  enc("audio", audio);
  s << "decoder_hidden = " << decoder_hidden << '\n'
    << "decoder_context = " << decoder_context << '\n'
    << "classes = " << classes << '\n'
    << "seed = " << seed << '\n';
  return s.str();
}

std::uint64_t ModelConfig::hash() const { return fnv1a(canonical()); }

double residual_scale(std::size_t block) { return std::pow(std::sqrt(0.5), static_cast<double>(block)); }

Var residual_chain(Var x, std::size_t num_blocks, const std::function<Var(Var, std::size_t)>& f) {
  for (std::size_t l = 1; l <= num_blocks; ++l) x = x + scale(f(x, l), residual_scale(l));
  return x;
}

BoundParams::BoundParams(Tape& tape, const ParamMap& params, bool trainable) : tape_(&tape) {
  for (const auto& [name, t] : params) vars_.emplace(name, trainable ? tape.leaf(t) : tape.constant(t));
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w({rows, cols});
    for (double& v : w.data()) v = u(rng);
    params_.emplace(name, std::move(w));
  };
  auto bias = [&](const std::string& name, std::size_t rows, double fill = 0.0) {
    params_.emplace(name, Tensor({rows, 1}, fill));
  };
  for (Modality m : {Modality::Emg, Modality::Audio}) {
    const EncoderConfig& e = encoder_config(m);
    const std::string p = prefix(m);
    weight(p + ".in.weight", e.latent_features, e.input_features);
    bias(p + ".in.bias", e.latent_features);
    for (std::size_t l = 1; l <= e.num_blocks; ++l) {
      const std::string b = p + ".block" + std::to_string(l);
      weight(b + ".w1", e.hidden, e.latent_features);
      bias(b + ".b1", e.hidden);
      weight(b + ".w2", e.latent_features, e.hidden);
      bias(b + ".b2", e.latent_features);
    }
  }
  const std::size_t F = config_.emg.latent_features;
  bias("decoder.norm.gain", F, 1.0);
  bias("decoder.norm.bias", F);
  weight("decoder.w1", config_.decoder_hidden, F * (2 * config_.decoder_context + 1));
  bias("decoder.b1", config_.decoder_hidden);
  weight("decoder.w2", config_.classes, config_.decoder_hidden);
  bias("decoder.b2", config_.classes);
}

const EncoderConfig& Model::encoder_config(Modality m) const {
  return m == Modality::Emg ? config_.emg : config_.audio;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

Var Model::encode(const BoundParams& p, Modality m, Var signal) const {
  const EncoderConfig& e = encoder_config(m);
  const Tensor& x = signal.value();
  if (x.rank() != 2 || x.rows() != e.input_features) {
    throw DimensionError(std::string(to_string(m)) + " encoder expects " + std::to_string(e.input_features) +
                         " features, got " + std::to_string(x.rank() == 2 ? x.rows() : 0));
  }
  if (!x.all_finite()) throw PreconditionError("non-finite input signal");
  const std::string pre = prefix(m);
  Var h = matmul(p[pre + ".in.weight"], signal) + p[pre + ".in.bias"];
  return residual_chain(h, e.num_blocks, [&](Var v, std::size_t l) {
    const std::string b = pre + ".block" + std::to_string(l);
    return matmul(p[b + ".w2"], gelu(matmul(p[b + ".w1"], v) + p[b + ".b1"])) + p[b + ".b2"];
  });
}

Var Model::decode_logits(const BoundParams& p, Var latent) const {
  const Tensor& z = latent.value();
  if (z.rank() != 2 || z.rows() != config_.emg.latent_features) {
    throw DimensionError("decoder expects " + std::to_string(config_.emg.latent_features) + " latent features");
  }
  // Per-frame normalization over features.
  Var centered = latent - mean_axis(latent, 0);
  Var spread = sqrt(add_scalar(mean_axis(square(centered), 0), kNormEps));
  Var normed = centered / spread * p["decoder.norm.gain"] + p["decoder.norm.bias"];

  std::vector<Var> window;
  const int c = static_cast<int>(config_.decoder_context);
  for (int o = -c; o <= c; ++o) window.push_back(o == 0 ? normed : shift_cols(normed, o));
  Var context = concat_rows(window);
  Var hidden = gelu(matmul(p["decoder.w1"], context) + p["decoder.b1"]);
  return transpose(matmul(p["decoder.w2"], hidden) + p["decoder.b2"]);
}

Tensor Model::encode(Modality m, const Tensor& signal) const {
  Tape tape;
  BoundParams p(tape, params_, false);
  return encode(p, m, tape.constant(signal)).value();
}

Tensor Model::decode_logits(const Tensor& latent) const {
  Tape tape;
  BoundParams p(tape, params_, false);
  return decode_logits(p, tape.constant(latent)).value();
}

Tensor Model::logits(Modality m, const Tensor& signal) const {
  Tape tape;
  BoundParams p(tape, params_, false);
  return decode_logits(p, encode(p, m, tape.constant(signal))).value();
}

std::uint64_t Model::checksum() const {
  std::uint64_t h = fnv1a(config_.canonical());
  for (const auto& [name, t] : params_) {
    h = fnv1a(name, h);
    for (double v : t.data()) h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
  }
  return h;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(decay >= 0.0 && decay < 1.0)) throw ConfigError("decay must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
}

double Optimizer::step(ParamMap& params, const ParamMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (!g.same_shape(p)) throw DimensionError("gradient shape mismatch for '" + name + "'");
    auto mit = second_moment_.try_emplace(name, Tensor(p.shape(), 0.0)).first;
    Tensor& v = mit->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * clip;
      v[i] = config_.decay * v[i] + (1.0 - config_.decay) * gi * gi;
      p[i] -= config_.learning_rate * gi / (std::sqrt(v[i]) + config_.epsilon);
    }
  }
  ++steps_;
  return norm;
}

void save_checkpoint(std::ostream& out, const Model& model) {
  const ModelConfig& c = model.config();
  out << "mona-checkpoint " << kCheckpointVersion << '\n';
  out << "config_hash " << std::hex << c.hash() << std::dec << '\n';
  out << "config " << c.emg.input_features << ' ' << c.emg.latent_features << ' ' << c.emg.num_blocks << ' '
      << c.emg.hidden << ' ' << c.audio.input_features << ' ' << c.audio.latent_features << ' '
      << c.audio.num_blocks << ' ' << c.audio.hidden << ' ' << c.decoder_hidden << ' ' << c.decoder_context
      << ' ' << c.classes << ' ' << c.seed << '\n';
  for (const auto& [name, t] : model.params()) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    detail::write_hex_row(out, t.data());
  }
  out << "end\n";
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, model);
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

Model load_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint", line_no);
    ++line_no;
    return std::istringstream(line);
  };
  {
    auto s = next();
    std::string magic;
    int version = 0;
    if (!(s >> magic >> version) || magic != "mona-checkpoint") throw ParseError("not a checkpoint", line_no);
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), line_no);
  }
  std::uint64_t hash = 0;
  {
    auto s = next();
    std::string key;
    if (!(s >> key >> std::hex >> hash) || key != "config_hash") throw ParseError("expected config_hash", line_no);
  }
  ModelConfig c;
  {
    auto s = next();
    std::string key;
    if (!(s >> key >> c.emg.input_features >> c.emg.latent_features >> c.emg.num_blocks >> c.emg.hidden >>
          c.audio.input_features >> c.audio.latent_features >> c.audio.num_blocks >> c.audio.hidden >>
          c.decoder_hidden >> c.decoder_context >> c.classes >> c.seed) ||
        key != "config") {
      throw ParseError("bad config line", line_no);
    }
  }
  if (c.hash() != hash) throw ParseError("config hash mismatch", line_no);
  Model model(c);
  std::size_t loaded = 0;
  while (true) {
    auto s = next();
    std::string key;
    s >> key;
    if (key == "end") break;
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (key != "tensor" || !(s >> name >> rows >> cols)) throw ParseError("expected tensor header", line_no);
    auto it = model.params().find(name);
    if (it == model.params().end()) throw ParseError("unknown tensor '" + name + "'", line_no);
    Tensor& t = it->second;
    if (t.rows() != rows || t.cols() != cols) throw ParseError("shape mismatch for '" + name + "'", line_no);
    next();
    if (!detail::read_hex_row(line, t.data())) throw ParseError("bad values in '" + name + "'", line_no);
    ++loaded;
  }
  if (loaded != model.params().size()) throw ParseError("checkpoint is missing tensors", line_no);
  return model;
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

void TrainConfig::validate() const {
  weights.validate();
  loss.validate();
  optimizer.validate();
}

namespace {

// Latents of one bin, built on demand so zero-weight terms cost nothing.
class BinGraph {
 public:
  BinGraph(const Model& model, const BoundParams& p, const Corpus& corpus, std::span<const std::size_t> bin,
           const TrainConfig& cfg)
      : model_(model), p_(p), corpus_(corpus), bin_(bin.begin(), bin.end()), cfg_(cfg) {}

  Var latent(std::size_t u, Modality m) {
    const auto key = std::pair{u, static_cast<int>(m)};
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const Utterance& utt = corpus_.utterances.at(u);
    const auto& signal = m == Modality::Emg ? utt.emg : utt.audio;
    if (!signal) throw PreconditionError("utterance '" + utt.id + "' has no " + std::string(to_string(m)) + " signal");
    Var z = model_.encode(p_, m, p_.tape().constant(*signal));
    cache_.emplace(key, z);
    return z;
  }

  // Mean over utterances of CTC / label length for one modality.
  Var ctc(Modality m) {
    Tape& tape = p_.tape();
    std::vector<Var> parts;
    for (std::size_t u : bin_) {
      const Utterance& utt = corpus_.utterances.at(u);
      if (!(m == Modality::Emg ? utt.emg : utt.audio)) continue;
      const auto label = corpus_.label(utt);
      Var loss;
      try {
        loss = ctc_loss(model_.decode_logits(p_, latent(u, m)), label, cfg_.loss.ctc_blank_index);
      } catch (const NumericError& e) {
        throw NumericError(std::string(to_string(m)) + " ctc loss on '" + utt.id + "': " + e.what());
      }
      parts.push_back(scale(loss, 1.0 / static_cast<double>(std::max<std::size_t>(1, label.size()))));
    }
    if (parts.empty()) return tape.constant(Tensor::scalar(0.0));
    Var total = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) total = total + parts[i];
    return scale(total, 1.0 / static_cast<double>(parts.size()));
  }

  const LatentBatch& contrastive() {
    if (batch_) return *batch_;
    std::vector<Var> zs;
    std::vector<ColumnInfo> cols;
    auto add = [&](Var z, Modality m, std::size_t u, std::span<const int> labels) {
      zs.push_back(z);
      for (std::size_t t = 0; t < z.cols(); ++t) cols.push_back({m, u, t, labels[t]});
    };
    for (std::size_t u : bin_) {
      const Utterance& utt = corpus_.utterances.at(u);
      switch (utt.cls) {
        case DatasetClass::GaddyVocal:
          add(latent(u, Modality::Emg), Modality::Emg, u, utt.phonemes);
          add(latent(u, Modality::Audio), Modality::Audio, u, utt.phonemes);
          break;
        case DatasetClass::LibriSpeech:
          add(latent(u, Modality::Audio), Modality::Audio, u, utt.phonemes);
          break;
        case DatasetClass::GaddySilent: {
          if (!cfg_.silent_dtw) break;
          if (!utt.parallel) throw PreconditionError("silent utterance '" + utt.id + "' has no parallel reading");
          const std::size_t v = *utt.parallel;
          const Modality src = cfg_.alignment_source == AlignmentSource::VocalAudio ? Modality::Audio : Modality::Emg;
          SilentPairing sp = silent_pairing(latent(u, Modality::Emg), latent(v, src), corpus_.utterances.at(v).phonemes, u);
          zs.push_back(sp.batch.z);
          cols.insert(cols.end(), sp.batch.columns.begin(), sp.batch.columns.end());
          break;
        }
      }
    }
    if (zs.empty()) {
      batch_ = LatentBatch{};
    } else {
      batch_ = LatentBatch::paired_by_time(concat_cols(zs), std::move(cols));
    }
    return *batch_;
  }

  Var cross() {
    try {
      return cross_term();
    } catch (const NumericError& e) {
      throw NumericError(std::string("crosscon loss: ") + e.what());
    }
  }

  Var sup() {
    try {
      return sup_term();
    } catch (const NumericError& e) {
      throw NumericError(std::string("suptcon loss: ") + e.what());
    }
  }

 private:
  Var cross_term() {
    const LatentBatch& all = contrastive();
    if (all.size() == 0) return p_.tape().constant(Tensor::scalar(0.0));
    LatentBatch paired = all.paired_only();
    if (paired.size() == 0) return p_.tape().constant(Tensor::scalar(0.0));
    return crosscon(paired, cfg_.loss.tau_cross);
  }

  Var sup_term() {
    const LatentBatch& all = contrastive();
    if (all.size() == 0) return p_.tape().constant(Tensor::scalar(0.0));
    return suptcon(all.labeled_only(), cfg_.loss.tau_sup);
  }

  const Model& model_;
  const BoundParams& p_;
  const Corpus& corpus_;
  std::vector<std::size_t> bin_;
  const TrainConfig& cfg_;
  std::map<std::pair<std::size_t, int>, Var> cache_;
  std::optional<LatentBatch> batch_;
};

void require_finite(const std::optional<double>& v, const char* component) {
  if (v && !std::isfinite(*v)) throw NumericError(std::string(component) + " loss is not finite");
}

}  // namespace

LossBreakdown bin_loss(const Model& model, const BoundParams& params, const Corpus& corpus,
                       std::span<const std::size_t> bin, const TrainConfig& cfg) {
  if (bin.empty()) throw PreconditionError("empty bin");
  BinGraph g(model, params, corpus, bin, cfg);
  LossTerms terms;
  terms.emg_ctc = [&] { return g.ctc(Modality::Emg); };
  terms.audio_ctc = [&] { return g.ctc(Modality::Audio); };
  terms.cross = [&] { return g.cross(); };
  terms.sup = [&] { return g.sup(); };
  return mona_loss(params.tape(), terms, cfg.weights);
}

StepMetrics train_step(Model& model, Optimizer& optimizer, const Corpus& corpus, std::span<const std::size_t> bin,
                       const TrainConfig& cfg) {
  Tape tape;
  BoundParams params(tape, model.params());
  const LossBreakdown loss = bin_loss(model, params, corpus, bin, cfg);
  require_finite(loss.emg_ctc, "emg ctc");
  require_finite(loss.audio_ctc, "audio ctc");
  require_finite(loss.cross, "crosscon");
  require_finite(loss.sup, "suptcon");

  StepMetrics m;
  m.total = loss.total.value().item();
  m.emg_ctc = loss.emg_ctc;
  m.audio_ctc = loss.audio_ctc;
  m.cross = loss.cross;
  m.sup = loss.sup;
  for (std::size_t u : bin) m.frames += corpus.utterances.at(u).frames();
  if (!tape.needs_grad(loss.total)) return m;

  tape.backward(loss.total);
  ParamMap grads;
  for (const auto& [name, v] : params.vars()) grads.emplace(name, tape.grad(v));
  m.grad_norm = optimizer.step(model.params(), grads);
  for (const auto& [name, t] : model.params())
    if (!t.all_finite()) throw NumericError("parameter '" + name + "' is not finite after the update");
  return m;
}

}  // namespace mona
