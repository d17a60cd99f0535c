#include "mona/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mona/corpus_io.hpp"
#include "mona/errors.hpp"
#include "mona/metrics.hpp"

namespace mona {

namespace fs = std::filesystem;

Variant variant_by_name(const std::string& name) {
  const std::vector<DatasetClass> all = {DatasetClass::GaddySilent, DatasetClass::GaddyVocal, DatasetClass::LibriSpeech};
  // The baseline still packs audio-only items; they carry zero loss weight.
  if (name == "emg") return {name, LossWeights::preset("emg"), false, all};
  if (name == "emg_audio") return {name, LossWeights::preset("emg_audio"), false, all};
  if (name == "suptcon") return {name, LossWeights::preset("suptcon"), false, all};
  if (name == "crosscon") return {name, LossWeights::preset("crosscon"), false, all};
  if (name == "crosscon_dtw") return {name, LossWeights::preset("crosscon"), true, all};
  if (name == "suptcon_dtw") return {name, LossWeights::preset("suptcon"), true, all};
  if (name == "crosscon_suptcon_dtw") return {name, LossWeights::preset("crosscon_suptcon"), true, all};
  throw ConfigError("unknown variant '" + name + "'");
}

std::vector<std::string> variant_names() {
  return {"emg", "emg_audio", "suptcon", "crosscon", "crosscon_dtw", "suptcon_dtw", "crosscon_suptcon_dtw"};
}

void ExperimentConfig::validate() const {
  corpus.validate();
  loss.validate();
  optimizer.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_beam < 1 || nbest < 1 || nbest > eval_beam) throw ConfigError("need 1 <= nbest <= eval_beam");
  if (variants.empty() || seeds.empty()) throw ConfigError("need at least one variant and one seed");
  for (const auto& v : variants) variant_by_name(v);
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) throw ConfigError("duplicate seed");
}

ModelConfig ExperimentConfig::model_config(const Corpus& c, std::uint64_t seed) const {
  ModelConfig m;
  m.emg = {c.emg_features(), latent, encoder_blocks, encoder_hidden};
  m.audio = {c.audio_features(), latent, encoder_blocks, encoder_hidden};
  m.decoder_hidden = decoder_hidden;
  m.decoder_context = decoder_context;
  m.classes = c.alphabet.size();
  m.seed = seed;
  return m;
}

DecodeConfig ExperimentConfig::decode_config() const {
  DecodeConfig d;
  d.beam_width = eval_beam;
  d.lm_weight = lm_weight;
  d.word_bonus = word_bonus;
  return d;
}

TrainConfig ExperimentConfig::train_config(const Variant& v) const {
  TrainConfig t;
  t.weights = v.weights;
  t.loss = loss;
  t.silent_dtw = v.silent_dtw;
  t.optimizer = optimizer;
  return t;
}

ExperimentConfig ExperimentConfig::from_config(KeyValueConfig& kv) {
  ExperimentConfig c;
  c.corpus = read_corpus_config(kv, c.corpus);

  c.latent = kv.get_size("model.latent", c.latent);
  c.encoder_blocks = kv.get_size("model.encoder_blocks", c.encoder_blocks);
  c.encoder_hidden = kv.get_size("model.encoder_hidden", c.encoder_hidden);
  c.decoder_hidden = kv.get_size("model.decoder_hidden", c.decoder_hidden);
  c.decoder_context = kv.get_size("model.decoder_context", c.decoder_context);

  c.epochs = kv.get_size("train.epochs", c.epochs);
  c.max_len = kv.get_size("train.max_len", c.max_len);
  c.proportions[0] = kv.get_double("train.proportion_silent", c.proportions[0]);
  c.proportions[1] = kv.get_double("train.proportion_vocal", c.proportions[1]);
  c.proportions[2] = kv.get_double("train.proportion_librispeech", c.proportions[2]);
  c.loss.tau_cross = kv.get_double("train.tau_cross", c.loss.tau_cross);
  c.loss.tau_sup = kv.get_double("train.tau_sup", c.loss.tau_sup);
  c.optimizer.learning_rate = kv.get_double("train.learning_rate", c.optimizer.learning_rate);
  c.optimizer.decay = kv.get_double("train.decay", c.optimizer.decay);
  c.optimizer.clip_norm = kv.get_double("train.clip_norm", c.optimizer.clip_norm);

  c.eval_every = kv.get_size("eval.every", c.eval_every);
  c.eval_beam = kv.get_size("eval.beam", c.eval_beam);
  c.nbest = kv.get_size("eval.nbest", c.nbest);
  c.lm_weight = kv.get_double("eval.lm_weight", c.lm_weight);
  c.word_bonus = kv.get_double("eval.word_bonus", c.word_bonus);
  c.corpus_lm = kv.get_bool("eval.corpus_lm", c.corpus_lm);

  c.variants = kv.get_list("variants", c.variants);
  std::vector<std::string> seed_text;
  for (auto s : c.seeds) seed_text.push_back(std::to_string(s));
  c.seeds.clear();
  for (const auto& s : kv.get_list("seeds", seed_text)) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad seed '" + s + "'");
    c.seeds.push_back(v);
  }
  kv.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::load(path);
  return from_config(kv);
}

const char* const kMetricsHeader =
    "run,variant,seed,epoch,train_total,train_emg_ctc,train_audio_ctc,train_cross,train_sup,val_silent_ctc,"
    "wer_silent,wer_vocal,wer_audio";

namespace {

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_field(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

std::optional<double> parse_opt(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  return parse_field(s, line);
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    if (r.run.find(',') != std::string::npos || r.variant.find(',') != std::string::npos) {
      throw PreconditionError("run and variant names cannot contain commas");
    }
    out << r.run << ',' << r.variant << ',' << r.seed << ',' << r.epoch << ',' << num(r.train_total) << ','
        << opt(r.train_emg_ctc) << ',' << opt(r.train_audio_ctc) << ',' << opt(r.train_cross) << ','
        << opt(r.train_sup) << ',' << opt(r.val_silent_ctc) << ',' << opt(r.wer_silent) << ','
        << opt(r.wer_vocal) << ',' << opt(r.wer_audio) << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("unexpected metrics header", line_no);
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13) throw ParseError("expected 13 fields", line_no);
    MetricsRecord r;
    r.run = f[0];
    r.variant = f[1];
    r.seed = static_cast<std::uint64_t>(parse_field(f[2], line_no));
    r.epoch = static_cast<std::size_t>(parse_field(f[3], line_no));
    r.train_total = parse_field(f[4], line_no);
    r.train_emg_ctc = parse_opt(f[5], line_no);
    r.train_audio_ctc = parse_opt(f[6], line_no);
    r.train_cross = parse_opt(f[7], line_no);
    r.train_sup = parse_opt(f[8], line_no);
    r.val_silent_ctc = parse_opt(f[9], line_no);
    r.wer_silent = parse_opt(f[10], line_no);
    r.wer_vocal = parse_opt(f[11], line_no);
    r.wer_audio = parse_opt(f[12], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

Evaluation evaluate(const Model& model, const Corpus& corpus, const DecodeConfig& decode, const ArpaModel* lm,
                    std::size_t nbest, Split split) {
  Evaluation ev;
  auto run = [&](DatasetClass cls, Modality m, ConditionResult& out, bool with_ctc) {
    WerAccumulator acc;
    double ctc_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i : corpus.select(cls, split)) {
      const Utterance& u = corpus.utterances[i];
      const Tensor& signal = m == Modality::Emg ? *u.emg : *u.audio;
      const Tensor logits = model.logits(m, signal);
      NBestList list = beam_search(logits, corpus.alphabet, lm, decode, std::min(nbest, decode.beam_width));
      list.utterance = u.id;
      acc.add(list.top().transcript, u.text);
      out.references.push_back(u.text);
      out.nbest.push_back(std::move(list));
      if (with_ctc) {
        const auto label = corpus.label(u);
        ctc_sum += ctc_loss_value(logits, label, corpus.alphabet.blank()) / static_cast<double>(label.size());
      }
      ++n;
    }
    if (n > 0) {
      out.wer = acc.rate();
      if (with_ctc) ev.silent_ctc = ctc_sum / static_cast<double>(n);
    }
  };
  run(DatasetClass::GaddySilent, Modality::Emg, ev.silent, true);
  run(DatasetClass::GaddyVocal, Modality::Emg, ev.vocal, false);
  run(DatasetClass::LibriSpeech, Modality::Audio, ev.audio, false);
  return ev;
}

std::string estimate_bigram_arpa(const std::vector<std::string>& sentences, double discount) {
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must be in (0, 1)");
  std::map<std::string, double> uni;
  std::map<std::string, std::map<std::string, double>> bi;
  double total = 0.0;
  for (const auto& s : sentences) {
    auto words = split_words(s);
    words.push_back("</s>");
    std::string prev = "<s>";
    for (const auto& w : words) {
      uni[w] += 1.0;
      bi[prev][w] += 1.0;
      total += 1.0;
      prev = w;
    }
  }
  if (total == 0.0) throw PreconditionError("no text to estimate a language model from");

  // log10 P(w | h) for seen pairs and the backoff weight of each history.
  std::map<std::string, double> backoff;
  std::size_t bigram_count = 0;
  for (const auto& [h, next] : bi) {
    double count = 0.0, seen_uni = 0.0;
    for (const auto& [w, c] : next) count += c, seen_uni += uni[w] / total;
    const double left = discount * static_cast<double>(next.size()) / count;
    backoff[h] = seen_uni < 1.0 - 1e-12 ? std::log10(left / (1.0 - seen_uni)) : 0.0;
    bigram_count += next.size();
  }

  std::ostringstream out;
  out << "\\data\\\nngram 1=" << uni.size() + 1 << "\nngram 2=" << bigram_count << "\n\n\\1-grams:\n";
  out << "-99\t<s>\t" << num(backoff.count("<s>") ? backoff["<s>"] : 0.0) << '\n';
  for (const auto& [w, c] : uni) {
    out << num(std::log10(c / total)) << '\t' << w;
    if (auto it = backoff.find(w); it != backoff.end()) out << '\t' << num(it->second);
    out << '\n';
  }
  out << "\n\\2-grams:\n";
  for (const auto& [h, next] : bi) {
    double count = 0.0;
    for (const auto& [w, c] : next) count += c;
    for (const auto& [w, c] : next) out << num(std::log10((c - discount) / count)) << '\t' << h << ' ' << w << '\n';
  }
  out << "\n\\end\\\n";
  return out.str();
}

void check_bins(const PackingResult& result, const std::vector<PackingItem>& items, const PackingConfig& config) {
  std::map<std::size_t, const PackingItem*> by_index;
  std::set<DatasetClass> present;
  for (const auto& it : items) by_index[it.index] = &it, present.insert(it.tag);
  std::set<std::size_t> used;
  for (std::size_t b = 0; b < result.bins.size(); ++b) {
    const Bin& bin = result.bins[b];
    std::size_t length = 0;
    std::set<DatasetClass> classes;
    for (std::size_t idx : bin.items) {
      auto it = by_index.find(idx);
      if (it == by_index.end()) throw ContractError("bin " + std::to_string(b) + " holds an unknown item");
      if (!used.insert(idx).second) throw ContractError("item " + std::to_string(idx) + " packed twice");
      length += it->second->length;
      classes.insert(it->second->tag);
    }
    if (length != bin.length) throw ContractError("bin " + std::to_string(b) + " length bookkeeping is off");
    if (length > config.max_len) throw ContractError("bin " + std::to_string(b) + " exceeds max_len");
    for (DatasetClass r : config.required)
      if (present.count(r) && !classes.count(r)) {
        throw ContractError("bin " + std::to_string(b) + " lacks a " + std::string(to_string(r)) + " item");
      }
  }
}

namespace {

ClassProportions proportions_for(const ExperimentConfig& cfg, const Variant& v) {
  ClassProportions p{};
  double sum = 0.0;
  for (DatasetClass c : v.classes) sum += cfg.proportions[static_cast<std::size_t>(c)];
  if (sum <= 0.0) throw ConfigError("variant '" + v.name + "' has no sampling mass");
  for (DatasetClass c : v.classes) p[static_cast<std::size_t>(c)] = cfg.proportions[static_cast<std::size_t>(c)] / sum;
  return p;
}

std::optional<ArpaModel> corpus_lm(const Corpus& corpus, const ExperimentConfig& cfg) {
  if (!cfg.corpus_lm) return std::nullopt;
  std::vector<std::string> texts;
  for (const auto& u : corpus.utterances)
    if (u.split == Split::Train && u.cls != DatasetClass::GaddySilent) texts.push_back(u.text);
  std::istringstream in(estimate_bigram_arpa(texts));
  return ArpaModel::parse(in);
}

}  // namespace

RunResult run_single(const Corpus& corpus, const ExperimentConfig& cfg, const Variant& variant, std::uint64_t seed,
                     const RunHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  const std::string run = variant.name + "/seed" + std::to_string(seed);
  RunResult result{run, variant.name, seed, {}, Model(cfg.model_config(corpus, seed)), {}, 0.0};
  Model& model = result.model;
  const TrainConfig tc = cfg.train_config(variant);
  Optimizer optimizer(tc.optimizer);
  const auto lm = corpus_lm(corpus, cfg);
  const DecodeConfig decode = cfg.decode_config();

  PackingConfig pc;
  pc.max_len = cfg.max_len;
  pc.proportions = proportions_for(cfg, variant);
  pc.seed = seed;
  const std::vector<PackingItem> items = training_items(corpus, variant.classes);
  const EpochStream stream(items, pc);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const PackingResult packed = stream.epoch(epoch - 1);
    check_bins(packed, items, pc);
    MetricsRecord rec;
    rec.run = run;
    rec.variant = variant.name;
    rec.seed = seed;
    rec.epoch = epoch;
    double total = 0.0;
    std::map<int, std::pair<double, std::size_t>> parts;
    auto add = [&](int k, const std::optional<double>& v) {
      if (v) parts[k].first += *v, parts[k].second += 1;
    };
    for (const Bin& bin : packed.bins) {
      if (hooks.on_bin) hooks.on_bin(bin);
      StepMetrics m;
      try {
        m = train_step(model, optimizer, corpus, bin.items, tc);
      } catch (const NumericError& e) {
        throw NumericError(run + " epoch " + std::to_string(epoch) + ": " + e.what());
      }
      total += m.total;
      add(0, m.emg_ctc);
      add(1, m.audio_ctc);
      add(2, m.cross);
      add(3, m.sup);
    }
    if (packed.bins.empty()) throw ContractError(run + ": epoch produced no bins");
    rec.train_total = total / static_cast<double>(packed.bins.size());
    auto mean_of = [&](int k) -> std::optional<double> {
      auto it = parts.find(k);
      if (it == parts.end()) return std::nullopt;
      return it->second.first / static_cast<double>(it->second.second);
    };
    rec.train_emg_ctc = mean_of(0);
    rec.train_audio_ctc = mean_of(1);
    rec.train_cross = mean_of(2);
    rec.train_sup = mean_of(3);

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const std::uint64_t before = model.checksum();
      Evaluation ev = evaluate(model, corpus, decode, lm ? &*lm : nullptr, cfg.nbest);
      if (model.checksum() != before) throw ContractError("evaluation modified the model");
      rec.val_silent_ctc = ev.silent_ctc;
      rec.wer_silent = ev.silent.wer;
      rec.wer_vocal = ev.vocal.wer;
      rec.wer_audio = ev.audio.wer;
      result.final_eval = std::move(ev);
    }
    if (hooks.on_record) hooks.on_record(rec);
    result.records.push_back(std::move(rec));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<MetricsRecord> ExperimentResult::records() const {
  std::vector<MetricsRecord> out;
  for (const auto& r : runs) out.insert(out.end(), r.records.begin(), r.records.end());
  return out;
}

ExperimentResult run_experiment(const Corpus& corpus, const ExperimentConfig& cfg,
                                const std::optional<std::string>& out_dir, const RunHooks& hooks) {
  cfg.validate();
  ExperimentResult result;
  for (const auto& name : cfg.variants) {
    const Variant v = variant_by_name(name);
    for (std::uint64_t seed : cfg.seeds) result.runs.push_back(run_single(corpus, cfg, v, seed, hooks));
  }
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream metrics(fs::path(*out_dir) / "metrics.csv");
    write_metrics_csv(metrics, result.records());
    std::ofstream timing(fs::path(*out_dir) / "timing.csv");
    timing << "run,seconds\n";
    for (const auto& r : result.runs) {
      timing << r.run << ',' << num(r.seconds) << '\n';
      const fs::path dir = fs::path(*out_dir) / r.variant / ("seed" + std::to_string(r.seed));
      fs::create_directories(dir);
      save_checkpoint((dir / "model.ckpt").string(), r.model);
      std::ofstream nb(dir / "val_silent.nbest");
      write_nbest(nb, r.final_eval.silent.nbest);
    }
  }
  return result;
}

}  // namespace mona
