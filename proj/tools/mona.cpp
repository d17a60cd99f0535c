// Command-line front end: generate, train, decode, rescore, export, report.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "mona/corpus_io.hpp"
#include "mona/errors.hpp"
#include "mona/experiment.hpp"
#include "mona/lisa.hpp"
#include "mona/metrics.hpp"
#include "mona/report.hpp"

namespace fs = std::filesystem;
using namespace mona;

namespace {

KeyValueConfig load_settings(const std::string& path, const std::vector<std::string>& overrides) {
  KeyValueConfig kv;
  if (!path.empty()) kv = KeyValueConfig::load(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return kv;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

std::map<std::string, std::string> corpus_references(const Corpus& corpus) {
  std::map<std::string, std::string> refs;
  for (const auto& u : corpus.utterances) refs[u.id] = u.text;
  return refs;
}

struct Condition {
  DatasetClass cls;
  Modality modality;
};

Condition condition_from_string(const std::string& s) {
  if (s == "silent") return {DatasetClass::GaddySilent, Modality::Emg};
  if (s == "vocal") return {DatasetClass::GaddyVocal, Modality::Emg};
  if (s == "audio") return {DatasetClass::LibriSpeech, Modality::Audio};
  throw ConfigError("condition must be silent, vocal or audio");
}

Split split_from_string(const std::string& s) {
  for (Split v : {Split::Train, Split::Validation, Split::Test})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<NBestList> read_nbest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open n-best file '" + path + "'");
  return read_nbest(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal silent speech toolkit"};
  app.require_subcommand(1);

  // generate
  std::string gen_config, gen_out;
  std::vector<std::string> gen_set;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic paired-modality corpus");
  gen->add_option("--config", gen_config, "Experiment settings file; only corpus.* keys matter");
  gen->add_option("--set", gen_set, "Override a setting, key=value");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  std::string tr_config, tr_corpus, tr_out;
  std::vector<std::string> tr_set, tr_variants;
  std::vector<std::uint64_t> tr_seeds;
  auto* train = app.add_subcommand("train", "Train loss variants over seeds");
  train->add_option("--config", tr_config, "Experiment settings file");
  train->add_option("--set", tr_set, "Override a setting, key=value");
  train->add_option("--variant", tr_variants, "Variant name (repeatable)");
  train->add_option("--seed", tr_seeds, "Model seed (repeatable)");
  train->add_option("--corpus", tr_corpus, "Corpus file from 'generate' (default: generate from settings)");
  train->add_option("--out", tr_out, "Output directory")->required();

  // decode
  std::string dec_ckpt, dec_corpus, dec_lm, dec_nbest_out, dec_condition = "silent", dec_split = "validation";
  std::size_t dec_beam = kTrainingBeamWidth, dec_nbest = 10;
  double dec_alpha = DecodeConfig{}.lm_weight, dec_beta = DecodeConfig{}.word_bonus;
  auto* dec = app.add_subcommand("decode", "Beam-search decode a split with a checkpoint");
  dec->add_option("--checkpoint", dec_ckpt)->required();
  dec->add_option("--corpus", dec_corpus)->required();
  dec->add_option("--beam", dec_beam, "Beam width");
  dec->add_option("--lm", dec_lm, "ARPA language model");
  dec->add_option("--lm-weight", dec_alpha);
  dec->add_option("--word-bonus", dec_beta);
  dec->add_option("--nbest", dec_nbest, "Hypotheses kept per utterance");
  dec->add_option("--condition", dec_condition, "silent, vocal or audio");
  dec->add_option("--split", dec_split, "train, validation or test");
  dec->add_option("--nbest-out", dec_nbest_out, "Write n-best lists here");

  // rescore
  std::vector<std::string> rs_nbest;
  std::string rs_template = "direct", rs_client = "mock", rs_mock = "identity", rs_corpus, rs_out, rs_model;
  std::size_t rs_top = 10, rs_per_model = 1, rs_retries = 2, rs_in_flight = 4;
  bool rs_concat = false, rs_system = false;
  auto* rs = app.add_subcommand("rescore", "Ask a chat model to pick or repair transcripts");
  rs->add_option("--nbest", rs_nbest, "N-best file; several files form an ensemble")->required();
  rs->add_option("--template", rs_template, "direct, ensemble, chain_of_reasoning or nll");
  rs->add_option("--client", rs_client, "mock or live");
  rs->add_option("--mock", rs_mock, "identity or oracle");
  rs->add_option("--corpus", rs_corpus, "Corpus file with reference texts");
  rs->add_option("--top", rs_top, "Beams per utterance for a single n-best file");
  rs->add_option("--per-model", rs_per_model, "Candidates per model for ensembles");
  rs->add_flag("--concatenate", rs_concat, "Ensemble order: model by model instead of round robin");
  rs->add_option("--model", rs_model, "Chat model name");
  rs->add_option("--retries", rs_retries);
  rs->add_option("--in-flight", rs_in_flight);
  rs->add_flag("--system-role", rs_system, "Send the prompt as a system message");
  rs->add_option("--out", rs_out, "Write results as TSV");

  // export
  std::vector<std::string> ex_nbest;
  std::string ex_template = "direct", ex_corpus, ex_out;
  std::size_t ex_count = 0, ex_top = 10, ex_per_model = 1;
  std::uint64_t ex_seed = 0;
  auto* ex = app.add_subcommand("export", "Write a chat fine-tuning dataset (JSONL)");
  ex->add_option("--nbest", ex_nbest)->required();
  ex->add_option("--template", ex_template);
  ex->add_option("--corpus", ex_corpus)->required();
  ex->add_option("--count", ex_count, "Utterances exported; the rest are held out")->required();
  ex->add_option("--top", ex_top);
  ex->add_option("--per-model", ex_per_model);
  ex->add_option("--seed", ex_seed);
  ex->add_option("--out", ex_out)->required();

  // report
  std::vector<std::string> rp_runs;
  std::string rp_csv, rp_table;
  std::vector<std::string> rp_spearman;
  auto* rp = app.add_subcommand("report", "Summaries, curves and rank correlation");
  rp->add_option("--runs", rp_runs, "metrics.csv files");
  rp->add_option("--table", rp_table, "Any CSV with a header, for --spearman");
  rp->add_option("--csv", rp_csv, "Directory for summary.csv, series.csv and minima.csv");
  rp->add_option("--spearman", rp_spearman, "Two column names")->expected(2);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      KeyValueConfig kv = load_settings(gen_config, gen_set);
      SyntheticCorpusConfig cfg = ExperimentConfig::from_config(kv).corpus;
      if (gen_seed) cfg.seed = *gen_seed;
      const Corpus corpus = generate_corpus(cfg);
      fs::create_directories(gen_out);
      save_corpus((fs::path(gen_out) / "corpus.txt").string(), corpus);
      auto manifest = open_out(fs::path(gen_out) / "manifest.tsv");
      write_manifest(manifest, corpus);
      std::cout << "wrote " << corpus.utterances.size() << " utterances to " << gen_out << "\n";
    } else if (*train) {
      KeyValueConfig kv = load_settings(tr_config, tr_set);
      ExperimentConfig cfg = ExperimentConfig::from_config(kv);
      if (!tr_variants.empty()) cfg.variants = tr_variants;
      if (!tr_seeds.empty()) cfg.seeds = tr_seeds;
      const Corpus corpus = tr_corpus.empty() ? generate_corpus(cfg.corpus) : load_corpus(tr_corpus);
      if (!tr_corpus.empty()) cfg.corpus = corpus.config;
      RunHooks hooks;
      hooks.on_record = [](const MetricsRecord& r) {
        std::printf("%s epoch %zu loss %.4f", r.run.c_str(), r.epoch, r.train_total);
        if (r.wer_silent) std::printf(" wer_silent %.4f", *r.wer_silent);
        if (r.wer_vocal) std::printf(" wer_vocal %.4f", *r.wer_vocal);
        if (r.wer_audio) std::printf(" wer_audio %.4f", *r.wer_audio);
        std::printf("\n");
        std::fflush(stdout);
      };
      const ExperimentResult result = run_experiment(corpus, cfg, tr_out, hooks);
      write_summary_csv(std::cout, summarize(result.records()));
    } else if (*dec) {
      const Model model = load_checkpoint(dec_ckpt);
      const Corpus corpus = load_corpus(dec_corpus);
      std::optional<ArpaModel> lm;
      if (!dec_lm.empty()) lm = ArpaModel::load(dec_lm);
      DecodeConfig dc;
      dc.beam_width = dec_beam;
      dc.lm_weight = lm ? dec_alpha : 0.0;
      dc.word_bonus = dec_beta;
      dc.validate();
      const Condition cond = condition_from_string(dec_condition);
      std::vector<NBestList> lists;
      WerAccumulator acc;
      for (std::size_t i : corpus.select(cond.cls, split_from_string(dec_split))) {
        const Utterance& u = corpus.utterances[i];
        const Tensor& signal = cond.modality == Modality::Emg ? *u.emg : *u.audio;
        NBestList list = beam_search(model.logits(cond.modality, signal), corpus.alphabet, lm ? &*lm : nullptr, dc,
                                     std::min(dec_nbest, dec_beam));
        list.utterance = u.id;
        acc.add(list.top().transcript, u.text);
        lists.push_back(std::move(list));
      }
      if (lists.empty()) throw ConfigError("no utterances for that condition and split");
      if (!dec_nbest_out.empty()) {
        auto out = open_out(dec_nbest_out);
        write_nbest(out, lists);
      }
      std::printf("utterances %zu wer %.4f\n", lists.size(), acc.rate());
    } else if (*rs || *ex) {
      const bool is_rescore = static_cast<bool>(*rs);
      const auto& files = is_rescore ? rs_nbest : ex_nbest;
      const PromptVariant variant = prompt_variant_from_string(is_rescore ? rs_template : ex_template);
      const std::size_t top = is_rescore ? rs_top : ex_top;
      const std::size_t per_model = is_rescore ? rs_per_model : ex_per_model;

      std::vector<std::map<std::string, NBestList>> by_model;
      std::vector<std::string> order;
      for (const auto& f : files) {
        auto& m = by_model.emplace_back();
        for (auto& l : read_nbest_file(f)) {
          if (by_model.size() == 1) order.push_back(l.utterance);
          m.emplace(l.utterance, std::move(l));
        }
      }
      std::vector<CandidateSet> sets;
      for (const auto& id : order) {
        if (by_model.size() == 1) {
          sets.push_back(candidates_from_nbest(by_model[0].at(id), top));
          continue;
        }
        std::vector<NBestList> lists;
        for (const auto& m : by_model) {
          auto it = m.find(id);
          if (it == m.end()) throw ConfigError("utterance '" + id + "' missing from an ensemble member");
          lists.push_back(it->second);
        }
        sets.push_back(ensemble_candidates(lists, per_model, rs_concat ? EnsembleOrder::Concatenate
                                                                       : EnsembleOrder::RoundRobin));
      }
      const std::string corpus_path = is_rescore ? rs_corpus : ex_corpus;
      std::map<std::string, std::string> refs;
      if (!corpus_path.empty()) refs = corpus_references(load_corpus(corpus_path));

      if (!is_rescore) {
        const FinetuneExport fx = export_finetune_dataset(sets, refs, variant, ex_count, ex_seed);
        auto out = open_out(ex_out);
        for (const auto& r : fx.records) out << r << '\n';
        std::printf("exported %zu held out %zu skipped %zu\n", fx.exported.size(), fx.held_out.size(),
                    fx.skipped.size());
        return 0;
      }

      std::unique_ptr<ChatClient> client;
      if (rs_client == "live") {
        client = std::make_unique<HttpChatClient>();
      } else if (rs_client == "mock" && rs_mock == "identity") {
        client = std::make_unique<IdentityMockClient>(variant);
      } else if (rs_client == "mock" && rs_mock == "oracle") {
        if (refs.empty()) throw ConfigError("the oracle mock needs --corpus");
        client = std::make_unique<OracleMockClient>(variant, refs);
      } else {
        throw ConfigError("unknown client '" + rs_client + "' / mock '" + rs_mock + "'");
      }
      RescorePolicy policy;
      if (!rs_model.empty()) policy.model = rs_model;
      policy.max_retries = rs_retries;
      policy.max_in_flight = rs_in_flight;
      policy.system_role = rs_system;
      const auto results = rescore(sets, *client, variant, policy);
      if (!rs_out.empty()) {
        auto out = open_out(rs_out);
        out << "utterance\tstatus\ttranscript\tfallback\tattempts\n";
        for (const auto& r : results) {
          out << r.utterance << '\t' << to_string(r.status) << '\t' << r.transcript.value_or("") << '\t'
              << r.fallback << '\t' << r.attempts << '\n';
        }
      }
      std::size_t ok = 0;
      for (const auto& r : results) ok += r.status == RescoreStatus::Ok;
      std::printf("utterances %zu compliant %zu\n", results.size(), ok);
      if (!refs.empty()) {
        const RescoreWer w = rescore_wer(results, refs);
        std::printf("top1 wer %.4f rescored wer %.4f", top1_wer(sets, refs), w.included);
        if (w.excluded) std::printf(" (compliant only %.4f)", *w.excluded);
        std::printf("\n");
      }
    } else if (*rp) {
      std::vector<MetricsRecord> records;
      for (const auto& f : rp_runs) {
        std::ifstream in(f);
        if (!in) throw ConfigError("cannot open '" + f + "'");
        auto r = read_metrics_csv(in);
        records.insert(records.end(), r.begin(), r.end());
      }
      if (records.empty() && rp_table.empty()) throw ConfigError("nothing to report: give --runs or --table");
      if (!records.empty()) {
        const auto summary = summarize(records);
        write_summary_csv(std::cout, summary);
        if (!rp_csv.empty()) {
          auto s = open_out(fs::path(rp_csv) / "summary.csv");
          write_summary_csv(s, summary);
          auto series = open_out(fs::path(rp_csv) / "series.csv");
          write_series_csv(series, records);
          auto minima = open_out(fs::path(rp_csv) / "minima.csv");
          minima << "run,best_wer_epoch,best_ctc_epoch\n";
          for (const auto& m : curve_minima(records)) {
            minima << m.run << ',' << (m.best_wer_epoch ? std::to_string(*m.best_wer_epoch) : "") << ','
                   << (m.best_ctc_epoch ? std::to_string(*m.best_ctc_epoch) : "") << '\n';
          }
        }
      }
      if (!rp_spearman.empty()) {
        Table table;
        if (!rp_table.empty()) {
          std::ifstream in(rp_table);
          if (!in) throw ConfigError("cannot open '" + rp_table + "'");
          table = read_table_csv(in);
        } else {
          table = records_table(records);
        }
        const SpearmanResult r = spearman_columns(table, rp_spearman[0], rp_spearman[1]);
        std::printf("spearman %s %s rho %.6f p %.6f (%s)\n", rp_spearman[0].c_str(), rp_spearman[1].c_str(), r.rho,
                    r.p_value, r.exact ? "exact" : "t approximation");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
