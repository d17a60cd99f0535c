#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mona/alignment.hpp"
#include "mona/corpus.hpp"
#include "mona/corpus_io.hpp"
#include "mona/decoding.hpp"
#include "mona/errors.hpp"
#include "mona/experiment.hpp"
#include "mona/lisa.hpp"
#include "mona/losses.hpp"
#include "mona/metrics.hpp"
#include "mona/model.hpp"
#include "mona/report.hpp"
#include "mona/sampler.hpp"

namespace py = pybind11;
using namespace mona;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Tensor::matrix(r, c, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<ColumnInfo> columns_from(const std::vector<std::string>& modalities,
                                     const std::vector<std::size_t>& utterances,
                                     const std::vector<std::size_t>& timesteps,
                                     const std::vector<std::optional<int>>& labels) {
  const std::size_t n = modalities.size();
  if (utterances.size() != n || timesteps.size() != n || (!labels.empty() && labels.size() != n)) {
    throw DimensionError("column annotations must all have one entry per column");
  }
  std::vector<ColumnInfo> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (modalities[i] == "emg") cols[i].modality = Modality::Emg;
    else if (modalities[i] == "audio") cols[i].modality = Modality::Audio;
    else throw ConfigError("modality must be 'emg' or 'audio'");
    cols[i].utterance = utterances[i];
    cols[i].timestep = timesteps[i];
    if (!labels.empty()) cols[i].label = labels[i];
  }
  return cols;
}

// Loss value and gradient with respect to the first argument.
template <typename F>
std::pair<double, Array> value_and_grad(const Tensor& x, F&& f) {
  Tape tape;
  Var v = tape.leaf(x);
  Var loss = f(v);
  tape.backward(loss);
  return {tape.value(loss).item(), to_array(tape.grad(v))};
}

Modality modality_from(const std::string& s) {
  if (s == "emg") return Modality::Emg;
  if (s == "audio") return Modality::Audio;
  throw ConfigError("modality must be 'emg' or 'audio'");
}

ExperimentConfig experiment_from_settings(const std::map<std::string, std::string>& settings) {
  KeyValueConfig kv;
  for (const auto& [k, v] : settings) kv.set(k, v);
  return ExperimentConfig::from_config(kv);
}

std::map<std::string, std::optional<double>> record_dict(const MetricsRecord& r) {
  return {{"train_total", r.train_total},       {"train_emg_ctc", r.train_emg_ctc},
          {"train_audio_ctc", r.train_audio_ctc}, {"train_cross", r.train_cross},
          {"train_sup", r.train_sup},           {"val_silent_ctc", r.val_silent_ctc},
          {"wer_silent", r.wer_silent},         {"wer_vocal", r.wer_vocal},
          {"wer_audio", r.wer_audio}};
}

}  // namespace

PYBIND11_MODULE(_mona, m) {
  m.doc() = "Multimodal silent speech recognition toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<TransportError>(m, "TransportError", PyExc_RuntimeError);

  // losses
  m.def(
      "ctc_loss",
      [](const Array& logits, const std::vector<int>& label, int blank) {
        return value_and_grad(to_tensor(logits), [&](Var v) { return ctc_loss(v, label, blank); });
      },
      py::arg("logits"), py::arg("label"), py::arg("blank") = 0,
      "CTC negative log-likelihood of a T x K logit array and its gradient.");
  m.def(
      "crosscon",
      [](const Array& z, const std::vector<std::string>& modalities, const std::vector<std::size_t>& utterances,
         const std::vector<std::size_t>& timesteps, double tau) {
        auto cols = columns_from(modalities, utterances, timesteps, {});
        return value_and_grad(to_tensor(z), [&](Var v) {
          return crosscon(LatentBatch::paired_by_time(v, cols), tau);
        });
      },
      py::arg("z"), py::arg("modalities"), py::arg("utterances"), py::arg("timesteps"), py::arg("tau") = 0.1,
      "Cross-modal contrastive loss over the columns of z (F x L); columns pair by (utterance, timestep).");
  m.def(
      "suptcon",
      [](const Array& z, const std::vector<std::optional<int>>& labels, const std::vector<std::string>& modalities,
         const std::vector<std::size_t>& utterances, const std::vector<std::size_t>& timesteps, double tau) {
        auto cols = columns_from(modalities, utterances, timesteps, labels);
        return value_and_grad(to_tensor(z), [&](Var v) {
          return suptcon(LatentBatch::paired_by_time(v, cols), tau);
        });
      },
      py::arg("z"), py::arg("labels"), py::arg("modalities"), py::arg("utterances"), py::arg("timesteps"),
      py::arg("tau") = 0.1, "Supervised temporal contrastive loss; None labels never match.");

  // alignment
  m.def(
      "dtw_align",
      [](const Array& z1, const Array& z2) {
        const Alignment a = dtw_align(distance_matrix(to_tensor(z1), to_tensor(z2)));
        return py::make_tuple(a.cost, a.path.steps);
      },
      py::arg("z1"), py::arg("z2"), "Minimum-cost monotone alignment between the columns of two F x T arrays.");
  m.def(
      "warp_sources",
      [](const std::vector<std::pair<std::size_t, std::size_t>>& steps, std::size_t t1, std::size_t t2) {
        return warp_sources(WarpPath{steps}, t1, t2);
      },
      py::arg("path"), py::arg("t1"), py::arg("t2"));

  // sampler
  m.def(
      "pack",
      [](const std::vector<std::size_t>& lengths, const std::vector<std::string>& classes, std::size_t max_len,
         std::vector<double> proportions, std::uint64_t seed) {
        if (lengths.size() != classes.size()) throw DimensionError("lengths and classes differ in size");
        if (proportions.size() != kNumDatasetClasses) throw DimensionError("need three proportions");
        std::vector<PackingItem> items;
        for (std::size_t i = 0; i < lengths.size(); ++i)
          items.push_back({i, lengths[i], dataset_class_from_string(classes[i])});
        PackingConfig cfg;
        cfg.max_len = max_len;
        std::copy(proportions.begin(), proportions.end(), cfg.proportions.begin());
        cfg.seed = seed;
        const PackingResult r = pack(items, cfg);
        std::vector<std::vector<std::size_t>> bins;
        for (const auto& b : r.bins) bins.push_back(b.items);
        return bins;
      },
      py::arg("lengths"), py::arg("classes"), py::arg("max_len"),
      py::arg("proportions") = std::vector<double>{0.112, 0.388, 0.5}, py::arg("seed") = 0,
      "Greedy class-weighted bin packing; returns bins of item indices. Classes: gaddy_silent, gaddy_vocal, "
      "librispeech.");

  // decoding
  py::class_<Alphabet>(m, "Alphabet")
      .def(py::init<std::string, int>(), py::arg("symbols"), py::arg("blank") = 0)
      .def_static("lowercase", &Alphabet::lowercase)
      .def_property_readonly("size", &Alphabet::size)
      .def_property_readonly("blank", &Alphabet::blank)
      .def_property_readonly("symbols", &Alphabet::symbols)
      .def("encode", &Alphabet::encode)
      .def("decode", [](const Alphabet& a, const std::vector<int>& ids) { return a.decode(ids); });

  py::class_<ArpaModel>(m, "ArpaModel")
      .def_static("load", &ArpaModel::load)
      .def_static("parse",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return ArpaModel::parse(in);
                  })
      .def_property_readonly("order", &ArpaModel::order)
      .def("log10_prob", [](const ArpaModel& lm, const std::vector<std::string>& context,
                            const std::string& word) { return lm.log10_prob(context, word); })
      .def("sentence_log10",
           [](const ArpaModel& lm, const std::vector<std::string>& words) { return lm.sentence_log10(words); });

  py::class_<NBestEntry>(m, "NBestEntry")
      .def_readonly("transcript", &NBestEntry::transcript)
      .def_readonly("acoustic", &NBestEntry::acoustic)
      .def_readonly("lm", &NBestEntry::lm)
      .def_readonly("combined", &NBestEntry::combined)
      .def("__repr__", [](const NBestEntry& e) { return "<NBestEntry '" + e.transcript + "'>"; });

  m.def(
      "greedy_decode", [](const Array& logits, const Alphabet& a) { return greedy_ctc_decode(to_tensor(logits), a); },
      py::arg("logits"), py::arg("alphabet"));
  m.def(
      "beam_search",
      [](const Array& logits, const Alphabet& a, const ArpaModel* lm, std::size_t beam, double alpha, double beta,
         std::size_t k) {
        DecodeConfig cfg;
        cfg.beam_width = beam;
        cfg.lm_weight = alpha;
        cfg.word_bonus = beta;
        return beam_search(to_tensor(logits), a, lm, cfg, k).entries;
      },
      py::arg("logits"), py::arg("alphabet"), py::arg("lm") = nullptr, py::arg("beam_width") = kTrainingBeamWidth,
      py::arg("lm_weight") = 0.0, py::arg("word_bonus") = 0.0, py::arg("nbest") = 1,
      "CTC prefix beam search; returns the n best entries, best first.");

  // metrics
  m.def("wer", py::overload_cast<std::string_view, std::string_view>(&wer), py::arg("hypothesis"),
        py::arg("reference"));
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const SpearmanResult r = spearman_rho(x, y);
        return py::make_tuple(r.rho, r.p_value, r.exact);
      },
      py::arg("x"), py::arg("y"), "Returns (rho, p_value, exact).");

  // corpus
  py::class_<SyntheticCorpusConfig>(m, "CorpusConfig")
      .def(py::init<>())
      .def_readwrite("letters", &SyntheticCorpusConfig::letters)
      .def_readwrite("vocabulary", &SyntheticCorpusConfig::vocabulary)
      .def_readwrite("silent", &SyntheticCorpusConfig::silent)
      .def_readwrite("vocal", &SyntheticCorpusConfig::vocal)
      .def_readwrite("librispeech", &SyntheticCorpusConfig::librispeech)
      .def_readwrite("val_silent", &SyntheticCorpusConfig::val_silent)
      .def_readwrite("val_vocal", &SyntheticCorpusConfig::val_vocal)
      .def_readwrite("val_librispeech", &SyntheticCorpusConfig::val_librispeech)
      .def_readwrite("emg_noise", &SyntheticCorpusConfig::emg_noise)
      .def_readwrite("audio_noise", &SyntheticCorpusConfig::audio_noise)
      .def_readwrite("silent_shift", &SyntheticCorpusConfig::silent_shift)
      .def_readwrite("seed", &SyntheticCorpusConfig::seed);

  py::class_<Utterance>(m, "Utterance")
      .def_readonly("id", &Utterance::id)
      .def_readonly("text", &Utterance::text)
      .def_property_readonly("cls", [](const Utterance& u) { return std::string(to_string(u.cls)); })
      .def_property_readonly("split", [](const Utterance& u) { return std::string(to_string(u.split)); })
      .def_property_readonly("emg", [](const Utterance& u) -> py::object {
        return u.emg ? py::object(to_array(*u.emg)) : py::none();
      })
      .def_property_readonly("audio", [](const Utterance& u) -> py::object {
        return u.audio ? py::object(to_array(*u.audio)) : py::none();
      })
      .def_readonly("phonemes", &Utterance::phonemes)
      .def_readonly("parallel", &Utterance::parallel);

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("alphabet", &Corpus::alphabet)
      .def_readonly("vocabulary", &Corpus::vocabulary)
      .def_readonly("utterances", &Corpus::utterances)
      .def("save", [](const Corpus& c, const std::string& path) { save_corpus(path, c); })
      .def_static("load", [](const std::string& path) { return load_corpus(path); });
  m.def("generate_corpus", &generate_corpus, py::arg("config") = SyntheticCorpusConfig{});

  // model
  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
      .def("save", [](const Model& model, const std::string& path) { save_checkpoint(path, model); })
      .def("logits", [](const Model& model, const std::string& modality,
                        const Array& signal) { return to_array(model.logits(modality_from(modality), to_tensor(signal))); })
      .def("encode", [](const Model& model, const std::string& modality,
                        const Array& signal) { return to_array(model.encode(modality_from(modality), to_tensor(signal))); })
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("checksum", &Model::checksum);

  // experiment
  m.def(
      "run_experiment",
      [](const Corpus& corpus, const std::map<std::string, std::string>& settings,
         const std::optional<std::string>& out_dir) {
        const ExperimentResult r = run_experiment(corpus, experiment_from_settings(settings), out_dir);
        py::list runs;
        for (const auto& run : r.runs) {
          py::list records;
          for (const auto& rec : run.records) {
            py::dict d;
            d["epoch"] = rec.epoch;
            for (const auto& [k, v] : record_dict(rec)) d[py::str(k)] = v ? py::object(py::float_(*v)) : py::none();
            records.append(d);
          }
          py::dict d;
          d["run"] = run.run;
          d["variant"] = run.variant;
          d["seed"] = run.seed;
          d["records"] = records;
          d["model"] = run.model;
          runs.append(d);
        }
        return runs;
      },
      py::arg("corpus"), py::arg("settings") = std::map<std::string, std::string>{},
      py::arg("out_dir") = std::nullopt,
      "Trains every configured variant and seed. Settings use the config-file keys, e.g. {'train.epochs': '5'}.");
  m.def("variant_names", &variant_names);
  m.def(
      "summarize_csv",
      [](const std::string& metrics_csv) {
        std::istringstream in(metrics_csv);
        std::ostringstream out;
        write_summary_csv(out, summarize(read_metrics_csv(in)));
        return out.str();
      },
      py::arg("metrics_csv"), "Per-variant summary CSV from metrics CSV text.");

  // lisa
  m.def(
      "build_prompt",
      [](const std::string& variant, const std::vector<std::string>& candidates,
         const std::optional<std::vector<double>>& nll) {
        CandidateSet s{"", candidates, CandidateSource::TopBeams, nll};
        return build_prompt(prompt_variant_from_string(variant), s);
      },
      py::arg("variant"), py::arg("candidates"), py::arg("nll") = std::nullopt,
      "Variants: direct, ensemble, chain_of_reasoning, nll.");
  m.def(
      "parse_response",
      [](const std::string& variant, const std::string& raw) {
        return parse_response(prompt_variant_from_string(variant), raw).transcript;
      },
      py::arg("variant"), py::arg("raw"), "Normalized transcript, or None if the reply is noncompliant.");
  m.def("normalize_response", &normalize_response);
  m.def(
      "rescore_oracle",
      [](const std::vector<std::vector<std::string>>& candidates, const std::vector<std::string>& references,
         const std::string& variant) {
        if (candidates.size() != references.size()) throw DimensionError("one reference per candidate set");
        const PromptVariant v = prompt_variant_from_string(variant);
        std::vector<CandidateSet> sets;
        std::map<std::string, std::string> refs;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          const std::string id = "u" + std::to_string(i);
          sets.push_back({id, candidates[i], CandidateSource::Ensemble, std::nullopt});
          refs[id] = references[i];
        }
        OracleMockClient client(v, refs);
        std::vector<std::string> out;
        for (const auto& r : rescore(sets, client, v)) out.push_back(r.final_transcript());
        return out;
      },
      py::arg("candidates"), py::arg("references"), py::arg("variant") = "ensemble",
      "Rescores with a mock client that knows the references (an upper bound).");
}
