#include "mona/lisa.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <random>
#include <thread>

#include "json.hpp"

#include "mona/errors.hpp"
#include "mona/metrics.hpp"

namespace mona {

namespace {

const std::string kDirectInstruction =
    "Your task is to perform automatic speech recognition. Below are multiple candidate transcriptions, listed "
    "from most likely to least likely. Choose the transcription that is most accurate, ensuring it is "
    "contextually and grammatically correct. Focus on key differences in the options that change the meaning or "
    "correctness. Avoid selections with repetitive or nonsensical phrases. In cases of ambiguity, select the "
    "option that is most coherent and contextually sound. Respond with the chosen transcription only, without "
    "any introductory text.";

// The trailing double quote is part of the published text.
const std::string kChainInstruction =
    "Your task is to perform automatic speech recognition. Below are multiple candidate transcriptions, listed "
    "from most likely to least likely. Begin your response with a Chain of Reasoning, explaining your analysis "
    "and decision-making process in choosing the most accurate transcription. After your analysis, clearly "
    "indicate your final choice with the cue 'TRANSCRIPT: '. Ensure the transcription you choose is "
    "contextually and grammatically correct. Focus on key differences in the options that change the meaning or "
    "correctness. Avoid selections with repetitive or nonsensical phrases. In cases of ambiguity, select the "
    "option that is most coherent and contextually sound. Respond first with your reasoning, followed by "
    "'TRANSCRIPT: ' and then the chosen transcription.\"";

const std::string kNllInstruction =
    "Your task is automatic speech recognition.\n"
    "Below are the candidate transcriptions along with their\n"
    "negative log-likelihood from a CTC beam search.\n"
    "Respond with the correct transcription,\n"
    "without any introductory text.";

std::size_t instruction_lines(PromptVariant v) { return v == PromptVariant::NllAnnotated ? 5 : 1; }

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    out.push_back(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_refusal(std::string_view normalized) {
  static const char* kMarkers[] = {"i cannot", "i can't", "i can not", "i'm sorry", "i am sorry", "sorry,",
                                   "i'm unable", "i am unable", "as an ai"};
  for (const char* m : kMarkers)
    if (normalized.rfind(m, 0) == 0) return true;
  return false;
}

std::string format_nll(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void CandidateSet::validate() const {
  if (candidates.empty()) throw PreconditionError("candidate set '" + utterance + "' is empty");
  for (const auto& c : candidates)
    if (c.find_first_of("\n\t") != std::string::npos) {
      throw PreconditionError("candidate '" + c + "' contains a line break or tab");
    }
  if (nll && nll->size() != candidates.size()) throw PreconditionError("one NLL per candidate required");
}

CandidateSet candidates_from_nbest(const NBestList& list, std::size_t k) {
  CandidateSet set;
  set.utterance = list.utterance;
  set.source = list.source == NBestSource::Ensemble ? CandidateSource::Ensemble : CandidateSource::TopBeams;
  std::vector<double> nll;
  for (std::size_t i = 0; i < std::min(k, list.entries.size()); ++i) {
    set.candidates.push_back(list.entries[i].transcript);
    nll.push_back(-list.entries[i].combined);
  }
  set.nll = std::move(nll);
  return set;
}

CandidateSet ensemble_candidates(std::span<const NBestList> per_model, std::size_t per_model_count,
                                 EnsembleOrder order) {
  if (per_model.empty()) throw PreconditionError("ensemble needs at least one model");
  if (per_model_count == 0) throw PreconditionError("ensemble needs at least one candidate per model");
  CandidateSet set;
  set.utterance = per_model.front().utterance;
  set.source = CandidateSource::Ensemble;
  for (const auto& l : per_model)
    if (l.utterance != set.utterance) throw PreconditionError("ensemble lists disagree on the utterance");
  auto take = [&](const NBestList& l, std::size_t r) {
    if (r < l.entries.size()) set.candidates.push_back(l.entries[r].transcript);
  };
  if (order == EnsembleOrder::RoundRobin) {
    for (std::size_t r = 0; r < per_model_count; ++r)
      for (const auto& l : per_model) take(l, r);
  } else {
    for (const auto& l : per_model)
      for (std::size_t r = 0; r < per_model_count; ++r) take(l, r);
  }
  return set;
}

std::string to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::Direct: return "direct";
    case PromptVariant::Ensemble: return "ensemble";
    case PromptVariant::ChainOfReasoning: return "chain_of_reasoning";
    case PromptVariant::NllAnnotated: return "nll";
  }
  return "?";
}

PromptVariant prompt_variant_from_string(std::string_view s) {
  for (PromptVariant v : {PromptVariant::Direct, PromptVariant::Ensemble, PromptVariant::ChainOfReasoning,
                          PromptVariant::NllAnnotated})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown prompt template '" + std::string(s) + "'");
}

const std::string& prompt_instruction(PromptVariant v) {
  switch (v) {
    case PromptVariant::ChainOfReasoning: return kChainInstruction;
    case PromptVariant::NllAnnotated: return kNllInstruction;
    default: return kDirectInstruction;
  }
}

std::string build_prompt(PromptVariant v, const CandidateSet& set) {
  set.validate();
  if (v == PromptVariant::NllAnnotated && !set.nll) throw ConfigError("NLL prompt needs per-candidate NLL values");
  std::string out = prompt_instruction(v);
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    out.push_back('\n');
    out += set.candidates[i];
    if (v == PromptVariant::NllAnnotated) out += "\t" + format_nll((*set.nll)[i]);
  }
  return out;
}

CandidateSet parse_prompt(PromptVariant v, std::string_view prompt) {
  const auto lines = split_lines(prompt);
  const std::size_t head = instruction_lines(v);
  if (lines.size() <= head) throw ParseError("prompt has no candidate lines", lines.size());
  std::string instruction;
  for (std::size_t i = 0; i < head; ++i) instruction += (i ? "\n" : "") + std::string(lines[i]);
  if (instruction != prompt_instruction(v)) throw ParseError("instruction text does not match the template", 1);
  CandidateSet set;
  std::vector<double> nll;
  for (std::size_t i = head; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (v == PromptVariant::NllAnnotated) {
      const auto tab = line.rfind('\t');
      if (tab == std::string_view::npos) throw ParseError("candidate line without NLL", i + 1);
      const std::string_view num = line.substr(tab + 1);
      double x = 0.0;
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), x);
      if (ec != std::errc() || p != num.data() + num.size()) throw ParseError("bad NLL value", i + 1);
      nll.push_back(x);
      line = line.substr(0, tab);
    }
    set.candidates.emplace_back(line);
  }
  if (v == PromptVariant::NllAnnotated) set.nll = std::move(nll);
  set.source = v == PromptVariant::Ensemble ? CandidateSource::Ensemble : CandidateSource::TopBeams;
  return set;
}

std::string normalize_response(std::string_view text) {
  std::string_view s = trim(text);
  auto strip_quotes = [&] {
    bool changed = true;
    while (changed && s.size() >= 2) {
      changed = false;
      for (char q : {'"', '\'', '`'})
        if (s.front() == q && s.back() == q) {
          s = trim(s.substr(1, s.size() - 2));
          changed = true;
        }
    }
  };
  strip_quotes();
  while (!s.empty() && std::string_view(".,!?;:").find(s.back()) != std::string_view::npos) s = trim(s.substr(0, s.size() - 1));
  strip_quotes();
  std::string lowered;
  for (char c : s) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return normalize_transcript(lowered);
}

ParsedResponse parse_response(PromptVariant v, std::string_view raw) {
  ParsedResponse out;
  std::string_view body = raw;
  if (v == PromptVariant::ChainOfReasoning) {
    const auto cue = raw.rfind(kTranscriptCue);
    if (cue == std::string_view::npos) return out;
    body = raw.substr(cue + kTranscriptCue.size());
    // first nonempty line after the cue
    for (std::string_view line : split_lines(body))
      if (!trim(line).empty()) {
        body = line;
        break;
      }
  }
  std::string text = normalize_response(body);
  if (text.empty() || is_refusal(text)) return out;
  out.transcript = std::move(text);
  return out;
}

std::string chat_request_json(const ChatRequest& request) {
  nlohmann::json j;
  j["model"] = request.model;
  j["temperature"] = request.temperature;
  j["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return j.dump();
}

std::string chat_response_content(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat response: ") + e.what());
  }
}

std::string format_reply(PromptVariant v, std::string_view transcript) {
  if (v == PromptVariant::ChainOfReasoning) {
    return "The candidates differ in a few words; the chosen option reads most naturally.\nTRANSCRIPT: " +
           std::string(transcript);
  }
  return std::string(transcript);
}

namespace {

std::string prompt_of(const ChatRequest& request) {
  if (request.messages.empty()) throw PreconditionError("chat request without messages");
  return request.messages.back().content;
}

}  // namespace

std::string IdentityMockClient::complete(const ChatRequest& request) {
  const CandidateSet set = parse_prompt(variant_, prompt_of(request));
  return format_reply(variant_, set.candidates.front());
}

std::string OracleMockClient::complete(const ChatRequest& request) {
  const CandidateSet set = parse_prompt(variant_, prompt_of(request));
  auto it = references_.find(request.tag);
  if (it == references_.end()) return format_reply(variant_, set.candidates.front());
  const auto ref = split_words(it->second);
  std::size_t best = 0, best_d = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const std::size_t d = word_edit_distance(split_words(set.candidates[i]), ref);
    if (d < best_d) best = i, best_d = d;
  }
  return format_reply(variant_, set.candidates[best]);
}

std::string to_string(RescoreStatus s) {
  switch (s) {
    case RescoreStatus::Ok: return "ok";
    case RescoreStatus::Noncompliant: return "noncompliant";
    case RescoreStatus::Failed: return "failed";
  }
  return "?";
}

std::vector<RescoreResult> rescore(std::span<const CandidateSet> sets, ChatClient& client, PromptVariant variant,
                                   const RescorePolicy& policy) {
  for (const auto& s : sets) s.validate();
  std::vector<RescoreResult> results(sets.size());

  auto run_one = [&](std::size_t i) {
    const CandidateSet& set = sets[i];
    RescoreResult& r = results[i];
    r.utterance = set.utterance;
    r.model = policy.model;
    r.temperature = policy.temperature;
    r.fallback = normalize_response(set.candidates.front());
    ChatRequest req;
    req.model = policy.model;
    req.temperature = policy.temperature;
    req.tag = set.utterance;
    req.messages.push_back({policy.system_role ? "system" : "user", build_prompt(variant, set)});
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t attempt = 0; attempt <= policy.max_retries; ++attempt) {
      ++r.attempts;
      try {
        r.raw = client.complete(req);
        r.error.clear();
        break;
      } catch (const TransportError& e) {
        r.error = e.what();
      }
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!r.error.empty()) {
      r.status = RescoreStatus::Failed;
      return;
    }
    ParsedResponse parsed = parse_response(variant, r.raw);
    r.status = parsed.noncompliant() ? RescoreStatus::Noncompliant : RescoreStatus::Ok;
    r.transcript = std::move(parsed.transcript);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(policy.max_in_flight, sets.size()));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = cursor++; i < sets.size(); i = cursor++) run_one(i);
    } catch (...) {
      errors[w] = std::current_exception();
      cursor = sets.size();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

RescoreWer rescore_wer(std::span<const RescoreResult> results, const std::map<std::string, std::string>& references) {
  WerAccumulator all, kept;
  RescoreWer out;
  for (const auto& r : results) {
    auto it = references.find(r.utterance);
    if (it == references.end()) throw PreconditionError("no reference for '" + r.utterance + "'");
    all.add(r.final_transcript(), it->second);
    if (r.status == RescoreStatus::Ok) {
      kept.add(*r.transcript, it->second);
      ++out.scored;
    } else {
      ++out.excluded_count;
    }
  }
  if (results.empty()) throw PreconditionError("no rescoring results");
  out.included = all.rate();
  if (out.scored > 0) out.excluded = kept.rate();
  return out;
}

double top1_wer(std::span<const CandidateSet> sets, const std::map<std::string, std::string>& references) {
  WerAccumulator acc;
  for (const auto& s : sets) {
    s.validate();
    auto it = references.find(s.utterance);
    if (it == references.end()) throw PreconditionError("no reference for '" + s.utterance + "'");
    acc.add(normalize_response(s.candidates.front()), it->second);
  }
  return acc.rate();
}

FinetuneExport export_finetune_dataset(std::span<const CandidateSet> sets,
                                       const std::map<std::string, std::string>& references, PromptVariant variant,
                                       std::size_t finetune_count, std::uint64_t seed) {
  std::vector<const CandidateSet*> order;
  for (const auto& s : sets) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->utterance < b->utterance; });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FinetuneExport out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const CandidateSet& s = *order[i];
    if (i >= finetune_count) {
      out.held_out.push_back(s.utterance);
      continue;
    }
    if (s.candidates.empty()) {
      out.skipped.emplace_back(s.utterance, "empty candidate set");
      continue;
    }
    auto it = references.find(s.utterance);
    if (it == references.end()) {
      out.skipped.emplace_back(s.utterance, "missing reference");
      continue;
    }
    nlohmann::json record;
    record["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", build_prompt(variant, s)}},
                                                {{"role", "assistant"}, {"content", it->second}}});
    out.records.push_back(record.dump());
    out.exported.push_back(s.utterance);
  }
  return out;
}

}  // namespace mona
