#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mona/decoding.hpp"

namespace mona {

enum class CandidateSource { TopBeams, Ensemble };

/// Candidate transcripts for one utterance, most likely first.
struct CandidateSet {
  std::string utterance;
  std::vector<std::string> candidates;
  CandidateSource source = CandidateSource::TopBeams;
  std::optional<std::vector<double>> nll;  // one per candidate

  void validate() const;
};

/// Top `k` beams of an n-best list; NLL is the negated combined score.
CandidateSet candidates_from_nbest(const NBestList& list, std::size_t k);

enum class EnsembleOrder { RoundRobin, Concatenate };

/// Pools per-model n-best lists. `per_model` = 1 takes each model's first
/// transcript in model order; larger values interleave by rank (or append
/// model by model). Duplicates are kept.
CandidateSet ensemble_candidates(std::span<const NBestList> per_model, std::size_t per_model_count,
                                 EnsembleOrder order = EnsembleOrder::RoundRobin);

enum class PromptVariant { Direct, Ensemble, ChainOfReasoning, NllAnnotated };
std::string to_string(PromptVariant v);
PromptVariant prompt_variant_from_string(std::string_view s);

/// Fixed instruction text of a variant.
const std::string& prompt_instruction(PromptVariant v);

/// Instruction, then one candidate per line in order; the NLL variant adds
/// "<TAB><nll>" to each line. No trailing newline.
std::string build_prompt(PromptVariant v, const CandidateSet& set);
/// Inverse of build_prompt: the candidate lines (and NLLs) of a prompt.
CandidateSet parse_prompt(PromptVariant v, std::string_view prompt);

inline constexpr std::string_view kTranscriptCue = "TRANSCRIPT:";

struct ParsedResponse {
  std::optional<std::string> transcript;  // normalized
  bool noncompliant() const { return !transcript.has_value(); }
};

/// Lowercases, trims, drops wrapping quotes and terminal punctuation,
/// collapses whitespace.
std::string normalize_response(std::string_view text);
ParsedResponse parse_response(PromptVariant v, std::string_view raw);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
  std::string tag;  // caller-side label (utterance id), never transmitted
};

/// Chat-completion endpoint. Implementations throw TransportError.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// JSON body of a chat-completion request.
std::string chat_request_json(const ChatRequest& request);
/// First choice's message content from a chat-completion response body.
std::string chat_response_content(std::string_view body);

struct HttpClientConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{60};
};

/// HTTPS client for a live endpoint; the key is read from the environment.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config = {});
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "live"; }

 private:
  HttpClientConfig config_;
  std::string api_key_;
};

/// Answers with the first candidate of the prompt.
class IdentityMockClient : public ChatClient {
 public:
  explicit IdentityMockClient(PromptVariant variant) : variant_(variant) {}
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "identity"; }

 private:
  PromptVariant variant_;
};

/// Knows the references (by request tag) and answers with the candidate of
/// lowest WER, earliest on ties.
class OracleMockClient : public ChatClient {
 public:
  OracleMockClient(PromptVariant variant, std::map<std::string, std::string> references)
      : variant_(variant), references_(std::move(references)) {}
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "oracle"; }

 private:
  PromptVariant variant_;
  std::map<std::string, std::string> references_;
};

class ScriptedMockClient : public ChatClient {
 public:
  using Script = std::function<std::string(const ChatRequest&)>;
  explicit ScriptedMockClient(Script script) : script_(std::move(script)) {}
  std::string complete(const ChatRequest& request) override { return script_(request); }
  std::string name() const override { return "scripted"; }

 private:
  Script script_;
};

/// Reply wrapped the way the variant expects (reasoning + cue for CoR).
std::string format_reply(PromptVariant v, std::string_view transcript);

struct RescorePolicy {
  std::string model = "gpt-3.5-turbo-16k-0613";
  double temperature = 0.0;
  std::size_t max_retries = 2;
  std::size_t max_in_flight = 4;
  /// Put the prompt in a system message instead of the user message.
  bool system_role = false;
};

enum class RescoreStatus { Ok, Noncompliant, Failed };
std::string to_string(RescoreStatus s);

struct RescoreResult {
  std::string utterance;
  RescoreStatus status = RescoreStatus::Ok;
  std::optional<std::string> transcript;  // set iff status == Ok
  std::string fallback;                   // top-1 candidate, normalized
  std::string raw;
  std::string error;
  std::string model;
  double temperature = 0.0;
  std::size_t attempts = 0;
  double latency_ms = 0.0;

  /// Transcript used for the included-WER figure.
  const std::string& final_transcript() const { return transcript ? *transcript : fallback; }
};

/// One request per set; results come back in input order.
std::vector<RescoreResult> rescore(std::span<const CandidateSet> sets, ChatClient& client, PromptVariant variant,
                                   const RescorePolicy& policy = {});

struct RescoreWer {
  double included = 0.0;  // noncompliant/failed fall back to top-1
  std::optional<double> excluded;  // only utterances with a transcript
  std::size_t scored = 0;
  std::size_t excluded_count = 0;
};

RescoreWer rescore_wer(std::span<const RescoreResult> results, const std::map<std::string, std::string>& references);

/// Pooled WER of each set's first candidate.
double top1_wer(std::span<const CandidateSet> sets, const std::map<std::string, std::string>& references);

struct FinetuneExport {
  std::vector<std::string> records;     // one JSON object per line
  std::vector<std::string> exported;    // utterance ids with a record
  std::vector<std::string> held_out;    // second half of the split
  std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};

/// Seeded split of the sets: the first `finetune_count` (after a shuffle of
/// the id-sorted sets) become chat records, the rest are held out.
FinetuneExport export_finetune_dataset(std::span<const CandidateSet> sets,
                                       const std::map<std::string, std::string>& references, PromptVariant variant,
                                       std::size_t finetune_count, std::uint64_t seed);

}  // namespace mona
