#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pce/core_data.hpp"
#include "pce/evaluation.hpp"

namespace pce {

enum class PromptSetup { ZeroShot, Fixations, OneShot };

std::string_view prompt_setup_name(PromptSetup setup);
PromptSetup prompt_setup_from_string(std::string_view s);

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<std::string> attachments;  // image references, never binary data
  PromptSetup setup = PromptSetup::ZeroShot;
};

// Deterministic prompt construction.  `demo`/`demo_stimulus` are required for
// OneShot (a single demonstration from the same participant, embedded in the
// system text) and rejected otherwise.
PromptBundle build_prompt(const PceSample& sample, const Stimulus& stimulus, PromptSetup setup,
                          const PceSample* demo = nullptr,
                          const Stimulus* demo_stimulus = nullptr);

// Case-insensitive leftmost word-boundary match of yes/no/unclear;
// std::nullopt when none occurs (unparseable).
std::optional<PceLabel> parse_verdict(const std::string& raw);

std::uint64_t prompt_hash(const PromptBundle& bundle);

// Abstract chat-completion endpoint.  Implementations must never write
// credentials to logs, transcripts, or errors.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // Returns the raw completion text; throws on transport failure.
  virtual std::string send(const PromptBundle& bundle) = 0;
};

class FunctionCompletionClient final : public CompletionClient {
 public:
  explicit FunctionCompletionClient(std::function<std::string(const PromptBundle&)> fn)
      : fn_(std::move(fn)) {}
  std::string send(const PromptBundle& bundle) override { return fn_(bundle); }

 private:
  std::function<std::string(const PromptBundle&)> fn_;
};

struct HttpClientOptions {
  std::string endpoint;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4";
  std::string auth_env = "PCE_API_TOKEN";  // env var holding the bearer token
  int timeout_s = 30;
  int retries = 2;
};

// JSON chat-completion wire format: request {model, messages[{role, content}]},
// response parsed from choices[0].message.content.
class HttpCompletionClient final : public CompletionClient {
 public:
  explicit HttpCompletionClient(HttpClientOptions options);
  std::string send(const PromptBundle& bundle) override;

 private:
  HttpClientOptions options_;
};

struct SampleTranscript {
  std::string participant_id;
  std::string stimulus_id;
  std::string setup;
  std::uint64_t prompt_hash = 0;
  std::string raw_response;
  std::string verdict;  // yes | no | unclear | unparseable
  std::string status;   // ok | failed
  std::string error;
  std::string gold;
};

struct IncontextOptions {
  PromptSetup setup = PromptSetup::ZeroShot;
  Protocol protocol = Protocol::ThreeClass;
  // Pool for OneShot demonstrations (first other sample of the same
  // participant); defaults to the evaluated split itself.
  const Dataset* demo_pool = nullptr;
  std::string transcript_path;  // JSONL, optional
  int parallelism = 4;
};

struct IncontextResult {
  EvalReport report;
  std::vector<SampleTranscript> transcripts;
  std::size_t n_failed = 0;
};

// One request per sample; unparseable responses score as errors, transport
// failures after retries are excluded from the report and counted separately.
IncontextResult run_incontext_eval(const Dataset& split, CompletionClient& client,
                                   const IncontextOptions& options);

void save_transcripts(const std::vector<SampleTranscript>& transcripts, const std::string& path);
std::vector<SampleTranscript> load_transcripts(const std::string& path);

// Rebuilds the EvalReport from a transcript file; byte-for-byte reruns of the
// original evaluation given unchanged transcripts.
IncontextResult replay_transcripts(const std::string& path, Protocol protocol);

}  // namespace pce
