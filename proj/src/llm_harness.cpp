#include "pce/llm_harness.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pce/prediction.hpp"
#include "pce/rng.hpp"

namespace pce {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kQuestion = "Does the caption mention the central entities in the image?";

std::string fixation_lines(const FixationSequence& seq) {
  std::string out;
  char buf[96];
  for (const Fixation& f : seq.fixations) {
    std::snprintf(buf, sizeof(buf), "%d. %s (%.2f ms)\n", f.index, f.aoi.str().c_str(),
                  f.duration_ms);
    out += buf;
  }
  return out;
}

}  // namespace

std::string_view prompt_setup_name(PromptSetup setup) {
  switch (setup) {
    case PromptSetup::ZeroShot: return "zero";
    case PromptSetup::Fixations: return "fix";
    case PromptSetup::OneShot: return "one";
  }
  throw std::logic_error("prompt_setup_name: bad setup");
}

PromptSetup prompt_setup_from_string(std::string_view s) {
  if (s == "zero") return PromptSetup::ZeroShot;
  if (s == "fix") return PromptSetup::Fixations;
  if (s == "one") return PromptSetup::OneShot;
  throw std::runtime_error("unknown setup '" + std::string(s) + "' (expected zero|fix|one)");
}

PromptBundle build_prompt(const PceSample& sample, const Stimulus& stimulus, PromptSetup setup,
                          const PceSample* demo, const Stimulus* demo_stimulus) {
  if ((setup == PromptSetup::OneShot) != (demo != nullptr))
    throw std::invalid_argument("build_prompt: demonstration required exactly for one-shot");
  if (demo) {
    if (!demo_stimulus) throw std::invalid_argument("build_prompt: demo stimulus missing");
    if (demo->participant_id != sample.participant_id)
      throw std::invalid_argument("build_prompt: demonstration participant '" +
                                  demo->participant_id + "' does not match sample participant '" +
                                  sample.participant_id + "'");
  }

  PromptBundle bundle;
  bundle.setup = setup;

  bundle.system_text =
      "You are shown an image and its caption.\n"
      "Answer the question with exactly one word: yes, no, or unclear.\n";
  if (setup != PromptSetup::ZeroShot)
    bundle.system_text +=
        "The viewer's eye-tracking fixations are listed as numbered entries of the form "
        "`index. aoi (duration ms)`, where vis_* marks an image region, txt_* a caption "
        "word, and off a fixation outside all regions.\n";
  if (setup == PromptSetup::OneShot) {
    bundle.system_text += "\nExample from the same viewer:\n";
    bundle.system_text += "Image: image://" + demo_stimulus->stimulus_id + "\n";
    bundle.system_text += "Caption: " + demo_stimulus->caption + "\n";
    bundle.system_text += "Fixations:\n" + fixation_lines(demo->sequence);
    bundle.system_text += "Question: " + std::string(kQuestion) + "\n";
    bundle.system_text += "Answer: " + std::string(label_name(demo->label)) + "\n";
  }

  bundle.user_text = "Image: image://" + stimulus.stimulus_id + "\n";
  bundle.user_text += "Caption: " + stimulus.caption + "\n";
  if (setup != PromptSetup::ZeroShot)
    bundle.user_text += "Fixations:\n" + fixation_lines(sample.sequence);
  bundle.user_text += "Question: " + std::string(kQuestion) + "\n";
  bundle.user_text += "Answer:";

  bundle.attachments.push_back("image://" + stimulus.stimulus_id);
  if (demo_stimulus) bundle.attachments.push_back("image://" + demo_stimulus->stimulus_id);
  return bundle;
}

std::optional<PceLabel> parse_verdict(const std::string& raw) {
  const auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
  const auto matches = [&](std::size_t at, std::string_view token) {
    if (at + token.size() > raw.size()) return false;
    for (std::size_t k = 0; k < token.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(raw[at + k])) != token[k]) return false;
    if (at > 0 && is_word(static_cast<unsigned char>(raw[at - 1]))) return false;
    if (at + token.size() < raw.size() &&
        is_word(static_cast<unsigned char>(raw[at + token.size()])))
      return false;
    return true;
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (matches(i, "yes")) return PceLabel::Yes;
    if (matches(i, "no")) return PceLabel::No;
    if (matches(i, "unclear")) return PceLabel::Unclear;
  }
  return std::nullopt;
}

std::uint64_t prompt_hash(const PromptBundle& bundle) {
  std::string joined = bundle.system_text;
  joined += '\x1f';
  joined += bundle.user_text;
  for (const std::string& a : bundle.attachments) {
    joined += '\x1f';
    joined += a;
  }
  joined += '\x1f';
  joined += prompt_setup_name(bundle.setup);
  return fnv1a64(joined);
}

HttpCompletionClient::HttpCompletionClient(HttpClientOptions options)
    : options_(std::move(options)) {
  if (options_.endpoint.empty())
    throw std::invalid_argument("HttpCompletionClient: empty endpoint");
}

std::string HttpCompletionClient::send(const PromptBundle& bundle) {
  json request;
  request["model"] = options_.model;
  request["messages"] = json::array();
  request["messages"].push_back({{"role", "system"}, {"content", bundle.system_text}});
  std::string user = bundle.user_text;
  request["messages"].push_back({{"role", "user"}, {"content", user}});
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(options_.timeout_s, 0);
    client.set_read_timeout(options_.timeout_s, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv(options_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
    auto res = client.Post(options_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  throw std::runtime_error("HttpCompletionClient: " + last_error);
}

namespace {

const PceSample* find_demo(const Dataset& pool, const PceSample& sample) {
  for (const PceSample& cand : pool.samples)
    if (cand.participant_id == sample.participant_id && cand.stimulus_id != sample.stimulus_id)
      return &cand;
  return nullptr;
}

}  // namespace

IncontextResult run_incontext_eval(const Dataset& split, CompletionClient& client,
                                   const IncontextOptions& options) {
  if (split.samples.empty()) throw std::invalid_argument("run_incontext_eval: empty split");
  const Dataset& demo_pool = options.demo_pool ? *options.demo_pool : split;
  const std::size_t n = split.samples.size();

  // Build all prompts up front (pure, cheap); demo lookup failures become
  // failed transcripts rather than aborting the run.
  std::vector<std::optional<PromptBundle>> bundles(n);
  std::vector<SampleTranscript> transcripts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PceSample& sample = split.samples[i];
    SampleTranscript& t = transcripts[i];
    t.participant_id = sample.participant_id;
    t.stimulus_id = sample.stimulus_id;
    t.setup = prompt_setup_name(options.setup);
    t.gold = label_name(sample.label);
    try {
      const PceSample* demo = nullptr;
      const Stimulus* demo_st = nullptr;
      if (options.setup == PromptSetup::OneShot) {
        demo = find_demo(demo_pool, sample);
        if (!demo)
          throw std::runtime_error("no demonstration available for participant '" +
                                   sample.participant_id + "'");
        demo_st = &demo_pool.stimulus(demo->stimulus_id);
      }
      bundles[i] =
          build_prompt(sample, split.stimulus(sample.stimulus_id), options.setup, demo, demo_st);
      t.prompt_hash = prompt_hash(*bundles[i]);
    } catch (const std::exception& e) {
      t.status = "failed";
      t.error = e.what();
    }
  }

  // Issue requests with bounded parallelism; responses land indexed by
  // sample, so scheduling never affects the outcome.
  const int workers = std::max(1, std::min<int>(options.parallelism, static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  auto run_worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (!bundles[i]) continue;
      SampleTranscript& t = transcripts[i];
      try {
        t.raw_response = client.send(*bundles[i]);
        t.status = "ok";
        const auto verdict = parse_verdict(t.raw_response);
        t.verdict = verdict ? std::string(label_name(*verdict)) : "unparseable";
      } catch (const std::exception& e) {
        t.status = "failed";
        t.error = e.what();
      }
    }
  };
  if (workers == 1) {
    run_worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_worker);
    for (std::thread& th : pool) th.join();
  }

  IncontextResult result;
  result.transcripts = std::move(transcripts);
  std::vector<Prediction> preds;
  std::vector<PceLabel> golds;
  for (std::size_t i = 0; i < n; ++i) {
    const SampleTranscript& t = result.transcripts[i];
    if (t.status == "failed") {
      result.n_failed++;
      continue;
    }
    golds.push_back(split.samples[i].label);
    if (t.verdict == "unparseable") {
      preds.push_back(Prediction::invalid());
    } else {
      Prediction p;
      p.label = label_from_string(t.verdict);
      p.probs = {0.0, 0.0, 0.0};
      p.probs[static_cast<int>(p.label)] = 1.0;
      preds.push_back(p);
    }
  }
  if (preds.empty()) throw std::runtime_error("run_incontext_eval: every sample failed");
  result.report = evaluate(preds, golds, options.protocol);

  if (!options.transcript_path.empty())
    save_transcripts(result.transcripts, options.transcript_path);
  return result;
}

void save_transcripts(const std::vector<SampleTranscript>& transcripts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const SampleTranscript& t : transcripts) {
    json j;
    j["participant_id"] = t.participant_id;
    j["stimulus_id"] = t.stimulus_id;
    j["setup"] = t.setup;
    j["prompt_hash"] = t.prompt_hash;
    j["raw_response"] = t.raw_response;
    j["verdict"] = t.verdict;
    j["status"] = t.status;
    j["error"] = t.error;
    j["gold"] = t.gold;
    out << j.dump() << '\n';
  }
}

std::vector<SampleTranscript> load_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<SampleTranscript> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    SampleTranscript t;
    t.participant_id = j.at("participant_id").get<std::string>();
    t.stimulus_id = j.at("stimulus_id").get<std::string>();
    t.setup = j.at("setup").get<std::string>();
    t.prompt_hash = j.at("prompt_hash").get<std::uint64_t>();
    t.raw_response = j.at("raw_response").get<std::string>();
    t.verdict = j.at("verdict").get<std::string>();
    t.status = j.at("status").get<std::string>();
    t.error = j.at("error").get<std::string>();
    t.gold = j.at("gold").get<std::string>();
    out.push_back(std::move(t));
  }
  return out;
}

IncontextResult replay_transcripts(const std::string& path, Protocol protocol) {
  IncontextResult result;
  result.transcripts = load_transcripts(path);
  std::vector<Prediction> preds;
  std::vector<PceLabel> golds;
  for (const SampleTranscript& t : result.transcripts) {
    if (t.status == "failed") {
      result.n_failed++;
      continue;
    }
    golds.push_back(label_from_string(t.gold));
    if (t.verdict == "unparseable") {
      preds.push_back(Prediction::invalid());
    } else {
      Prediction p;
      p.label = label_from_string(t.verdict);
      p.probs = {0.0, 0.0, 0.0};
      p.probs[static_cast<int>(p.label)] = 1.0;
      preds.push_back(p);
    }
  }
  if (preds.empty()) throw std::runtime_error("replay_transcripts: no scorable samples");
  result.report = evaluate(preds, golds, protocol);
  return result;
}

}  // namespace pce
