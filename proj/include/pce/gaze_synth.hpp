#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pce/core_data.hpp"
#include "pce/feature_store.hpp"

namespace pce {

struct GeneratorConfig {
  int n_participants = 109;
  int n_stimuli = 153;
  int n_samples = 5400;
  double mean_fixations = 27.42;
  std::array<double, 3> class_probs{0.674, 0.201, 0.125};
  double signal_strength = 1.0;
  int feature_dim_text = 768;
  int feature_dim_image = 2048;
  std::uint64_t seed = 7;

  void validate() const;
  std::string to_json() const;
  static GeneratorConfig from_json(const std::string& text);
};

struct ParticipantProfile {
  std::string participant_id;
  std::array<double, 3> label_bias{};  // per-class logit offsets
  double crossmodal_rate = 0.3;        // propensity for vis<->txt transitions
  double off_rate = 0.2;
};

// Deterministic participant roster for a config (ids + per-participant biases).
std::vector<ParticipantProfile> participant_profiles(const GeneratorConfig& cfg);

// Synthesizes a dataset with planted participant-specific signal.  With
// signal_strength 1 the label of a sample is recoverable from its fixation
// transitions and from the stimulus/caption match structure; with 0 labels
// are independent noise at the configured marginals.
Dataset generate(const GeneratorConfig& cfg);

// Frozen feature vectors for every vis region, annotated caption token, and
// unannotated caption word in `ds`: a seeded hash-noise vector plus, scaled by
// signal_strength, a shared per-label semantic component that makes matching
// region/span pairs close in cosine.  All vectors unit-norm.
FeatureStore generate_features(const GeneratorConfig& cfg, const Dataset& ds, std::uint64_t seed);

// Caption tokenization shared by the feature generator and the models:
// whitespace-split; every token carries either its covering span's AOI symbol
// or a plain word symbol ("word_<token>").
struct CaptionToken {
  std::string symbol;
  std::size_t start = 0;
  std::size_t end = 0;
  bool annotated = false;
};

std::vector<CaptionToken> caption_tokens(const Stimulus& st);

}  // namespace pce
