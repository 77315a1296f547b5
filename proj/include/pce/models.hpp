#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pce/core_data.hpp"
#include "pce/encoding.hpp"
#include "pce/feature_store.hpp"
#include "pce/gaze_synth.hpp"
#include "pce/nn/checkpoint.hpp"
#include "pce/nn/layers.hpp"
#include "pce/prediction.hpp"

namespace pce {

enum class ModelKind { Lstm, Transformer, Pgmt, Ensemble };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_string(std::string_view s);

struct ModelConfig {
  int n_heads = 6;
  int n_layers = 6;
  int ff_dim = 256;    // grid {32, 64, 128, 256}
  int emb_dim = 32;    // grid {8, 16, 32}
  int model_dim = 48;  // must divide by n_heads
  double lambda = 500.0;
  int feature_dim_text = 768;
  int feature_dim_image = 2048;
  bool participant_embedding = true;
  bool positional_encoding = false;
  std::string bias_layers = "all";  // all | first
  bool unrestricted = false;        // lift the ff/emb grid restriction

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

// Frozen feature extractors.  Vectors are deterministic per (stimulus,
// provider); no gradients ever flow into a provider.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  // One vector per caption token (caption_tokens order), text dim.
  virtual std::vector<Eigen::VectorXd> caption_features(const Stimulus& st) const = 0;
  // One vector per region (stimulus order), image dim.
  virtual std::vector<Eigen::VectorXd> region_features(const Stimulus& st) const = 0;
};

class StoreFeatureProvider final : public FeatureProvider {
 public:
  explicit StoreFeatureProvider(std::shared_ptr<const FeatureStore> store)
      : store_(std::move(store)) {}
  std::vector<Eigen::VectorXd> caption_features(const Stimulus& st) const override;
  std::vector<Eigen::VectorXd> region_features(const Stimulus& st) const override;

 private:
  std::shared_ptr<const FeatureStore> store_;
};

// Transformer input layout for one stimulus: [CLS] ++ caption tokens ++
// region tokens, with the AOI carried by each position (none for CLS and
// unannotated words).
struct TokenLayout {
  std::vector<CaptionToken> tokens;
  std::vector<AoiId> region_aois;
  TokenAoiMap aoi_map;  // length = 1 + tokens + regions
  Eigen::Index seq_len() const { return static_cast<Eigen::Index>(aoi_map.size()); }
};

TokenLayout token_layout(const Stimulus& st);

// Cached per-stimulus model inputs.
struct StimulusEncoding {
  TokenLayout layout;
  nn::Mat text_features;   // tokens x text_dim
  nn::Mat image_features;  // regions x image_dim
};

StimulusEncoding encode_stimulus(const Stimulus& st, const FeatureProvider& provider);

// Drops map entries whose AOI is absent from `order` (AOIs the participant
// never fixated contribute zero bias).
TokenAoiMap restrict_map(const TokenAoiMap& map, const std::vector<AoiId>& order);

// Token-level attention bias for PGMT: amplified transition matrix of the
// sequence projected onto the stimulus token layout.
nn::Mat pgmt_bias(const FixationSequence& seq, const TokenLayout& layout, double lambda);

// --- Model internals ----------------------------------------------------------

struct PerceptionLstmParams {
  nn::Tensor aoi_table;   // aoi_vocab x emb
  nn::Tensor part_table;  // participant_vocab x emb (participant_embedding only)
  nn::Linear combine;     // emb (+ emb) -> model_dim
  nn::LstmCellParams cell;
  nn::Linear head;  // model_dim -> 3
};

struct TransformerParams {
  nn::Tensor cls;         // 1 x model_dim
  nn::Linear text_proj;   // text_dim -> model_dim
  nn::Linear image_proj;  // image_dim -> model_dim
  std::vector<nn::EncoderLayer> layers;
  nn::Tensor part_table;  // participant_vocab x emb (participant_embedding only)
  nn::Linear head;        // model_dim (+ emb) -> 3
};

// Per-layer, per-head post-softmax attention matrices of one forward pass.
struct AttentionTrace {
  std::vector<std::vector<nn::Mat>> layers;
};

// One trainable classifier (LSTM, Content Transformer, or PGMT — the latter
// two share parameters and differ only in the attention bias).  Ensembling is
// a pure function over two predictions; see ensemble_forward.
class PceModel {
 public:
  PceModel(ModelKind kind, const ModelConfig& cfg, const Vocab& aoi_vocab,
           const Vocab& participant_vocab, std::shared_ptr<const FeatureProvider> provider,
           std::uint64_t seed);

  // Cross-entropy loss graph for one sample (training path).
  nn::Tensor sample_loss(const PceSample& sample, const Dataset& ds);
  // Inference (no graph); `trace` captures attention for transformer kinds.
  Prediction predict(const PceSample& sample, const Dataset& ds,
                     AttentionTrace* trace = nullptr);

  std::vector<nn::Tensor> parameters() const;
  nn::NamedParams named_parameters() const;
  std::size_t n_parameters() const;

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocab& aoi_vocab() const { return aoi_vocab_; }
  const Vocab& participant_vocab() const { return participant_vocab_; }

  // Parameter snapshot/restore (best-epoch checkpointing).
  std::vector<nn::Mat> snapshot() const;
  void restore(const std::vector<nn::Mat>& snap);

  void save(const std::string& prefix, std::uint64_t seed) const;
  static PceModel load(const std::string& prefix, const Vocab& aoi_vocab,
                       const Vocab& participant_vocab,
                       std::shared_ptr<const FeatureProvider> provider);

 private:
  nn::Tensor forward_logits(const PceSample& sample, const Dataset& ds, AttentionTrace* trace);
  const StimulusEncoding& encoding_for(const Stimulus& st);
  const nn::Mat& bias_for(const PceSample& sample, const Stimulus& st);

  ModelKind kind_;
  ModelConfig cfg_;
  Vocab aoi_vocab_;
  Vocab participant_vocab_;
  std::shared_ptr<const FeatureProvider> provider_;
  std::optional<PerceptionLstmParams> lstm_;
  std::optional<TransformerParams> transformer_;
  std::map<std::string, StimulusEncoding> encoding_cache_;
  std::map<std::pair<std::string, std::string>, nn::Mat> bias_cache_;
};

// probs = elementwise mean of the two inputs; argmax tie-break lowest code.
Prediction ensemble_forward(const Prediction& a, const Prediction& b);

Prediction prediction_from_logits(const nn::Mat& logits_row);

}  // namespace pce
