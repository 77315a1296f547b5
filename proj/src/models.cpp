#include "pce/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pce {

namespace {
using json = nlohmann::ordered_json;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Transformer: return "transformer";
    case ModelKind::Pgmt: return "pgmt";
    case ModelKind::Ensemble: return "ensemble";
  }
  throw std::logic_error("model_kind_name: bad kind");
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "lstm") return ModelKind::Lstm;
  if (s == "transformer") return ModelKind::Transformer;
  if (s == "pgmt") return ModelKind::Pgmt;
  if (s == "ensemble") return ModelKind::Ensemble;
  throw std::runtime_error("unknown model '" + std::string(s) +
                           "' (expected lstm|transformer|pgmt|ensemble)");
}

void ModelConfig::validate() const {
  if (n_heads <= 0 || n_layers <= 0 || ff_dim <= 0 || emb_dim <= 0 || model_dim <= 0)
    throw std::invalid_argument("ModelConfig: dims must be positive");
  if (model_dim % n_heads != 0)
    throw std::invalid_argument("ModelConfig: model_dim " + std::to_string(model_dim) +
                                " not divisible by n_heads " + std::to_string(n_heads));
  if (lambda < 0.0) throw std::invalid_argument("ModelConfig: negative lambda");
  if (feature_dim_text <= 0 || feature_dim_image <= 0)
    throw std::invalid_argument("ModelConfig: feature dims must be positive");
  if (bias_layers != "all" && bias_layers != "first")
    throw std::invalid_argument("ModelConfig: bias_layers must be all|first");
  if (!unrestricted) {
    const int ff_grid[] = {32, 64, 128, 256};
    const int emb_grid[] = {8, 16, 32};
    if (std::find(std::begin(ff_grid), std::end(ff_grid), ff_dim) == std::end(ff_grid))
      throw std::invalid_argument("ModelConfig: ff_dim " + std::to_string(ff_dim) +
                                  " not in {32,64,128,256}; set unrestricted to override");
    if (std::find(std::begin(emb_grid), std::end(emb_grid), emb_dim) == std::end(emb_grid))
      throw std::invalid_argument("ModelConfig: emb_dim " + std::to_string(emb_dim) +
                                  " not in {8,16,32}; set unrestricted to override");
  }
}

std::string ModelConfig::to_json() const {
  json j;
  j["n_heads"] = n_heads;
  j["n_layers"] = n_layers;
  j["ff_dim"] = ff_dim;
  j["emb_dim"] = emb_dim;
  j["model_dim"] = model_dim;
  j["lambda"] = lambda;
  j["feature_dim_text"] = feature_dim_text;
  j["feature_dim_image"] = feature_dim_image;
  j["participant_embedding"] = participant_embedding;
  j["positional_encoding"] = positional_encoding;
  j["bias_layers"] = bias_layers;
  j["unrestricted"] = unrestricted;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  if (j.contains("n_heads")) cfg.n_heads = j["n_heads"].get<int>();
  if (j.contains("n_layers")) cfg.n_layers = j["n_layers"].get<int>();
  if (j.contains("ff_dim")) cfg.ff_dim = j["ff_dim"].get<int>();
  if (j.contains("emb_dim")) cfg.emb_dim = j["emb_dim"].get<int>();
  if (j.contains("model_dim")) cfg.model_dim = j["model_dim"].get<int>();
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
  if (j.contains("feature_dim_text")) cfg.feature_dim_text = j["feature_dim_text"].get<int>();
  if (j.contains("feature_dim_image")) cfg.feature_dim_image = j["feature_dim_image"].get<int>();
  if (j.contains("participant_embedding"))
    cfg.participant_embedding = j["participant_embedding"].get<bool>();
  if (j.contains("positional_encoding"))
    cfg.positional_encoding = j["positional_encoding"].get<bool>();
  if (j.contains("bias_layers")) cfg.bias_layers = j["bias_layers"].get<std::string>();
  if (j.contains("unrestricted")) cfg.unrestricted = j["unrestricted"].get<bool>();
  cfg.validate();
  return cfg;
}

std::vector<Eigen::VectorXd> StoreFeatureProvider::caption_features(const Stimulus& st) const {
  std::vector<Eigen::VectorXd> out;
  for (const CaptionToken& tok : caption_tokens(st)) {
    if (!store_->contains(tok.symbol))
      throw std::runtime_error("StoreFeatureProvider: missing features for '" + tok.symbol + "'");
    out.push_back(store_->get(tok.symbol));
  }
  return out;
}

std::vector<Eigen::VectorXd> StoreFeatureProvider::region_features(const Stimulus& st) const {
  std::vector<Eigen::VectorXd> out;
  for (const Region& r : st.regions) {
    if (!store_->contains(r.aoi.str()))
      throw std::runtime_error("StoreFeatureProvider: missing features for '" + r.aoi.str() +
                               "'");
    out.push_back(store_->get(r.aoi.str()));
  }
  return out;
}

TokenLayout token_layout(const Stimulus& st) {
  TokenLayout layout;
  layout.tokens = caption_tokens(st);
  layout.aoi_map.push_back(std::nullopt);  // classification token
  for (const CaptionToken& tok : layout.tokens)
    layout.aoi_map.push_back(tok.annotated ? std::optional<AoiId>(AoiId(tok.symbol))
                                           : std::nullopt);
  for (const Region& r : st.regions) {
    layout.region_aois.push_back(r.aoi);
    layout.aoi_map.push_back(r.aoi);
  }
  return layout;
}

StimulusEncoding encode_stimulus(const Stimulus& st, const FeatureProvider& provider) {
  StimulusEncoding enc;
  enc.layout = token_layout(st);
  const auto text = provider.caption_features(st);
  const auto image = provider.region_features(st);
  if (text.size() != enc.layout.tokens.size())
    throw std::runtime_error("encode_stimulus: provider returned " + std::to_string(text.size()) +
                             " caption vectors for " + std::to_string(enc.layout.tokens.size()) +
                             " tokens");
  if (image.size() != st.regions.size())
    throw std::runtime_error("encode_stimulus: provider returned " + std::to_string(image.size()) +
                             " region vectors for " + std::to_string(st.regions.size()) +
                             " regions");
  enc.text_features.resize(static_cast<Eigen::Index>(text.size()),
                           text.empty() ? 0 : text[0].size());
  for (std::size_t i = 0; i < text.size(); ++i)
    enc.text_features.row(static_cast<Eigen::Index>(i)) = text[i].transpose();
  enc.image_features.resize(static_cast<Eigen::Index>(image.size()),
                            image.empty() ? 0 : image[0].size());
  for (std::size_t i = 0; i < image.size(); ++i)
    enc.image_features.row(static_cast<Eigen::Index>(i)) = image[i].transpose();
  return enc;
}

TokenAoiMap restrict_map(const TokenAoiMap& map, const std::vector<AoiId>& order) {
  TokenAoiMap out = map;
  for (auto& entry : out) {
    if (!entry) continue;
    if (std::find(order.begin(), order.end(), *entry) == order.end()) entry = std::nullopt;
  }
  return out;
}

nn::Mat pgmt_bias(const FixationSequence& seq, const TokenLayout& layout, double lambda) {
  const AmplifiedMatrix amplified = amplify(transition_matrix(seq), lambda);
  return token_bias(amplified, restrict_map(layout.aoi_map, amplified.aoi_order));
}

Prediction prediction_from_logits(const nn::Mat& logits_row) {
  if (logits_row.rows() != 1 || logits_row.cols() != kNumClasses)
    throw std::invalid_argument("prediction_from_logits: expected 1x3 logits");
  const double m = logits_row.maxCoeff();
  std::array<double, kNumClasses> p{};
  double total = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(logits_row(0, c) - m);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return Prediction::from_probs(p);
}

Prediction ensemble_forward(const Prediction& a, const Prediction& b) {
  std::array<double, kNumClasses> p{};
  for (int c = 0; c < kNumClasses; ++c) p[c] = 0.5 * (a.probs[c] + b.probs[c]);
  return Prediction::from_probs(p);
}

// --- PceModel ------------------------------------------------------------------

PceModel::PceModel(ModelKind kind, const ModelConfig& cfg, const Vocab& aoi_vocab,
                   const Vocab& participant_vocab, std::shared_ptr<const FeatureProvider> provider,
                   std::uint64_t seed)
    : kind_(kind),
      cfg_(cfg),
      aoi_vocab_(aoi_vocab),
      participant_vocab_(participant_vocab),
      provider_(std::move(provider)) {
  cfg_.validate();
  if (kind_ == ModelKind::Ensemble)
    throw std::invalid_argument("PceModel: ensemble is a prediction-level combination; "
                                "train its components separately");
  if (kind_ == ModelKind::Lstm) {
    if (aoi_vocab_.size() == 0) throw std::invalid_argument("PceModel: empty AOI vocabulary");
    Rng rng = Rng::stream(seed, "init-lstm");
    lstm_.emplace();
    lstm_->aoi_table = nn::uniform_init(aoi_vocab_.size(), cfg_.emb_dim, cfg_.emb_dim, rng);
    int combine_in = cfg_.emb_dim;
    if (cfg_.participant_embedding) {
      lstm_->part_table =
          nn::uniform_init(participant_vocab_.size(), cfg_.emb_dim, cfg_.emb_dim, rng);
      combine_in += cfg_.emb_dim;
    }
    lstm_->combine.init(combine_in, cfg_.model_dim, rng);
    lstm_->cell.init(cfg_.model_dim, cfg_.model_dim, rng);
    lstm_->head.init(cfg_.model_dim, kNumClasses, rng);
  } else {
    if (!provider_) throw std::invalid_argument("PceModel: transformer kinds need a provider");
    Rng rng = Rng::stream(seed, "init-transformer");
    transformer_.emplace();
    transformer_->cls = nn::uniform_init(1, cfg_.model_dim, cfg_.model_dim, rng);
    transformer_->text_proj.init(cfg_.feature_dim_text, cfg_.model_dim, rng);
    transformer_->image_proj.init(cfg_.feature_dim_image, cfg_.model_dim, rng);
    transformer_->layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (auto& layer : transformer_->layers)
      layer.init(cfg_.model_dim, cfg_.n_heads, cfg_.ff_dim, rng);
    int head_in = cfg_.model_dim;
    if (cfg_.participant_embedding) {
      transformer_->part_table =
          nn::uniform_init(participant_vocab_.size(), cfg_.emb_dim, cfg_.emb_dim, rng);
      head_in += cfg_.emb_dim;
    }
    transformer_->head.init(head_in, kNumClasses, rng);
  }
}

const StimulusEncoding& PceModel::encoding_for(const Stimulus& st) {
  auto it = encoding_cache_.find(st.stimulus_id);
  if (it == encoding_cache_.end())
    it = encoding_cache_.emplace(st.stimulus_id, encode_stimulus(st, *provider_)).first;
  return it->second;
}

const nn::Mat& PceModel::bias_for(const PceSample& sample, const Stimulus& st) {
  const auto key = std::make_pair(sample.participant_id, sample.stimulus_id);
  auto it = bias_cache_.find(key);
  if (it == bias_cache_.end()) {
    const StimulusEncoding& enc = encoding_for(st);
    it = bias_cache_.emplace(key, pgmt_bias(sample.sequence, enc.layout, cfg_.lambda)).first;
  }
  return it->second;
}

nn::Tensor PceModel::forward_logits(const PceSample& sample, const Dataset& ds,
                                    AttentionTrace* trace) {
  const int participant = participant_vocab_.index_of(sample.participant_id);
  if (kind_ == ModelKind::Lstm) {
    const std::vector<int> indices = encode_sequence(sample.sequence, aoi_vocab_);
    nn::Tensor steps = nn::embedding_lookup(lstm_->aoi_table, indices);
    if (cfg_.participant_embedding) {
      const std::vector<int> pidx(indices.size(), participant);
      nn::Tensor part = nn::embedding_lookup(lstm_->part_table, pidx);
      steps = nn::concat({steps, part}, 1);
    }
    steps = lstm_->combine.apply(steps);
    nn::LstmState state;
    state.h = nn::Tensor::zeros(1, cfg_.model_dim);
    state.c = nn::Tensor::zeros(1, cfg_.model_dim);
    for (Eigen::Index t = 0; t < steps.rows(); ++t)
      state = nn::lstm_cell(nn::slice_rows(steps, t, 1), state, lstm_->cell);
    return lstm_->head.apply(state.h);
  }

  const Stimulus& st = ds.stimulus(sample.stimulus_id);
  const StimulusEncoding& enc = encoding_for(st);
  std::vector<nn::Tensor> parts{transformer_->cls};
  if (enc.text_features.rows() > 0)
    parts.push_back(transformer_->text_proj.apply(nn::Tensor::from(enc.text_features)));
  if (enc.image_features.rows() > 0)
    parts.push_back(transformer_->image_proj.apply(nn::Tensor::from(enc.image_features)));
  nn::Tensor tokens = nn::concat(parts, 0);
  if (cfg_.positional_encoding)
    tokens = nn::add(tokens, nn::Tensor::from(nn::positional_encoding(tokens.rows(),
                                                                      cfg_.model_dim)));

  const Eigen::Index seq = tokens.rows();
  nn::Mat zero_bias = nn::Mat::Zero(seq, seq);
  nn::Tensor active_bias = nn::Tensor::from(
      kind_ == ModelKind::Pgmt ? bias_for(sample, st) : zero_bias);
  nn::Tensor zero_bias_t = kind_ == ModelKind::Pgmt && cfg_.bias_layers == "first"
                               ? nn::Tensor::from(std::move(zero_bias))
                               : active_bias;
  for (std::size_t l = 0; l < transformer_->layers.size(); ++l) {
    std::vector<nn::Mat>* layer_trace = nullptr;
    if (trace) {
      trace->layers.emplace_back();
      layer_trace = &trace->layers.back();
    }
    const nn::Tensor& bias = (l == 0) ? active_bias : zero_bias_t;
    tokens = transformer_->layers[l].apply(tokens, bias, layer_trace);
  }

  nn::Tensor cls_out = nn::slice_rows(tokens, 0, 1);
  if (cfg_.participant_embedding) {
    nn::Tensor part = nn::embedding_lookup(transformer_->part_table, {participant});
    cls_out = nn::concat({cls_out, part}, 1);
  }
  return transformer_->head.apply(cls_out);
}

nn::Tensor PceModel::sample_loss(const PceSample& sample, const Dataset& ds) {
  nn::Tensor logits = forward_logits(sample, ds, nullptr);
  return nn::cross_entropy(logits, static_cast<int>(sample.label), true);
}

Prediction PceModel::predict(const PceSample& sample, const Dataset& ds, AttentionTrace* trace) {
  nn::AutogradPause pause;
  nn::Tensor logits = forward_logits(sample, ds, trace);
  return prediction_from_logits(logits.value());
}

nn::NamedParams PceModel::named_parameters() const {
  nn::NamedParams out;
  if (lstm_) {
    out.emplace_back("aoi_table", lstm_->aoi_table);
    if (cfg_.participant_embedding) out.emplace_back("part_table", lstm_->part_table);
    lstm_->combine.collect("combine", out);
    lstm_->cell.collect("cell", out);
    lstm_->head.collect("head", out);
  } else {
    out.emplace_back("cls", transformer_->cls);
    transformer_->text_proj.collect("text_proj", out);
    transformer_->image_proj.collect("image_proj", out);
    for (std::size_t l = 0; l < transformer_->layers.size(); ++l)
      transformer_->layers[l].collect("enc" + std::to_string(l), out);
    if (cfg_.participant_embedding) out.emplace_back("part_table", transformer_->part_table);
    transformer_->head.collect("head", out);
  }
  return out;
}

std::vector<nn::Tensor> PceModel::parameters() const {
  std::vector<nn::Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t PceModel::n_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += static_cast<std::size_t>(t.size());
  return n;
}

std::vector<nn::Mat> PceModel::snapshot() const {
  std::vector<nn::Mat> snap;
  for (const auto& [name, t] : named_parameters()) snap.push_back(t.value());
  return snap;
}

void PceModel::restore(const std::vector<nn::Mat>& snap) {
  auto params = named_parameters();
  if (snap.size() != params.size())
    throw std::invalid_argument("PceModel::restore: snapshot size mismatch");
  for (std::size_t i = 0; i < snap.size(); ++i) params[i].second.value_mut() = snap[i];
}

void PceModel::save(const std::string& prefix, std::uint64_t seed) const {
  json cfg = json::parse(cfg_.to_json());
  json manifest;
  manifest["model"] = std::string(model_kind_name(kind_));
  manifest["model_config"] = cfg;
  manifest["aoi_vocab"] = aoi_vocab_.symbols();
  manifest["participant_vocab"] = participant_vocab_.symbols();
  nn::save_checkpoint(prefix, named_parameters(), seed, manifest.dump());
}

PceModel PceModel::load(const std::string& prefix, const Vocab& aoi_vocab,
                        const Vocab& participant_vocab,
                        std::shared_ptr<const FeatureProvider> provider) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(prefix);
  json manifest = json::parse(ckpt.config_json);
  const ModelKind kind = model_kind_from_string(manifest.at("model").get<std::string>());
  const ModelConfig cfg = ModelConfig::from_json(manifest.at("model_config").dump());

  // The manifest vocabularies pin embedding-row order; a caller-supplied
  // vocabulary is only a fallback for manifests without one.
  Vocab aoi = aoi_vocab, part = participant_vocab;
  if (manifest.contains("aoi_vocab") && !manifest["aoi_vocab"].empty()) {
    aoi = Vocab{};
    part = Vocab{};
    for (const auto& s : manifest["aoi_vocab"]) aoi.add(s.get<std::string>());
    for (const auto& s : manifest["participant_vocab"]) part.add(s.get<std::string>());
  }

  PceModel model(kind, cfg, aoi, part, std::move(provider), ckpt.seed);
  for (auto& [name, t] : model.named_parameters()) {
    const nn::Mat& stored = ckpt.param(name);
    if (stored.rows() != t.rows() || stored.cols() != t.cols())
      throw std::runtime_error("PceModel::load: shape mismatch for '" + name + "'");
    t.value_mut() = stored;
  }
  return model;
}

}  // namespace pce
