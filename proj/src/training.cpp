#include "pce/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pce/nn/adamw.hpp"
#include "pce/rng.hpp"

namespace pce {

namespace {
using json = nlohmann::ordered_json;
}

void TrainConfig::validate() const {
  model.validate();
  if (max_epochs <= 0) throw std::invalid_argument("TrainConfig: max_epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be non-negative");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: negative weight_decay");
  if (!unrestricted) {
    const double lr_grid[] = {1e-4, 5e-4, 1e-5, 5e-5};
    const int batch_grid[] = {16, 64, 128};
    if (std::find(std::begin(lr_grid), std::end(lr_grid), lr) == std::end(lr_grid))
      throw std::invalid_argument("TrainConfig: lr not in {1e-4,5e-4,1e-5,5e-5}; "
                                  "set unrestricted to override");
    if (std::find(std::begin(batch_grid), std::end(batch_grid), batch_size) ==
        std::end(batch_grid))
      throw std::invalid_argument("TrainConfig: batch_size not in {16,64,128}; "
                                  "set unrestricted to override");
  }
}

std::string TrainConfig::to_json() const {
  json j;
  j["model"] = std::string(model_kind_name(kind));
  j["model_config"] = json::parse(model.to_json());
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["weight_decay"] = weight_decay;
  j["seed"] = seed;
  j["unrestricted"] = unrestricted;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig cfg;
  if (j.contains("model")) cfg.kind = model_kind_from_string(j["model"].get<std::string>());
  if (j.contains("model_config")) cfg.model = ModelConfig::from_json(j["model_config"].dump());
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"].get<int>();
  if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("unrestricted")) cfg.unrestricted = j["unrestricted"].get<bool>();
  cfg.validate();
  return cfg;
}

std::vector<Prediction> predict_all(PceModel& model, const Dataset& split) {
  std::vector<Prediction> preds;
  preds.reserve(split.samples.size());
  for (const PceSample& s : split.samples) preds.push_back(model.predict(s, split));
  return preds;
}

std::vector<PceLabel> gold_labels(const Dataset& split) {
  std::vector<PceLabel> golds;
  golds.reserve(split.samples.size());
  for (const PceSample& s : split.samples) golds.push_back(s.label);
  return golds;
}

TrainResult train(const Dataset& train_split, const Dataset& val_split,
                  std::shared_ptr<const FeatureProvider> provider, const TrainConfig& cfg) {
  cfg.validate();
  if (train_split.samples.empty()) throw std::invalid_argument("train: empty training split");
  if (val_split.samples.empty()) throw std::invalid_argument("train: empty validation split");
  if (cfg.kind == ModelKind::Ensemble)
    throw std::invalid_argument("train: use train_ensemble for the ensemble");

  PceModel model(cfg.kind, cfg.model, train_split.aoi_vocab, train_split.participant_vocab,
                 std::move(provider), cfg.seed);
  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  nn::AdamW optimizer(model.parameters(), opt_cfg);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    if (!log) throw std::runtime_error("cannot write '" + cfg.log_path + "'");
  }

  const std::vector<PceLabel> val_golds = gold_labels(val_split);
  TrainReport report;
  std::vector<nn::Mat> best_snapshot = model.snapshot();
  const std::size_t n = train_split.samples.size();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t at = 0;
    int batch_index = 0;
    while (at < n) {
      const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n - at);
      optimizer.zero_grad();
      for (std::size_t k = 0; k < batch; ++k) {
        const PceSample& sample = train_split.samples[order[at + k]];
        nn::Tensor loss = model.sample_loss(sample, train_split);
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index));
        loss_sum += value;
        nn::scale(loss, 1.0 / static_cast<double>(batch)).backward();
      }
      optimizer.step();
      at += batch;
      ++batch_index;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    const EvalReport val =
        evaluate(predict_all(model, val_split), val_golds, Protocol::ThreeClass);
    stats.val_accuracy = val.accuracy;
    stats.val_macro_f1 = val.macro_f1;
    report.epochs.push_back(stats);

    if (report.best_epoch == 0 || stats.val_macro_f1 >= report.best_val_macro_f1) {
      report.best_epoch = epoch;
      report.best_val_macro_f1 = stats.val_macro_f1;
      report.best_val_accuracy = stats.val_accuracy;
      best_snapshot = model.snapshot();
    }

    if (log) {
      json event;
      event["event"] = "epoch";
      event["epoch"] = epoch;
      event["train_loss"] = stats.train_loss;
      event["val_accuracy"] = stats.val_accuracy;
      event["val_macro_f1"] = stats.val_macro_f1;
      log << event.dump() << '\n';
    }
  }

  model.restore(best_snapshot);
  if (log) {
    json event;
    event["event"] = "done";
    event["best_epoch"] = report.best_epoch;
    event["best_val_macro_f1"] = report.best_val_macro_f1;
    log << event.dump() << '\n';
  }
  return TrainResult{std::move(report), std::move(model)};
}

EnsembleResult train_ensemble(const Dataset& train_split, const Dataset& val_split,
                              std::shared_ptr<const FeatureProvider> provider,
                              TrainConfig cfg_lstm, TrainConfig cfg_transformer) {
  cfg_lstm.kind = ModelKind::Lstm;
  if (cfg_transformer.kind == ModelKind::Ensemble || cfg_transformer.kind == ModelKind::Lstm)
    cfg_transformer.kind = ModelKind::Transformer;

  EnsembleResult result{train(train_split, val_split, provider, cfg_lstm),
                        train(train_split, val_split, provider, cfg_transformer)};

  const auto lstm_preds = predict_all(result.lstm.model, val_split);
  const auto tf_preds = predict_all(result.transformer.model, val_split);
  std::vector<Prediction> combined;
  combined.reserve(lstm_preds.size());
  for (std::size_t i = 0; i < lstm_preds.size(); ++i)
    combined.push_back(ensemble_forward(lstm_preds[i], tf_preds[i]));
  const EvalReport val = evaluate(combined, gold_labels(val_split), Protocol::ThreeClass);
  result.val_accuracy = val.accuracy;
  result.val_macro_f1 = val.macro_f1;
  return result;
}

std::vector<GridCell> grid_search(const Dataset& train_split, const Dataset& val_split,
                                  std::shared_ptr<const FeatureProvider> provider,
                                  const TrainConfig& base, const GridSpec& grids) {
  if (grids.lrs.empty() || grids.ff_dims.empty() || grids.emb_dims.empty() ||
      grids.batch_sizes.empty())
    throw std::invalid_argument("grid_search: empty grid");

  std::vector<GridCell> cells;
  std::uint64_t index = 0;
  for (double lr : grids.lrs) {
    for (int ff : grids.ff_dims) {
      for (int emb : grids.emb_dims) {
        for (int batch : grids.batch_sizes) {
          GridCell cell;
          cell.cfg = base;
          cell.cfg.lr = lr;
          cell.cfg.batch_size = batch;
          cell.cfg.model.ff_dim = ff;
          cell.cfg.model.emb_dim = emb;
          cell.cfg.seed = Rng::stream(base.seed, "grid", index).next_u64();
          cell.cfg.log_path.clear();
          try {
            TrainResult r = train(train_split, val_split, provider, cell.cfg);
            cell.val_macro_f1 = r.report.best_val_macro_f1;
            cell.val_accuracy = r.report.best_val_accuracy;
            cell.best_epoch = r.report.best_epoch;
          } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
          }
          cells.push_back(std::move(cell));
          ++index;
        }
      }
    }
  }

  std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.val_macro_f1 != b.val_macro_f1) return a.val_macro_f1 > b.val_macro_f1;
    const auto key = [](const GridCell& c) {
      return std::make_tuple(c.cfg.lr, c.cfg.model.ff_dim, c.cfg.model.emb_dim, c.cfg.batch_size);
    };
    return key(a) < key(b);
  });
  return cells;
}

std::string grid_csv(const std::vector<GridCell>& cells) {
  std::string out = "rank,lr,ff_dim,emb_dim,batch_size,seed,val_macro_f1,val_accuracy,best_epoch,status,error\n";
  char buf[128];
  int rank = 1;
  for (const GridCell& c : cells) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%d,%d,%d,%llu,", rank++, c.cfg.lr, c.cfg.model.ff_dim,
                  c.cfg.model.emb_dim, c.cfg.batch_size,
                  static_cast<unsigned long long>(c.cfg.seed));
    out += buf;
    if (c.failed) {
      std::string msg = c.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      out += ",,,failed," + msg + '\n';
    } else {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%d,ok,\n", c.val_macro_f1, c.val_accuracy,
                    c.best_epoch);
      out += buf;
    }
  }
  return out;
}

}  // namespace pce
