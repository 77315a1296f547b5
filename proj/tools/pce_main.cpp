#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pce/encoding.hpp"
#include "pce/evaluation.hpp"
#include "pce/gaze_synth.hpp"
#include "pce/llm_harness.hpp"
#include "pce/models.hpp"
#include "pce/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no such file: '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

pce::Dataset load_data_dir(const std::string& dir) {
  require_file(dir + "/fixations.csv");
  require_file(dir + "/labels.csv");
  require_file(dir + "/stimuli.json");
  return pce::load_dataset(dir + "/fixations.csv", dir + "/labels.csv", dir + "/stimuli.json");
}

std::shared_ptr<const pce::FeatureProvider> load_provider(const std::string& dir) {
  require_file(dir + "/features.bin");
  require_file(dir + "/features.json");
  auto store = std::make_shared<pce::FeatureStore>(
      pce::FeatureStore::load(dir + "/features.bin", dir + "/features.json"));
  return std::make_shared<pce::StoreFeatureProvider>(std::move(store));
}

// Resolved run configuration echoed into every artifact.
json run_config(const std::string& command, std::uint64_t seed, const json& extra) {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

int pick_split(const std::string& name) {
  if (name == "train") return 0;
  if (name == "val") return 1;
  if (name == "test") return 2;
  if (name == "all") return -1;
  throw UsageError("unknown split '" + name + "' (expected train|val|test|all)");
}

struct SplitSet {
  pce::Dataset train, val, test;
};

SplitSet make_splits(const pce::Dataset& ds, std::uint64_t seed) {
  auto parts = pce::stratified_split(ds, {0.8, 0.1, 0.1}, seed);
  return SplitSet{std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

// --- gen -----------------------------------------------------------------------

int cmd_gen(const json& file_cfg, CLI::App* cmd, std::uint64_t seed, bool seed_set,
            const std::string& out_dir, double signal, bool signal_set, int samples,
            bool samples_set) {
  pce::GeneratorConfig cfg;
  if (file_cfg.contains("generator"))
    cfg = pce::GeneratorConfig::from_json(file_cfg["generator"].dump());
  if (seed_set) cfg.seed = seed;
  if (signal_set) cfg.signal_strength = signal;
  if (samples_set) cfg.n_samples = samples;
  (void)cmd;
  cfg.validate();

  fs::create_directories(out_dir);
  pce::Dataset ds = pce::generate(cfg);
  pce::save_dataset(ds, out_dir + "/fixations.csv", out_dir + "/labels.csv",
                    out_dir + "/stimuli.json");
  pce::FeatureStore store = pce::generate_features(cfg, ds, cfg.seed);
  store.save(out_dir + "/features.bin", out_dir + "/features.json");

  json echo = run_config("gen", cfg.seed, {{"generator", json::parse(cfg.to_json())}});
  write_text(out_dir + "/gen_config.json", echo.dump(2) + "\n");
  std::printf("wrote %zu samples, %d stimuli, %zu feature vectors to %s\n", ds.samples.size(),
              cfg.n_stimuli, store.size(), out_dir.c_str());
  return 0;
}

// --- train / grid ----------------------------------------------------------------

pce::TrainConfig resolve_train_config(const json& file_cfg) {
  pce::TrainConfig cfg;
  if (file_cfg.contains("train")) cfg = pce::TrainConfig::from_json(file_cfg["train"].dump());
  if (file_cfg.contains("model"))
    cfg.model = pce::ModelConfig::from_json(file_cfg["model"].dump());
  return cfg;
}

json report_json(const pce::TrainReport& report) {
  json j;
  j["best_epoch"] = report.best_epoch;
  j["best_val_macro_f1"] = report.best_val_macro_f1;
  j["best_val_accuracy"] = report.best_val_accuracy;
  j["epochs"] = json::array();
  for (const auto& e : report.epochs)
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_accuracy", e.val_accuracy},
                           {"val_macro_f1", e.val_macro_f1}});
  return j;
}

int cmd_train(pce::TrainConfig cfg, const std::string& data_dir, const std::string& out_dir) {
  cfg.validate();
  const pce::Dataset ds = load_data_dir(data_dir);
  const SplitSet splits = make_splits(ds, cfg.seed);
  std::shared_ptr<const pce::FeatureProvider> provider;
  if (cfg.kind != pce::ModelKind::Lstm) provider = load_provider(data_dir);

  fs::create_directories(out_dir);
  const json echo =
      run_config("train", cfg.seed, {{"train", json::parse(cfg.to_json())}, {"data", data_dir}});

  json out = json::object();
  out["config"] = echo;
  if (cfg.kind == pce::ModelKind::Ensemble) {
    pce::TrainConfig tf_cfg = cfg;
    tf_cfg.kind = pce::ModelKind::Transformer;
    pce::EnsembleResult r =
        pce::train_ensemble(splits.train, splits.val, provider, cfg, tf_cfg);
    r.lstm.model.save(out_dir + "/model_lstm", cfg.seed);
    r.transformer.model.save(out_dir + "/model_transformer", cfg.seed);
    out["lstm"] = report_json(r.lstm.report);
    out["transformer"] = report_json(r.transformer.report);
    out["ensemble_val_macro_f1"] = r.val_macro_f1;
    out["ensemble_val_accuracy"] = r.val_accuracy;
    std::printf("ensemble val macro-F1 %.4f (lstm best %.4f, transformer best %.4f)\n",
                r.val_macro_f1, r.lstm.report.best_val_macro_f1,
                r.transformer.report.best_val_macro_f1);
  } else {
    pce::TrainResult r = pce::train(splits.train, splits.val, provider, cfg);
    r.model.save(out_dir + "/model", cfg.seed);
    out["report"] = report_json(r.report);
    std::printf("best epoch %d, val macro-F1 %.4f\n", r.report.best_epoch,
                r.report.best_val_macro_f1);
  }
  write_text(out_dir + "/train_report.json", out.dump(2) + "\n");
  return 0;
}

int cmd_grid(pce::TrainConfig base, const std::string& data_dir, const std::string& out_dir) {
  base.validate();
  if (base.kind == pce::ModelKind::Ensemble)
    throw UsageError("grid: pick a single model kind (lstm|transformer|pgmt)");
  const pce::Dataset ds = load_data_dir(data_dir);
  const SplitSet splits = make_splits(ds, base.seed);
  std::shared_ptr<const pce::FeatureProvider> provider;
  if (base.kind != pce::ModelKind::Lstm) provider = load_provider(data_dir);

  const auto cells = pce::grid_search(splits.train, splits.val, provider, base);
  fs::create_directories(out_dir);
  write_text(out_dir + "/grid.csv", pce::grid_csv(cells));
  const json echo =
      run_config("grid", base.seed, {{"train", json::parse(base.to_json())}, {"data", data_dir}});
  write_text(out_dir + "/grid_config.json", echo.dump(2) + "\n");
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.failed ? 1 : 0;
  std::printf("%zu cells (%zu failed); best val macro-F1 %.4f\n", cells.size(), failed,
              cells.empty() ? 0.0 : cells.front().val_macro_f1);
  return 0;
}

// --- eval ------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& checkpoint2,
             const std::string& data_dir, const std::string& protocol_name,
             const std::string& split_name, std::uint64_t seed, bool twoclass_remap,
             const std::string& out_path) {
  require_file(checkpoint + ".json");
  const pce::Protocol protocol = pce::protocol_from_string(protocol_name);
  const pce::Dataset ds = load_data_dir(data_dir);
  const int split_idx = pick_split(split_name);
  SplitSet splits = make_splits(ds, seed);
  const pce::Dataset& split = split_idx == -1   ? ds
                              : split_idx == 0 ? splits.train
                              : split_idx == 1 ? splits.val
                                               : splits.test;

  std::shared_ptr<const pce::FeatureProvider> provider;
  const auto needs_provider = [&](const std::string& prefix) {
    // Peek at the manifest kind to avoid demanding features for LSTM-only runs.
    std::ifstream in(prefix + ".json");
    json manifest;
    in >> manifest;
    const auto kind = manifest.at("config").at("model").get<std::string>();
    return kind != "lstm";
  };
  if (needs_provider(checkpoint) || (!checkpoint2.empty() && needs_provider(checkpoint2)))
    provider = load_provider(data_dir);

  pce::PceModel model = pce::PceModel::load(checkpoint, {}, {}, provider);
  std::vector<pce::Prediction> preds = pce::predict_all(model, split);
  if (!checkpoint2.empty()) {
    require_file(checkpoint2 + ".json");
    pce::PceModel second = pce::PceModel::load(checkpoint2, {}, {}, provider);
    const auto preds2 = pce::predict_all(second, split);
    for (std::size_t i = 0; i < preds.size(); ++i)
      preds[i] = pce::ensemble_forward(preds[i], preds2[i]);
  }
  const pce::EvalReport report =
      pce::evaluate(preds, pce::gold_labels(split), protocol, twoclass_remap);

  const json echo = run_config("eval", seed,
                               {{"checkpoint", checkpoint},
                                {"checkpoint2", checkpoint2},
                                {"data", data_dir},
                                {"protocol", protocol_name},
                                {"split", split_name},
                                {"twoclass_remap", twoclass_remap}});
  pce::save_metrics(report, out_path, echo.dump());
  std::printf("%s on %s split: accuracy %.4f, macro-F1 %.4f (n=%zu)\n", protocol_name.c_str(),
              split_name.c_str(), report.accuracy, report.macro_f1, report.n_evaluated);
  return 0;
}

// --- ablation ----------------------------------------------------------------------

int cmd_ablation(pce::TrainConfig base, const std::string& data_dir, const std::string& out_dir) {
  base.validate();
  const pce::Dataset ds = load_data_dir(data_dir);
  const SplitSet splits = make_splits(ds, base.seed);
  auto provider = load_provider(data_dir);

  const auto train_variant = [&](pce::ModelKind kind, bool user) {
    pce::TrainConfig cfg = base;
    cfg.kind = kind;
    cfg.model.participant_embedding = user;
    return pce::train(splits.train, splits.val, provider, cfg);
  };

  auto lstm_nouser = train_variant(pce::ModelKind::Lstm, false);
  auto lstm_user = train_variant(pce::ModelKind::Lstm, true);
  auto tf_nouser = train_variant(pce::ModelKind::Transformer, false);
  auto tf_user = train_variant(pce::ModelKind::Transformer, true);

  const auto golds = pce::gold_labels(splits.test);
  const auto naive = pce::naive_baseline(pce::gold_labels(splits.train));
  std::vector<std::pair<std::string, std::vector<pce::Prediction>>> preds;
  preds.emplace_back("naive",
                     std::vector<pce::Prediction>(golds.size(), naive.predict()));
  preds.emplace_back("lstm", pce::predict_all(lstm_nouser.model, splits.test));
  preds.emplace_back("lstm+user", pce::predict_all(lstm_user.model, splits.test));
  preds.emplace_back("transformer", pce::predict_all(tf_nouser.model, splits.test));
  preds.emplace_back("transformer+user", pce::predict_all(tf_user.model, splits.test));
  std::vector<pce::Prediction> ensemble;
  for (std::size_t i = 0; i < golds.size(); ++i)
    ensemble.push_back(pce::ensemble_forward(preds[2].second[i], preds[4].second[i]));
  preds.emplace_back("ensemble", std::move(ensemble));

  const std::vector<pce::AblationVariant> variants{
      {"naive", false, false, false},          {"lstm", true, false, false},
      {"lstm+user", true, true, false},        {"transformer", false, false, true},
      {"transformer+user", false, true, true}, {"ensemble", true, true, true},
  };
  const pce::AblationTable table = pce::ablation_table(variants, preds, golds);

  fs::create_directories(out_dir);
  write_text(out_dir + "/ablation.csv", table.to_csv());
  write_text(out_dir + "/ablation.txt", table.to_text());
  const json echo = run_config("ablation", base.seed,
                               {{"train", json::parse(base.to_json())}, {"data", data_dir}});
  write_text(out_dir + "/ablation_config.json", echo.dump(2) + "\n");
  std::fputs(table.to_text().c_str(), stdout);
  return 0;
}

// --- incontext -----------------------------------------------------------------------

int cmd_incontext(const std::string& data_dir, const std::string& setup_name,
                  const std::string& protocol_name, const std::string& split_name,
                  std::uint64_t seed, const std::string& endpoint, const std::string& api_model,
                  const std::string& auth_env, const std::string& mock,
                  const std::string& replay_path, int parallelism, const std::string& out_dir) {
  const pce::Protocol protocol = pce::protocol_from_string(protocol_name);
  fs::create_directories(out_dir);

  if (!replay_path.empty()) {
    require_file(replay_path);
    const pce::IncontextResult result = pce::replay_transcripts(replay_path, protocol);
    const json echo = run_config("incontext", seed,
                                 {{"replay", replay_path}, {"protocol", protocol_name}});
    pce::save_metrics(result.report, out_dir + "/incontext_metrics.json", echo.dump());
    std::printf("replayed %zu transcripts: accuracy %.4f, macro-F1 %.4f\n",
                result.transcripts.size(), result.report.accuracy, result.report.macro_f1);
    return 0;
  }

  const pce::Dataset ds = load_data_dir(data_dir);
  const int split_idx = pick_split(split_name);
  SplitSet splits = make_splits(ds, seed);
  const pce::Dataset& split = split_idx == -1   ? ds
                              : split_idx == 0 ? splits.train
                              : split_idx == 1 ? splits.val
                                               : splits.test;

  std::unique_ptr<pce::CompletionClient> client;
  if (!mock.empty()) {
    if (mock == "gold") {
      // Transcript-shaped smoke runs: answer from the split's gold labels.
      std::map<std::pair<std::string, std::string>, pce::PceLabel> gold;
      for (const auto& s : split.samples)
        gold[{s.participant_id, s.stimulus_id}] = s.label;
      client = std::make_unique<pce::FunctionCompletionClient>(
          [gold, &split](const pce::PromptBundle& bundle) -> std::string {
            for (const auto& [key, label] : gold)
              if (bundle.user_text.find("image://" + key.second + "\n") != std::string::npos &&
                  bundle.user_text.find("Caption: " +
                                        split.stimulus(key.second).caption) !=
                      std::string::npos)
                return std::string(pce::label_name(label));
            return "unclear";
          });
    } else {
      const std::string reply = mock;
      client = std::make_unique<pce::FunctionCompletionClient>(
          [reply](const pce::PromptBundle&) { return reply; });
    }
  } else if (!endpoint.empty()) {
    pce::HttpClientOptions options;
    options.endpoint = endpoint;
    options.model = api_model;
    options.auth_env = auth_env;
    client = std::make_unique<pce::HttpCompletionClient>(options);
  } else {
    throw UsageError("incontext: pass --endpoint, --mock, or --replay");
  }

  pce::IncontextOptions options;
  options.setup = pce::prompt_setup_from_string(setup_name);
  options.protocol = protocol;
  options.parallelism = parallelism;
  options.transcript_path = out_dir + "/transcripts.jsonl";
  const pce::IncontextResult result = pce::run_incontext_eval(split, *client, options);

  const json echo = run_config("incontext", seed,
                               {{"data", data_dir},
                                {"setup", setup_name},
                                {"protocol", protocol_name},
                                {"split", split_name},
                                {"endpoint", endpoint},
                                {"mock", mock}});
  pce::save_metrics(result.report, out_dir + "/incontext_metrics.json", echo.dump());
  std::printf("%zu samples (%zu failed): accuracy %.4f, macro-F1 %.4f\n",
              result.transcripts.size(), result.n_failed, result.report.accuracy,
              result.report.macro_f1);
  return 0;
}

// --- inspect -------------------------------------------------------------------------

int cmd_inspect(const std::string& data_dir, const std::string& participant,
                const std::string& stimulus, double lambda, const std::string& matrix_csv_path) {
  const pce::Dataset ds = load_data_dir(data_dir);
  const pce::PceSample* sample = nullptr;
  for (const auto& s : ds.samples)
    if ((participant.empty() || s.participant_id == participant) &&
        (stimulus.empty() || s.stimulus_id == stimulus)) {
      sample = &s;
      break;
    }
  if (!sample) throw std::runtime_error("inspect: no matching sample");

  std::printf("participant %s, stimulus %s, label %s\n", sample->participant_id.c_str(),
              sample->stimulus_id.c_str(), std::string(pce::label_name(sample->label)).c_str());
  std::printf("%-6s %-24s %10s %10s %12s\n", "index", "aoi", "x", "y", "duration_ms");
  for (const auto& f : sample->sequence.fixations)
    std::printf("%-6d %-24s %10.2f %10.2f %12.2f\n", f.index, f.aoi.str().c_str(), f.x, f.y,
                f.duration_ms);

  const pce::TransitionMatrix t = pce::transition_matrix(sample->sequence);
  std::printf("\ntransition matrix:\n%s", pce::matrix_csv(t.aoi_order, t.m).c_str());
  const pce::AmplifiedMatrix a = pce::amplify(t, lambda);
  std::printf("\namplified (lambda=%g):\n%s", lambda, pce::matrix_csv(a.aoi_order, a.m).c_str());
  if (!matrix_csv_path.empty())
    write_text(matrix_csv_path, pce::matrix_csv(a.aoi_order, a.m));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception-guided crossmodal entailment toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override its values)");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset and feature store");
  std::uint64_t gen_seed = 7;
  std::string gen_out = "data";
  double gen_signal = 1.0;
  int gen_samples = 5400;
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  auto* gen_signal_opt = gen->add_option("--signal", gen_signal, "Signal strength in [0,1]");
  auto* gen_samples_opt = gen->add_option("--samples", gen_samples, "Sample count");

  // common train-ish flags
  const auto add_train_flags = [](CLI::App* cmd, std::string& data_dir, std::string& out_dir,
                                  std::string& model, std::uint64_t& seed, double& lambda,
                                  double& lr, int& batch, int& epochs, bool& unrestricted) {
    cmd->add_option("--data", data_dir, "Dataset directory (from gen)")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--model", model, "lstm|transformer|pgmt|ensemble");
    cmd->add_option("--seed", seed, "Training seed");
    cmd->add_option("--lambda", lambda, "PGMT amplification weight");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--batch", batch, "Batch size");
    cmd->add_option("--epochs", epochs, "Max epochs");
    cmd->add_flag("--unrestricted", unrestricted, "Lift hyperparameter grid restrictions");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  std::string train_data, train_out, train_model = "lstm";
  std::uint64_t train_seed = 7;
  double train_lambda = 500.0, train_lr = 1e-4;
  int train_batch = 128, train_epochs = 30;
  bool train_unrestricted = false;
  add_train_flags(train_cmd, train_data, train_out, train_model, train_seed, train_lambda,
                  train_lr, train_batch, train_epochs, train_unrestricted);

  auto* grid_cmd = app.add_subcommand("grid", "Exhaustive hyperparameter grid search");
  std::string grid_data, grid_out, grid_model = "lstm";
  std::uint64_t grid_seed = 7;
  double grid_lambda = 500.0, grid_lr = 1e-4;
  int grid_batch = 128, grid_epochs = 30;
  bool grid_unrestricted = false;
  add_train_flags(grid_cmd, grid_data, grid_out, grid_model, grid_seed, grid_lambda, grid_lr,
                  grid_batch, grid_epochs, grid_unrestricted);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_ckpt2, eval_data, eval_protocol = "3class", eval_split = "test";
  std::string eval_out = "metrics.json";
  std::uint64_t eval_seed = 7;
  bool eval_remap = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint prefix (from train)")->required();
  eval_cmd->add_option("--checkpoint2", eval_ckpt2,
                       "Second checkpoint prefix (ensemble of the two)");
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--protocol", eval_protocol, "3class|2class");
  eval_cmd->add_option("--split", eval_split, "train|val|test|all");
  eval_cmd->add_option("--seed", eval_seed, "Split seed (must match training)");
  eval_cmd->add_flag("--twoclass-remap", eval_remap,
                     "Remap retained Unclear predictions to the runner-up class");
  eval_cmd->add_option("--out", eval_out, "Metrics JSON path");

  auto* abl_cmd = app.add_subcommand("ablation", "Train the alignment-signal variant table");
  std::string abl_data, abl_out, abl_model = "lstm";
  std::uint64_t abl_seed = 7;
  double abl_lambda = 500.0, abl_lr = 1e-4;
  int abl_batch = 128, abl_epochs = 30;
  bool abl_unrestricted = false;
  add_train_flags(abl_cmd, abl_data, abl_out, abl_model, abl_seed, abl_lambda, abl_lr, abl_batch,
                  abl_epochs, abl_unrestricted);

  auto* inc_cmd = app.add_subcommand("incontext", "In-context LLM evaluation");
  std::string inc_data, inc_setup = "zero", inc_protocol = "3class", inc_split = "test";
  std::string inc_endpoint, inc_api_model = "gpt-4", inc_auth_env = "PCE_API_TOKEN", inc_mock;
  std::string inc_replay, inc_out = "incontext";
  std::uint64_t inc_seed = 7;
  int inc_parallel = 4;
  inc_cmd->add_option("--data", inc_data, "Dataset directory");
  inc_cmd->add_option("--setup", inc_setup, "zero|fix|one");
  inc_cmd->add_option("--protocol", inc_protocol, "3class|2class");
  inc_cmd->add_option("--split", inc_split, "train|val|test|all");
  inc_cmd->add_option("--seed", inc_seed, "Split seed");
  inc_cmd->add_option("--endpoint", inc_endpoint, "Chat-completion endpoint (scheme://host:port)");
  inc_cmd->add_option("--api-model", inc_api_model, "Model name sent on the wire");
  inc_cmd->add_option("--auth-env", inc_auth_env, "Env var holding the bearer token");
  inc_cmd->add_option("--mock", inc_mock, "Offline client: 'gold' or a fixed reply string");
  inc_cmd->add_option("--replay", inc_replay, "Recompute metrics from a transcript file");
  inc_cmd->add_option("--parallel", inc_parallel, "Max in-flight requests");
  inc_cmd->add_option("--out", inc_out, "Output directory");

  auto* ins_cmd = app.add_subcommand("inspect", "Print a sample's sequence and matrices");
  std::string ins_data, ins_participant, ins_stimulus, ins_csv;
  double ins_lambda = 5.0;
  ins_cmd->add_option("--data", ins_data, "Dataset directory")->required();
  ins_cmd->add_option("--participant", ins_participant, "Participant id filter");
  ins_cmd->add_option("--stimulus", ins_stimulus, "Stimulus id filter");
  ins_cmd->add_option("--lambda", ins_lambda, "Amplification weight");
  ins_cmd->add_option("--matrix-csv", ins_csv, "Write the amplified matrix as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const json file_cfg = load_config_file(config_path);
    const auto train_config = [&](CLI::App* cmd, const std::string& model, std::uint64_t seed,
                                  double lambda, double lr, int batch, int epochs,
                                  bool unrestricted) {
      pce::TrainConfig cfg = resolve_train_config(file_cfg);
      const auto kind_of = [](const std::string& name) {
        try {
          return pce::model_kind_from_string(name);
        } catch (const std::exception& e) {
          throw UsageError(e.what());
        }
      };
      if (cmd->count("--model")) cfg.kind = kind_of(model);
      if (cmd->count("--seed")) cfg.seed = seed;
      if (cmd->count("--lambda")) cfg.model.lambda = lambda;
      if (cmd->count("--lr")) cfg.lr = lr;
      if (cmd->count("--batch")) cfg.batch_size = batch;
      if (cmd->count("--epochs")) cfg.max_epochs = epochs;
      if (unrestricted) {
        cfg.unrestricted = true;
        cfg.model.unrestricted = true;
      }
      if (!file_cfg.contains("train") && !cmd->count("--model")) cfg.kind = kind_of(model);
      return cfg;
    };

    if (gen->parsed())
      return cmd_gen(file_cfg, gen, gen_seed, gen_seed_opt->count() > 0, gen_out, gen_signal,
                     gen_signal_opt->count() > 0, gen_samples, gen_samples_opt->count() > 0);
    if (train_cmd->parsed())
      return cmd_train(train_config(train_cmd, train_model, train_seed, train_lambda, train_lr,
                                    train_batch, train_epochs, train_unrestricted),
                       train_data, train_out);
    if (grid_cmd->parsed())
      return cmd_grid(train_config(grid_cmd, grid_model, grid_seed, grid_lambda, grid_lr,
                                   grid_batch, grid_epochs, grid_unrestricted),
                      grid_data, grid_out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_ckpt2, eval_data, eval_protocol, eval_split, eval_seed,
                      eval_remap, eval_out);
    if (abl_cmd->parsed())
      return cmd_ablation(train_config(abl_cmd, abl_model, abl_seed, abl_lambda, abl_lr, abl_batch,
                                       abl_epochs, abl_unrestricted),
                          abl_data, abl_out);
    if (inc_cmd->parsed())
      return cmd_incontext(inc_data, inc_setup, inc_protocol, inc_split, inc_seed, inc_endpoint,
                           inc_api_model, inc_auth_env, inc_mock, inc_replay, inc_parallel,
                           inc_out);
    if (ins_cmd->parsed())
      return cmd_inspect(ins_data, ins_participant, ins_stimulus, ins_lambda, ins_csv);
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
