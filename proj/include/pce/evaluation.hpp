#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pce/core_data.hpp"
#include "pce/prediction.hpp"

namespace pce {

enum class Protocol { ThreeClass, TwoClass };

std::string_view protocol_name(Protocol p);
Protocol protocol_from_string(std::string_view s);

struct EvalReport {
  Protocol protocol = Protocol::ThreeClass;
  std::size_t n_evaluated = 0;
  // rows = gold, cols = predicted; always 3x3.  Under 2class the Unclear gold
  // row stays zero because those samples are filtered out.
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
  // Retained samples whose prediction was invalid (e.g. unparseable LLM
  // output), by gold class.  They count in accuracy/recall denominators but
  // appear in no confusion column.
  std::array<std::size_t, kNumClasses> invalid_per_gold{};
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
};

// Scores predictions against gold labels.  Under TwoClass, samples whose gold
// label is Unclear are dropped; Unclear predictions on retained samples count
// as errors unless `twoclass_remap` is set, in which case they are remapped to
// the runner-up class from the prediction's probabilities.
EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<PceLabel>& golds,
                    Protocol protocol, bool twoclass_remap = false);

// Constant predictor emitting the modal class of the training golds
// (tie-break: lowest class code).
struct NaiveBaseline {
  PceLabel label = PceLabel::Yes;
  Prediction predict() const {
    Prediction p;
    p.label = label;
    p.probs = {0.0, 0.0, 0.0};
    p.probs[static_cast<int>(label)] = 1.0;
    return p;
  }
};

NaiveBaseline naive_baseline(const std::vector<PceLabel>& train_golds);

// One ablation-table row: a model variant with its alignment-signal flags and
// metrics under both protocols.  `present` is false when the variant was not
// trained; such rows render as absent.
struct AblationRow {
  std::string model;
  bool eyetrack = false;
  bool user = false;
  bool stimulus = false;
  bool present = false;
  double f1_3class = 0.0;
  double acc_3class = 0.0;
  double f1_2class = 0.0;
  double acc_2class = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string to_csv() const;
  std::string to_text() const;
};

// Builds the six-row variant table (naive, LSTM with/without user signal,
// transformer with/without, ensemble) from per-variant predictions.  A
// variant missing from `preds_by_variant` yields an absent row.
struct AblationVariant {
  std::string model;
  bool eyetrack = false;
  bool user = false;
  bool stimulus = false;
};

AblationTable ablation_table(
    const std::vector<AblationVariant>& variants,
    const std::vector<std::pair<std::string, std::vector<Prediction>>>& preds_by_variant,
    const std::vector<PceLabel>& golds);

// Metrics JSON I/O.  `config_echo` is embedded verbatim under "config" so an
// artifact records the resolved run configuration that produced it.
void save_metrics(const EvalReport& report, const std::string& path,
                  const std::string& config_echo_json = "{}");
EvalReport load_metrics(const std::string& path);

}  // namespace pce
