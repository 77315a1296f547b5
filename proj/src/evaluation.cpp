#include "pce/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pce {

namespace {
using json = nlohmann::ordered_json;
}

std::string_view protocol_name(Protocol p) {
  return p == Protocol::ThreeClass ? "3class" : "2class";
}

Protocol protocol_from_string(std::string_view s) {
  if (s == "3class") return Protocol::ThreeClass;
  if (s == "2class") return Protocol::TwoClass;
  throw std::runtime_error("unknown protocol '" + std::string(s) + "' (expected 3class|2class)");
}

EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<PceLabel>& golds,
                    Protocol protocol, bool twoclass_remap) {
  if (preds.size() != golds.size())
    throw std::invalid_argument("evaluate: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(golds.size()) + " golds");

  EvalReport r;
  r.protocol = protocol;
  const bool two = protocol == Protocol::TwoClass;

  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int g = static_cast<int>(golds[i]);
    if (two && golds[i] == PceLabel::Unclear) continue;
    r.n_evaluated++;
    if (!preds[i].valid) {
      r.invalid_per_gold[g]++;
      continue;
    }
    PceLabel pl = preds[i].label;
    if (two && twoclass_remap && pl == PceLabel::Unclear) {
      // Runner-up between Yes and No from the probabilities, lowest code wins ties.
      pl = preds[i].probs[1] > preds[i].probs[0] ? PceLabel::No : PceLabel::Yes;
    }
    r.confusion[g][static_cast<int>(pl)]++;
  }
  if (r.n_evaluated == 0) throw std::runtime_error("evaluate: no samples after protocol filter");

  const int scored_classes = two ? 2 : kNumClasses;
  std::size_t correct = 0;
  for (int c = 0; c < scored_classes; ++c) correct += r.confusion[c][c];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_evaluated);

  double f1_sum = 0.0;
  for (int c = 0; c < scored_classes; ++c) {
    std::size_t tp = r.confusion[c][c];
    std::size_t pred_c = 0, gold_c = r.invalid_per_gold[c];
    for (int g = 0; g < kNumClasses; ++g) pred_c += r.confusion[g][c];
    for (int p = 0; p < kNumClasses; ++p) gold_c += r.confusion[c][p];
    r.precision[c] = pred_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_c);
    r.recall[c] = gold_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_c);
    const double pr = r.precision[c] + r.recall[c];
    r.f1[c] = pr == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
    f1_sum += r.f1[c];
  }
  r.macro_f1 = f1_sum / static_cast<double>(scored_classes);
  return r;
}

NaiveBaseline naive_baseline(const std::vector<PceLabel>& train_golds) {
  if (train_golds.empty()) throw std::invalid_argument("naive_baseline: empty training golds");
  std::array<std::size_t, kNumClasses> counts{};
  for (PceLabel g : train_golds) counts[static_cast<int>(g)]++;
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (counts[c] > counts[best]) best = c;
  return NaiveBaseline{static_cast<PceLabel>(best)};
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string flag(bool b) { return b ? "x" : "-"; }

}  // namespace

std::string AblationTable::to_csv() const {
  std::string out = "model,eyetrack,user,stimulus,f1_3class,acc_3class,f1_2class,acc_2class\n";
  for (const AblationRow& r : rows) {
    out += r.model + ',' + flag(r.eyetrack) + ',' + flag(r.user) + ',' + flag(r.stimulus) + ',';
    if (r.present)
      out += fmt4(r.f1_3class) + ',' + fmt4(r.acc_3class) + ',' + fmt4(r.f1_2class) + ',' +
             fmt4(r.acc_2class);
    else
      out += "absent,absent,absent,absent";
    out += '\n';
  }
  return out;
}

std::string AblationTable::to_text() const {
  std::size_t name_w = 5;
  for (const AblationRow& r : rows) name_w = std::max(name_w, r.model.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  ET UA ST  %-7s %-7s %-7s %-7s\n",
                static_cast<int>(name_w), "model", "F1(3)", "Acc(3)", "F1(2)", "Acc(2)");
  out += buf;
  for (const AblationRow& r : rows) {
    if (r.present)
      std::snprintf(buf, sizeof(buf), "%-*s  %s  %s  %s   %.4f  %.4f  %.4f  %.4f\n",
                    static_cast<int>(name_w), r.model.c_str(), flag(r.eyetrack).c_str(),
                    flag(r.user).c_str(), flag(r.stimulus).c_str(), r.f1_3class, r.acc_3class,
                    r.f1_2class, r.acc_2class);
    else
      std::snprintf(buf, sizeof(buf), "%-*s  %s  %s  %s   %-7s %-7s %-7s %-7s\n",
                    static_cast<int>(name_w), r.model.c_str(), flag(r.eyetrack).c_str(),
                    flag(r.user).c_str(), flag(r.stimulus).c_str(), "absent", "absent", "absent",
                    "absent");
    out += buf;
  }
  return out;
}

AblationTable ablation_table(
    const std::vector<AblationVariant>& variants,
    const std::vector<std::pair<std::string, std::vector<Prediction>>>& preds_by_variant,
    const std::vector<PceLabel>& golds) {
  AblationTable table;
  for (const AblationVariant& v : variants) {
    AblationRow row;
    row.model = v.model;
    row.eyetrack = v.eyetrack;
    row.user = v.user;
    row.stimulus = v.stimulus;
    const std::vector<Prediction>* preds = nullptr;
    for (const auto& [name, p] : preds_by_variant)
      if (name == v.model) {
        preds = &p;
        break;
      }
    if (preds) {
      row.present = true;
      const EvalReport r3 = evaluate(*preds, golds, Protocol::ThreeClass);
      const EvalReport r2 = evaluate(*preds, golds, Protocol::TwoClass);
      row.f1_3class = r3.macro_f1;
      row.acc_3class = r3.accuracy;
      row.f1_2class = r2.macro_f1;
      row.acc_2class = r2.accuracy;
    }
    table.rows.push_back(row);
  }
  return table;
}

void save_metrics(const EvalReport& report, const std::string& path,
                  const std::string& config_echo_json) {
  json j;
  j["protocol"] = std::string(protocol_name(report.protocol));
  j["n_evaluated"] = report.n_evaluated;
  j["confusion"] = report.confusion;
  j["invalid_per_gold"] = report.invalid_per_gold;
  j["accuracy"] = report.accuracy;
  j["macro_f1"] = report.macro_f1;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["config"] = json::parse(config_echo_json);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

EvalReport load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  EvalReport r;
  r.protocol = protocol_from_string(j.at("protocol").get<std::string>());
  r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
  r.confusion = j.at("confusion").get<decltype(r.confusion)>();
  r.invalid_per_gold = j.at("invalid_per_gold").get<decltype(r.invalid_per_gold)>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.precision = j.at("precision").get<decltype(r.precision)>();
  r.recall = j.at("recall").get<decltype(r.recall)>();
  r.f1 = j.at("f1").get<decltype(r.f1)>();
  return r;
}

}  // namespace pce
