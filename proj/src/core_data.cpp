#include "pce/core_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pce/rng.hpp"

namespace pce {

namespace {

using json = nlohmann::ordered_json;

bool is_canonical_aoi(std::string_view s) {
  if (s == "off") return true;
  std::string_view rest;
  if (s.starts_with("vis_"))
    rest = s.substr(4);
  else if (s.starts_with("txt_"))
    rest = s.substr(4);
  else
    return false;
  if (rest.empty()) return false;
  for (char c : rest) {
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  }
  return true;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Numeric formatting for CSV output: plain integers stay plain, reals keep
// ten significant digits.
std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

AoiId::AoiId(std::string canonical) : symbol_(std::move(canonical)) {
  if (!is_canonical_aoi(symbol_))
    throw std::invalid_argument("AoiId: not canonical: '" + symbol_ + "'");
}

AoiId AoiId::vis(std::string_view label) { return AoiId("vis_" + std::string(label)); }
AoiId AoiId::txt(std::string_view label) { return AoiId("txt_" + std::string(label)); }

AoiId AoiId::normalize(std::string_view raw) {
  const std::string s = lowercase(raw);
  if (s.empty() || s == "off") return AoiId::off();
  if (is_canonical_aoi(s)) return AoiId(s);

  std::string modality, label;
  if (s.starts_with("vis_")) {
    modality = "vis";
    label = s.substr(4);
  } else if (s.starts_with("txt_")) {
    modality = "txt";
    label = s.substr(4);
  } else if (s.starts_with("text_")) {
    modality = "txt";
    label = s.substr(5);
  } else if (s.ends_with("_vis")) {
    modality = "vis";
    label = s.substr(0, s.size() - 4);
  } else if (s.ends_with("_txt")) {
    modality = "txt";
    label = s.substr(0, s.size() - 4);
  } else if (s.ends_with("_text")) {
    modality = "txt";
    label = s.substr(0, s.size() - 5);
  } else {
    return AoiId::off();
  }
  const std::string candidate = modality + "_" + label;
  if (!is_canonical_aoi(candidate)) return AoiId::off();
  return AoiId(candidate);
}

Modality AoiId::modality() const {
  if (symbol_ == "off") return Modality::Off;
  return symbol_.starts_with("vis_") ? Modality::Vis : Modality::Txt;
}

std::string AoiId::label() const {
  if (symbol_ == "off") return "";
  return symbol_.substr(4);
}

void FixationSequence::validate() const {
  if (fixations.empty())
    throw std::runtime_error("FixationSequence: empty sequence for participant '" +
                             participant_id + "', stimulus '" + stimulus_id + "'");
  for (std::size_t i = 0; i < fixations.size(); ++i) {
    const Fixation& f = fixations[i];
    if (f.index != static_cast<int>(i) + 1)
      throw std::runtime_error("FixationSequence: indices not contiguous 1..n for participant '" +
                               participant_id + "', stimulus '" + stimulus_id + "'");
    if (!(f.duration_ms > 0.0))
      throw std::runtime_error("FixationSequence: non-positive duration at index " +
                               std::to_string(f.index));
    if (f.x < 0.0 || f.y < 0.0)
      throw std::runtime_error("FixationSequence: negative coordinate at index " +
                               std::to_string(f.index));
  }
}

std::string_view label_name(PceLabel label) {
  switch (label) {
    case PceLabel::Yes: return "yes";
    case PceLabel::No: return "no";
    case PceLabel::Unclear: return "unclear";
  }
  throw std::logic_error("label_name: bad label");
}

PceLabel label_from_string(std::string_view s) {
  const std::string l = lowercase(s);
  if (l == "yes") return PceLabel::Yes;
  if (l == "no") return PceLabel::No;
  if (l == "unclear") return PceLabel::Unclear;
  throw std::runtime_error("unknown label '" + std::string(s) + "' (expected yes|no|unclear)");
}

void Stimulus::validate() const {
  for (const Region& r : regions) {
    if (r.aoi.modality() != Modality::Vis)
      throw std::runtime_error("Stimulus " + stimulus_id + ": region AOI '" + r.aoi.str() +
                               "' is not vis-modality");
    if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.x + r.w > image_w || r.y + r.h > image_h)
      throw std::runtime_error("Stimulus " + stimulus_id + ": region '" + r.aoi.str() +
                               "' outside image extent");
  }
  for (const CaptionSpan& s : caption_spans) {
    if (s.aoi.modality() != Modality::Txt)
      throw std::runtime_error("Stimulus " + stimulus_id + ": caption span AOI '" + s.aoi.str() +
                               "' is not txt-modality");
    if (s.start >= s.end || s.end > caption.size())
      throw std::runtime_error("Stimulus " + stimulus_id + ": caption span for '" + s.aoi.str() +
                               "' outside caption");
  }
}

int Vocab::add(const std::string& symbol) {
  auto it = index_.find(symbol);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  index_.emplace(symbol, idx);
  return idx;
}

std::optional<int> Vocab::find(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::index_of(const std::string& symbol) const {
  auto idx = find(symbol);
  if (!idx) throw std::runtime_error("Vocab: unknown symbol '" + symbol + "'");
  return *idx;
}

const std::string& Vocab::symbol(int index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("Vocab: index out of range");
  return symbols_[static_cast<std::size_t>(index)];
}

void Dataset::rebuild_vocabs() {
  aoi_vocab = Vocab{};
  participant_vocab = Vocab{};
  for (const PceSample& s : samples) {
    participant_vocab.add(s.participant_id);
    for (const Fixation& f : s.sequence.fixations) aoi_vocab.add(f.aoi.str());
  }
}

void Dataset::validate() const {
  std::set<std::pair<std::string, std::string>> seen;
  for (const PceSample& s : samples) {
    if (s.sequence.participant_id != s.participant_id ||
        s.sequence.stimulus_id != s.stimulus_id)
      throw std::runtime_error("Dataset: sample/sequence id mismatch for participant '" +
                               s.participant_id + "'");
    s.sequence.validate();
    if (!seen.emplace(s.participant_id, s.stimulus_id).second)
      throw std::runtime_error("Dataset: duplicate (participant, stimulus) pair (" +
                               s.participant_id + ", " + s.stimulus_id + ")");
    if (!stimuli.contains(s.stimulus_id))
      throw std::runtime_error("Dataset: dangling stimulus id '" + s.stimulus_id + "'");
    if (!participant_vocab.find(s.participant_id))
      throw std::runtime_error("Dataset: participant '" + s.participant_id + "' not in vocabulary");
    for (const Fixation& f : s.sequence.fixations)
      if (!aoi_vocab.find(f.aoi.str()))
        throw std::runtime_error("Dataset: AOI '" + f.aoi.str() + "' not in vocabulary");
  }
  for (const auto& [id, st] : stimuli) {
    if (st.stimulus_id != id) throw std::runtime_error("Dataset: stimulus key/id mismatch");
    st.validate();
  }
}

const Stimulus& Dataset::stimulus(const std::string& id) const {
  auto it = stimuli.find(id);
  if (it == stimuli.end()) throw std::runtime_error("Dataset: no stimulus '" + id + "'");
  return it->second;
}

std::array<std::size_t, 3> Dataset::class_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const PceSample& s : samples) counts[static_cast<int>(s.label)]++;
  return counts;
}

namespace {

struct CsvRow {
  std::vector<std::string> fields;
  int line = 0;
};

std::vector<CsvRow> read_csv(const std::string& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::vector<CsvRow> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    CsvRow row;
    row.line = lineno;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      row.fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (lineno == 1) {
      if (row.fields != header) {
        std::string expect;
        for (const auto& h : header) expect += (expect.empty() ? "" : ",") + h;
        throw std::runtime_error(path + ":1: expected header '" + expect + "'");
      }
      continue;
    }
    if (row.fields.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(row.fields.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& path, int line, const std::string& column,
                    const std::string& text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error(path + ":" + std::to_string(line) + ": column '" + column +
                             "': expected a number, got '" + text + "'");
  return value;
}

long parse_long(const std::string& path, int line, const std::string& column,
                const std::string& text) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error(path + ":" + std::to_string(line) + ": column '" + column +
                             "': expected an integer, got '" + text + "'");
  return value;
}

Stimulus stimulus_from_json(const json& j) {
  Stimulus st;
  st.stimulus_id = j.at("stimulus_id").get<std::string>();
  st.caption = j.at("caption").get<std::string>();
  st.image_w = j.at("image_w").get<double>();
  st.image_h = j.at("image_h").get<double>();
  for (const auto& r : j.at("regions")) {
    Region region;
    region.aoi = AoiId::normalize(r.at("aoi").get<std::string>());
    region.x = r.at("x").get<double>();
    region.y = r.at("y").get<double>();
    region.w = r.at("w").get<double>();
    region.h = r.at("h").get<double>();
    st.regions.push_back(region);
  }
  for (const auto& s : j.at("caption_spans")) {
    CaptionSpan span;
    span.aoi = AoiId::normalize(s.at("aoi").get<std::string>());
    span.start = s.at("start").get<std::size_t>();
    span.end = s.at("end").get<std::size_t>();
    st.caption_spans.push_back(span);
  }
  return st;
}

json stimulus_to_json(const Stimulus& st) {
  json j;
  j["stimulus_id"] = st.stimulus_id;
  j["caption"] = st.caption;
  j["image_w"] = st.image_w;
  j["image_h"] = st.image_h;
  j["regions"] = json::array();
  for (const Region& r : st.regions)
    j["regions"].push_back({{"aoi", r.aoi.str()},
                            {"x", r.x},
                            {"y", r.y},
                            {"w", r.w},
                            {"h", r.h}});
  j["caption_spans"] = json::array();
  for (const CaptionSpan& s : st.caption_spans)
    j["caption_spans"].push_back({{"aoi", s.aoi.str()}, {"start", s.start}, {"end", s.end}});
  return j;
}

}  // namespace

Dataset load_dataset(const std::string& fixations_path, const std::string& labels_path,
                     const std::string& stimuli_path) {
  Dataset ds;

  // Fixations, grouped by (participant, stimulus) in file order.
  const auto fix_rows = read_csv(
      fixations_path, {"participant_id", "stimulus_id", "index", "aoi", "x", "y", "duration_ms"});
  if (fix_rows.empty()) throw std::runtime_error(fixations_path + ": no samples");

  std::vector<FixationSequence> sequences;
  std::map<std::pair<std::string, std::string>, std::size_t> seq_index;
  for (const CsvRow& row : fix_rows) {
    const std::string& pid = row.fields[0];
    const std::string& sid = row.fields[1];
    Fixation f;
    f.index = static_cast<int>(parse_long(fixations_path, row.line, "index", row.fields[2]));
    f.aoi = AoiId::normalize(row.fields[3]);
    f.x = parse_double(fixations_path, row.line, "x", row.fields[4]);
    f.y = parse_double(fixations_path, row.line, "y", row.fields[5]);
    f.duration_ms = parse_double(fixations_path, row.line, "duration_ms", row.fields[6]);
    if (!(f.duration_ms > 0.0))
      throw std::runtime_error(fixations_path + ":" + std::to_string(row.line) +
                               ": column 'duration_ms': must be positive");
    if (f.x < 0.0 || f.y < 0.0)
      throw std::runtime_error(fixations_path + ":" + std::to_string(row.line) +
                               ": column 'x'/'y': must be non-negative");

    const auto key = std::make_pair(pid, sid);
    auto it = seq_index.find(key);
    if (it == seq_index.end()) {
      it = seq_index.emplace(key, sequences.size()).first;
      sequences.push_back(FixationSequence{pid, sid, {}});
    }
    FixationSequence& seq = sequences[it->second];
    if (f.index != static_cast<int>(seq.fixations.size()) + 1)
      throw std::runtime_error(fixations_path + ":" + std::to_string(row.line) +
                               ": column 'index': expected " +
                               std::to_string(seq.fixations.size() + 1) + ", got " +
                               std::to_string(f.index) + " for (" + pid + ", " + sid + ")");
    seq.fixations.push_back(std::move(f));
  }

  // Labels.
  const auto label_rows = read_csv(labels_path, {"participant_id", "stimulus_id", "label"});
  std::map<std::pair<std::string, std::string>, PceLabel> labels;
  for (const CsvRow& row : label_rows) {
    const auto key = std::make_pair(row.fields[0], row.fields[1]);
    PceLabel label;
    try {
      label = label_from_string(row.fields[2]);
    } catch (const std::exception& e) {
      throw std::runtime_error(labels_path + ":" + std::to_string(row.line) +
                               ": column 'label': " + e.what());
    }
    if (!labels.emplace(key, label).second)
      throw std::runtime_error(labels_path + ":" + std::to_string(row.line) +
                               ": duplicate (participant, stimulus) pair (" + row.fields[0] +
                               ", " + row.fields[1] + ")");
  }

  // Stimuli.
  std::ifstream sin(stimuli_path);
  if (!sin) throw std::runtime_error("cannot open '" + stimuli_path + "'");
  json stimuli_json;
  try {
    sin >> stimuli_json;
  } catch (const json::exception& e) {
    throw std::runtime_error(stimuli_path + ": " + e.what());
  }
  if (!stimuli_json.is_array()) throw std::runtime_error(stimuli_path + ": expected a JSON array");
  for (const auto& j : stimuli_json) {
    Stimulus st = stimulus_from_json(j);
    const std::string id = st.stimulus_id;
    if (!ds.stimuli.emplace(id, std::move(st)).second)
      throw std::runtime_error(stimuli_path + ": duplicate stimulus id '" + id + "'");
  }

  // Join sequences with labels, in fixation-file order.
  std::vector<std::string> missing;
  for (FixationSequence& seq : sequences) {
    const auto key = std::make_pair(seq.participant_id, seq.stimulus_id);
    auto it = labels.find(key);
    if (it == labels.end())
      throw std::runtime_error(labels_path + ": no label for (" + seq.participant_id + ", " +
                               seq.stimulus_id + ")");
    if (!ds.stimuli.contains(seq.stimulus_id)) missing.push_back(seq.stimulus_id);
    PceSample sample;
    sample.participant_id = seq.participant_id;
    sample.stimulus_id = seq.stimulus_id;
    sample.label = it->second;
    sample.sequence = std::move(seq);
    ds.samples.push_back(std::move(sample));
    labels.erase(it);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw std::runtime_error(stimuli_path + ": missing stimulus ids: " + list);
  }
  if (!labels.empty()) {
    const auto& key = labels.begin()->first;
    throw std::runtime_error(labels_path + ": label without fixation sequence for (" + key.first +
                             ", " + key.second + ")");
  }

  ds.rebuild_vocabs();
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& fixations_path,
                  const std::string& labels_path, const std::string& stimuli_path) {
  {
    std::ofstream out(fixations_path);
    if (!out) throw std::runtime_error("cannot write '" + fixations_path + "'");
    out << "participant_id,stimulus_id,index,aoi,x,y,duration_ms\n";
    for (const PceSample& s : ds.samples)
      for (const Fixation& f : s.sequence.fixations)
        out << s.participant_id << ',' << s.stimulus_id << ',' << f.index << ',' << f.aoi.str()
            << ',' << format_number(f.x) << ',' << format_number(f.y) << ','
            << format_number(f.duration_ms) << '\n';
  }
  {
    std::ofstream out(labels_path);
    if (!out) throw std::runtime_error("cannot write '" + labels_path + "'");
    out << "participant_id,stimulus_id,label\n";
    for (const PceSample& s : ds.samples)
      out << s.participant_id << ',' << s.stimulus_id << ',' << label_name(s.label) << '\n';
  }
  {
    std::ofstream out(stimuli_path);
    if (!out) throw std::runtime_error("cannot write '" + stimuli_path + "'");
    json arr = json::array();
    for (const auto& [id, st] : ds.stimuli) arr.push_back(stimulus_to_json(st));
    out << arr.dump(2) << '\n';
  }
}

std::array<Dataset, 3> stratified_split(const Dataset& ds, std::array<double, 3> fractions,
                                        std::uint64_t seed) {
  double total = 0.0;
  int nonzero = 0;
  for (double f : fractions) {
    if (f < 0.0) throw std::invalid_argument("stratified_split: negative fraction");
    total += f;
    if (f > 0.0) ++nonzero;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("stratified_split: fractions must sum to 1");

  // Sample indices per class.
  std::array<std::vector<std::size_t>, 3> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    by_class[static_cast<int>(ds.samples[i].label)].push_back(i);

  std::array<std::vector<std::size_t>, 3> split_members;  // per split
  for (int c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < static_cast<std::size_t>(nonzero))
      throw std::runtime_error("stratified_split: class '" +
                               std::string(label_name(static_cast<PceLabel>(c))) + "' has " +
                               std::to_string(members.size()) + " samples but " +
                               std::to_string(nonzero) + " splits requested");
    Rng rng = Rng::stream(seed, "split", static_cast<std::uint64_t>(c));
    rng.shuffle(members);

    // Floor allocation, remainder to the largest fractional parts.
    const double n = static_cast<double>(members.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double ideal = n * fractions[s];
      counts[s] = static_cast<std::size_t>(std::floor(ideal));
      remainders[s] = ideal - std::floor(ideal);
      assigned += counts[s];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (std::size_t left = members.size() - assigned, k = 0; left > 0; --left, ++k)
      counts[order[k % 3]]++;

    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[s]; ++k) split_members[s].push_back(members[pos++]);
  }

  std::array<Dataset, 3> out;
  for (int s = 0; s < 3; ++s) {
    std::sort(split_members[s].begin(), split_members[s].end());
    out[s].stimuli = ds.stimuli;
    out[s].aoi_vocab = ds.aoi_vocab;
    out[s].participant_vocab = ds.participant_vocab;
    for (std::size_t idx : split_members[s]) out[s].samples.push_back(ds.samples[idx]);
  }
  return out;
}

}  // namespace pce
