#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pce {

enum class Modality { Vis, Txt, Off };

// Symbolic area-of-interest identifier. Canonical form is
// "<modality>_<label>" with modality "vis" or "txt", plus the reserved
// symbol "off" for fixations that land outside every annotated region.
class AoiId {
public:
  AoiId() : symbol_("off") {}
  // Requires canonical form; throws std::invalid_argument otherwise.
  explicit AoiId(std::string canonical);

  static AoiId off() { return AoiId(); }
  static AoiId vis(std::string_view label);
  static AoiId txt(std::string_view label);

  // Accepts prefix and suffix spellings ("vis_wall", "wall_vis", "wall_text",
  // "wall_txt"), lowercases, and maps empty or unrecognized symbols to "off".
  static AoiId normalize(std::string_view raw);

  const std::string& str() const { return symbol_; }
  Modality modality() const;
  std::string label() const;  // part without the modality tag; "" for off
  bool is_off() const { return symbol_ == "off"; }

  bool operator==(const AoiId&) const = default;
  auto operator<=>(const AoiId&) const = default;

private:
  std::string symbol_;
};

struct AoiIdHash {
  std::size_t operator()(const AoiId& a) const { return std::hash<std::string>{}(a.str()); }
};

struct Fixation {
  int index = 0;  // 1-based ordinal within its sequence
  AoiId aoi;
  double x = 0.0;
  double y = 0.0;
  double duration_ms = 0.0;

  bool operator==(const Fixation&) const = default;
};

struct FixationSequence {
  std::string participant_id;
  std::string stimulus_id;
  std::vector<Fixation> fixations;

  // Throws unless non-empty with indices exactly 1..n and valid values.
  void validate() const;

  bool operator==(const FixationSequence&) const = default;
};

enum class PceLabel : int { Yes = 0, No = 1, Unclear = 2 };

constexpr int kNumClasses = 3;

std::string_view label_name(PceLabel label);
PceLabel label_from_string(std::string_view s);  // throws on unknown

struct Region {
  AoiId aoi;  // vis modality
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  bool operator==(const Region&) const = default;
};

struct CaptionSpan {
  AoiId aoi;  // txt modality
  std::size_t start = 0;  // character range [start, end) into the caption
  std::size_t end = 0;

  bool operator==(const CaptionSpan&) const = default;
};

struct Stimulus {
  std::string stimulus_id;
  std::string caption;
  double image_w = 0.0;
  double image_h = 0.0;
  std::vector<Region> regions;
  std::vector<CaptionSpan> caption_spans;

  void validate() const;

  bool operator==(const Stimulus&) const = default;
};

struct PceSample {
  std::string participant_id;
  std::string stimulus_id;
  FixationSequence sequence;
  PceLabel label = PceLabel::Yes;

  bool operator==(const PceSample&) const = default;
};

// Bijection symbol <-> dense index, in first-occurrence order.
class Vocab {
public:
  int add(const std::string& symbol);
  std::optional<int> find(const std::string& symbol) const;
  int index_of(const std::string& symbol) const;  // throws on unknown
  const std::string& symbol(int index) const;
  const std::vector<std::string>& symbols() const { return symbols_; }
  int size() const { return static_cast<int>(symbols_.size()); }

  bool operator==(const Vocab& other) const { return symbols_ == other.symbols_; }

private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

struct Dataset {
  std::vector<PceSample> samples;
  std::map<std::string, Stimulus> stimuli;
  Vocab aoi_vocab;          // over canonical AOI symbols seen in sample sequences
  Vocab participant_vocab;  // over participant ids seen in samples

  // Rebuilds both vocabularies by scanning samples in order.
  void rebuild_vocabs();
  // Throws on broken invariants: duplicate (participant, stimulus) pairs,
  // dangling stimulus ids, id mismatches, vocabulary gaps.
  void validate() const;

  const Stimulus& stimulus(const std::string& id) const;
  std::array<std::size_t, 3> class_counts() const;

  bool operator==(const Dataset&) const = default;
};

// File formats:
//   fixations CSV: participant_id,stimulus_id,index,aoi,x,y,duration_ms
//   labels CSV:    participant_id,stimulus_id,label   (yes|no|unclear)
//   stimuli JSON:  [{stimulus_id, caption, image_w, image_h,
//                    regions:[{aoi,x,y,w,h}], caption_spans:[{aoi,start,end}]}]
Dataset load_dataset(const std::string& fixations_path, const std::string& labels_path,
                     const std::string& stimuli_path);
void save_dataset(const Dataset& ds, const std::string& fixations_path,
                  const std::string& labels_path, const std::string& stimuli_path);

// Class-stratified partition with floor/largest-remainder allocation per
// class. Deterministic for a given seed; every sample lands in exactly one
// split. Splits share the parent's vocabularies and stimuli so sequence and
// participant indices stay aligned across them.
std::array<Dataset, 3> stratified_split(const Dataset& ds, std::array<double, 3> fractions,
                                        std::uint64_t seed);

}  // namespace pce
