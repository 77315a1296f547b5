#include "pce/gaze_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pce/rng.hpp"

namespace pce {

namespace {

using json = nlohmann::ordered_json;

// Noun pool for region/span labels.  Extended with generated syllable pairs
// so the corpus reaches several hundred distinct AOI labels.
const char* kNouns[] = {
    "wall",    "rock",     "tree",    "house",   "car",     "dog",      "cat",     "bird",
    "river",   "bridge",   "tower",   "window",  "door",    "roof",     "fence",   "garden",
    "flower",  "grass",    "cloud",   "mountain","beach",   "boat",     "ship",    "plane",
    "train",   "bus",      "bike",    "road",    "street",  "lamp",     "sign",    "bench",
    "table",   "chair",    "cup",     "plate",   "bottle",  "glass",    "book",    "phone",
    "clock",   "mirror",   "picture", "shelf",   "box",     "bag",      "hat",     "coat",
    "shoe",    "ball",     "kite",    "horse",   "cow",     "sheep",    "goat",    "pig",
    "duck",    "fish",     "lion",    "tiger",   "bear",    "wolf",     "fox",     "deer",
    "rabbit",  "mouse",    "snake",   "frog",    "spider",  "bee",      "child",   "man",
    "woman",   "person",   "crowd",   "player",  "rider",   "farmer",   "teacher", "doctor",
    "market",  "store",    "school",  "church",  "castle",  "museum",   "station", "airport",
    "harbor",  "field",    "forest",  "lake",    "ocean",   "island",   "desert",  "valley",
    "hill",    "cliff",    "cave",    "path",    "trail",   "stairs",   "gate",    "pool",
    "fountain","statue",   "flag",    "tent",    "fire",    "smoke",    "snow",    "rain",
    "sun",     "moon",     "star",    "sky",     "sand",    "stone",    "brick",   "wood",
    "metal",   "paper",    "rope",    "wheel",   "engine",  "ladder",   "hammer",  "basket",
    "bucket",  "barrel",   "crate",   "wagon",   "tractor", "umbrella", "pillow",  "blanket",
    "curtain", "carpet",   "candle",  "guitar",  "piano",   "drum",     "violin",  "camera",
    "screen",  "keyboard", "wire",    "pipe",    "tile",    "banner",   "poster",  "menu",
};

std::vector<std::string> build_label_pool(std::size_t target) {
  std::vector<std::string> pool(std::begin(kNouns), std::end(kNouns));
  const char* consonants[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  const char* vowels[] = {"a", "e", "i", "o", "u"};
  for (const char* c1 : consonants) {
    for (const char* v1 : vowels) {
      for (const char* c2 : consonants) {
        for (const char* v2 : vowels) {
          if (pool.size() >= target) return pool;
          std::string label = std::string(c1) + v1 + c2 + v2;
          if (std::find(pool.begin(), pool.end(), label) == pool.end())
            pool.push_back(std::move(label));
        }
      }
    }
  }
  return pool;
}

std::string participant_code(Rng& rng) {
  std::string code(4, 'a');
  for (char& c : code) c = static_cast<char>('a' + rng.uniform_below(26));
  return code;
}

struct SynthStimulus {
  Stimulus stimulus;
  double match_fraction = 0.0;                 // regions with a matching caption span
  std::vector<std::string> mentioned_labels;   // labels present in the caption
};

constexpr double kImageW = 800.0;
constexpr double kImageH = 600.0;
constexpr double kCaptionBandH = 60.0;  // fixation band for caption tokens, below the image

SynthStimulus make_stimulus(int index, const std::vector<std::string>& pool, Rng& rng) {
  SynthStimulus out;
  Stimulus& st = out.stimulus;
  char id[16];
  std::snprintf(id, sizeof(id), "stim%04d", index);
  st.stimulus_id = id;
  st.image_w = kImageW;
  st.image_h = kImageH;

  const int n_regions = static_cast<int>(rng.uniform_int(3, 6));
  std::vector<std::string> labels;
  while (static_cast<int>(labels.size()) < n_regions) {
    const std::string& cand = pool[rng.uniform_below(pool.size())];
    if (std::find(labels.begin(), labels.end(), cand) == labels.end()) labels.push_back(cand);
  }
  for (const std::string& label : labels) {
    Region r;
    r.aoi = AoiId::vis(label);
    r.w = std::floor(rng.uniform(80.0, 240.0));
    r.h = std::floor(rng.uniform(80.0, 240.0));
    r.x = std::floor(rng.uniform(0.0, kImageW - r.w));
    r.y = std::floor(rng.uniform(0.0, kImageH - r.h));
    st.regions.push_back(r);
  }

  // The caption mentions a random subset of the region labels (the match
  // fraction drives ground-truth utility) plus up to two distractor labels.
  const int n_mention = static_cast<int>(rng.uniform_int(0, n_regions));
  std::vector<std::string> mention = labels;
  rng.shuffle(mention);
  mention.resize(static_cast<std::size_t>(n_mention));
  const int n_distract = static_cast<int>(rng.uniform_int(0, 2));
  for (int d = 0; d < n_distract; ++d) {
    const std::string& cand = pool[rng.uniform_below(pool.size())];
    if (std::find(labels.begin(), labels.end(), cand) == labels.end() &&
        std::find(mention.begin(), mention.end(), cand) == mention.end())
      mention.push_back(cand);
  }
  out.mentioned_labels = mention;
  out.match_fraction = n_regions == 0 ? 0.0 : static_cast<double>(n_mention) / n_regions;

  const char* fillers[] = {"beside", "under", "near", "with", "behind", "above"};
  std::string caption = "a photo of";
  for (std::size_t i = 0; i < mention.size(); ++i) {
    if (i > 0) {
      caption += ' ';
      caption += fillers[rng.uniform_below(std::size(fillers))];
    }
    caption += ' ';
    CaptionSpan span;
    span.aoi = AoiId::txt(mention[i]);
    span.start = caption.size();
    caption += mention[i];
    span.end = caption.size();
    st.caption_spans.push_back(span);
  }
  if (mention.empty()) caption += " a quiet scene";
  st.caption = caption;
  return out;
}

// --- Label allocation ---------------------------------------------------------

std::array<std::size_t, 3> class_quotas(int n_samples, const std::array<double, 3>& probs) {
  std::array<std::size_t, 3> quotas{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int c = 0; c < 3; ++c) {
    const double ideal = n_samples * probs[c];
    quotas[c] = static_cast<std::size_t>(std::floor(ideal));
    remainders[c] = ideal - std::floor(ideal);
    assigned += quotas[c];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t left = static_cast<std::size_t>(n_samples) - assigned, k = 0; left > 0;
       --left, ++k)
    quotas[order[k % 3]]++;
  return quotas;
}

// Greedy quota-constrained assignment: samples are processed by descending
// confidence margin and take their best class with remaining quota.  Exact
// marginals at every signal strength; at signal 0 utilities are pure noise so
// labels are independent of the (participant, stimulus) structure.
std::vector<PceLabel> allocate_labels(const std::vector<std::array<double, 3>>& utilities,
                                      const std::array<std::size_t, 3>& quotas) {
  const std::size_t n = utilities.size();
  std::vector<std::array<int, 3>> pref(n);
  std::vector<double> margin(n);
  for (std::size_t i = 0; i < n; ++i) {
    pref[i] = {0, 1, 2};
    std::stable_sort(pref[i].begin(), pref[i].end(),
                     [&](int a, int b) { return utilities[i][a] > utilities[i][b]; });
    margin[i] = utilities[i][pref[i][0]] - utilities[i][pref[i][1]];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return margin[a] > margin[b]; });

  std::array<std::size_t, 3> left = quotas;
  std::vector<PceLabel> labels(n, PceLabel::Yes);
  for (std::size_t i : order) {
    for (int choice : pref[i]) {
      if (left[choice] > 0) {
        left[choice]--;
        labels[i] = static_cast<PceLabel>(choice);
        break;
      }
    }
  }
  return labels;
}

// --- Sequence walk --------------------------------------------------------------

struct WalkContext {
  std::vector<AoiId> vis;                 // region AOIs
  std::vector<AoiId> txt;                 // caption-span AOIs (incl. distractors)
  std::vector<int> matched_vis;           // indices into vis with a matching txt label
  double image_h = kImageH;
  const Stimulus* stimulus = nullptr;
};

WalkContext walk_context(const Stimulus& st) {
  WalkContext ctx;
  ctx.stimulus = &st;
  for (const Region& r : st.regions) ctx.vis.push_back(r.aoi);
  for (const CaptionSpan& s : st.caption_spans) ctx.txt.push_back(s.aoi);
  for (std::size_t i = 0; i < ctx.vis.size(); ++i) {
    const std::string label = ctx.vis[i].label();
    for (const AoiId& t : ctx.txt)
      if (t.label() == label) {
        ctx.matched_vis.push_back(static_cast<int>(i));
        break;
      }
  }
  return ctx;
}

std::pair<double, double> fixation_point(const WalkContext& ctx, const AoiId& aoi, Rng& rng) {
  const Stimulus& st = *ctx.stimulus;
  if (aoi.is_off())
    return {rng.uniform(0.0, st.image_w), rng.uniform(0.0, st.image_h + kCaptionBandH)};
  if (aoi.modality() == Modality::Vis) {
    for (const Region& r : st.regions)
      if (r.aoi == aoi) return {rng.uniform(r.x, r.x + r.w), rng.uniform(r.y, r.y + r.h)};
  } else {
    for (std::size_t k = 0; k < st.caption_spans.size(); ++k) {
      if (st.caption_spans[k].aoi != aoi) continue;
      const double slot = st.image_w / static_cast<double>(st.caption_spans.size());
      const double x0 = slot * static_cast<double>(k);
      return {rng.uniform(x0, x0 + slot), rng.uniform(st.image_h, st.image_h + kCaptionBandH)};
    }
  }
  return {rng.uniform(0.0, st.image_w), rng.uniform(0.0, st.image_h)};
}

// Two-state on-AOI/off walk with label-modulated crossmodal and off rates.
// All label-dependent terms scale with signal strength so signal 0 yields
// label-independent sequences.
std::vector<AoiId> walk_sequence(const WalkContext& ctx, const ParticipantProfile& profile,
                                 PceLabel label, double signal, std::size_t length, Rng& rng) {
  const double s = signal;
  double cross = profile.crossmodal_rate;
  double off = profile.off_rate;
  double matched_pref = 0.5;  // probability a crossmodal jump targets the matching label
  switch (label) {
    case PceLabel::Yes:
      cross += 0.35 * s;
      matched_pref += 0.45 * s;
      break;
    case PceLabel::No:
      cross -= 0.20 * s;
      matched_pref -= 0.45 * s;
      break;
    case PceLabel::Unclear:
      off += 0.30 * s;
      break;
  }
  cross = std::clamp(cross, 0.02, 0.95);
  off = std::clamp(off, 0.02, 0.9);
  matched_pref = std::clamp(matched_pref, 0.02, 0.98);

  auto pick = [&](const std::vector<AoiId>& pool) { return pool[rng.uniform_below(pool.size())]; };
  auto matching_in = [&](const std::string& label_str,
                         const std::vector<AoiId>& pool) -> const AoiId* {
    for (const AoiId& a : pool)
      if (a.label() == label_str) return &a;
    return nullptr;
  };

  std::vector<AoiId> seq;
  seq.reserve(length);
  AoiId cur =
      ctx.vis.empty() ? (ctx.txt.empty() ? AoiId::off() : pick(ctx.txt)) : pick(ctx.vis);
  seq.push_back(cur);
  while (seq.size() < length) {
    AoiId next = AoiId::off();
    if (cur.is_off()) {
      if (!ctx.vis.empty() && (ctx.txt.empty() || rng.uniform() < 0.7))
        next = pick(ctx.vis);
      else if (!ctx.txt.empty())
        next = pick(ctx.txt);
    } else if (rng.uniform() < off) {
      next = AoiId::off();
    } else {
      const bool on_vis = cur.modality() == Modality::Vis;
      const std::vector<AoiId>& same = on_vis ? ctx.vis : ctx.txt;
      const std::vector<AoiId>& other = on_vis ? ctx.txt : ctx.vis;
      if (!other.empty() && rng.uniform() < cross) {
        const AoiId* match = matching_in(cur.label(), other);
        if (match && rng.uniform() < matched_pref)
          next = *match;
        else
          next = pick(other);
      } else if (!same.empty()) {
        next = pick(same);
      }
    }
    seq.push_back(next);
    cur = next;
  }
  return seq;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_participants <= 0 || n_stimuli <= 0 || n_samples <= 0)
    throw std::invalid_argument("GeneratorConfig: counts must be positive");
  if (static_cast<long long>(n_samples) >
      static_cast<long long>(n_participants) * n_stimuli)
    throw std::invalid_argument(
        "GeneratorConfig: n_samples exceeds n_participants x n_stimuli (pair uniqueness)");
  if (mean_fixations < 2.0)
    throw std::invalid_argument("GeneratorConfig: mean_fixations must be >= 2");
  double total = 0.0;
  for (double p : class_probs) {
    if (p < 0.0) throw std::invalid_argument("GeneratorConfig: negative class probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("GeneratorConfig: class_probs must sum to 1");
  if (signal_strength < 0.0 || signal_strength > 1.0)
    throw std::invalid_argument("GeneratorConfig: signal_strength must lie in [0,1]");
  if (feature_dim_text <= 0 || feature_dim_image <= 0)
    throw std::invalid_argument("GeneratorConfig: feature dims must be positive");
}

std::string GeneratorConfig::to_json() const {
  json j;
  j["n_participants"] = n_participants;
  j["n_stimuli"] = n_stimuli;
  j["n_samples"] = n_samples;
  j["mean_fixations"] = mean_fixations;
  j["class_probs"] = class_probs;
  j["signal_strength"] = signal_strength;
  j["feature_dim_text"] = feature_dim_text;
  j["feature_dim_image"] = feature_dim_image;
  j["seed"] = seed;
  return j.dump(2);
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  GeneratorConfig cfg;
  if (j.contains("n_participants")) cfg.n_participants = j["n_participants"].get<int>();
  if (j.contains("n_stimuli")) cfg.n_stimuli = j["n_stimuli"].get<int>();
  if (j.contains("n_samples")) cfg.n_samples = j["n_samples"].get<int>();
  if (j.contains("mean_fixations")) cfg.mean_fixations = j["mean_fixations"].get<double>();
  if (j.contains("class_probs")) cfg.class_probs = j["class_probs"].get<std::array<double, 3>>();
  if (j.contains("signal_strength")) cfg.signal_strength = j["signal_strength"].get<double>();
  if (j.contains("feature_dim_text")) cfg.feature_dim_text = j["feature_dim_text"].get<int>();
  if (j.contains("feature_dim_image")) cfg.feature_dim_image = j["feature_dim_image"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

std::vector<ParticipantProfile> participant_profiles(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<ParticipantProfile> profiles;
  std::vector<std::string> used;
  Rng id_rng = Rng::stream(cfg.seed, "participants");
  for (int p = 0; p < cfg.n_participants; ++p) {
    std::string code = participant_code(id_rng);
    while (std::find(used.begin(), used.end(), code) != used.end())
      code = participant_code(id_rng);
    used.push_back(code);

    Rng rng = Rng::stream(cfg.seed, "profile", static_cast<std::uint64_t>(p));
    ParticipantProfile profile;
    profile.participant_id = code;
    for (double& b : profile.label_bias) b = rng.normal(0.0, 0.8);
    profile.crossmodal_rate = rng.uniform(0.15, 0.5);
    profile.off_rate = rng.uniform(0.1, 0.35);
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

Dataset generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const double s = cfg.signal_strength;

  const auto profiles = participant_profiles(cfg);
  const auto pool = build_label_pool(418);

  Rng stim_rng = Rng::stream(cfg.seed, "stimuli");
  std::vector<SynthStimulus> stimuli;
  stimuli.reserve(static_cast<std::size_t>(cfg.n_stimuli));
  for (int i = 0; i < cfg.n_stimuli; ++i) stimuli.push_back(make_stimulus(i, pool, stim_rng));

  // Sample pairs: a seeded subset of the (participant, stimulus) grid.
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg.n_participants) * cfg.n_stimuli);
  for (int p = 0; p < cfg.n_participants; ++p)
    for (int st = 0; st < cfg.n_stimuli; ++st) pairs.emplace_back(p, st);
  Rng pair_rng = Rng::stream(cfg.seed, "pairs");
  pair_rng.shuffle(pairs);
  pairs.resize(static_cast<std::size_t>(cfg.n_samples));
  std::sort(pairs.begin(), pairs.end());

  // Per-sample class utilities: signal term (match fraction + participant
  // bias) scaled by s, noise scaled by (1 - s).
  double mean_mf = 0.0;
  for (const auto& st : stimuli) mean_mf += st.match_fraction;
  mean_mf /= static_cast<double>(stimuli.size());

  std::vector<std::array<double, 3>> utilities(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p, st] = pairs[i];
    const double mf = stimuli[static_cast<std::size_t>(st)].match_fraction - mean_mf;
    const std::array<double, 3> slope{4.0, -4.0, 0.0};
    Rng noise = Rng::stream(cfg.seed, "labels", static_cast<std::uint64_t>(i));
    for (int c = 0; c < 3; ++c)
      utilities[i][c] = s * (slope[c] * mf + profiles[static_cast<std::size_t>(p)].label_bias[c]) +
                        (1.0 - s) * noise.normal(0.0, 1.0);
  }
  const auto labels = allocate_labels(utilities, class_quotas(cfg.n_samples, cfg.class_probs));

  // Sequences.
  const double geo_p = 1.0 / (cfg.mean_fixations - 1.0);
  Dataset ds;
  for (const auto& st : stimuli) ds.stimuli.emplace(st.stimulus.stimulus_id, st.stimulus);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p, sti] = pairs[i];
    const SynthStimulus& st = stimuli[static_cast<std::size_t>(sti)];
    const ParticipantProfile& profile = profiles[static_cast<std::size_t>(p)];
    Rng rng = Rng::stream(cfg.seed, "seq", static_cast<std::uint64_t>(i));

    const std::size_t length = 2 + static_cast<std::size_t>(rng.geometric(geo_p));
    const WalkContext ctx = walk_context(st.stimulus);
    const auto aois = walk_sequence(ctx, profile, labels[i], s, length, rng);

    PceSample sample;
    sample.participant_id = profile.participant_id;
    sample.stimulus_id = st.stimulus.stimulus_id;
    sample.label = labels[i];
    sample.sequence.participant_id = profile.participant_id;
    sample.sequence.stimulus_id = st.stimulus.stimulus_id;
    for (std::size_t k = 0; k < aois.size(); ++k) {
      Fixation f;
      f.index = static_cast<int>(k) + 1;
      f.aoi = aois[k];
      std::tie(f.x, f.y) = fixation_point(ctx, aois[k], rng);
      // Whole-pixel coordinates, centisecond durations: keeps CSV round trips exact.
      f.x = std::round(f.x);
      f.y = std::round(f.y);
      f.duration_ms = std::round(100.0 * 150.0 * std::exp(rng.normal(0.0, 0.35))) / 100.0;
      sample.sequence.fixations.push_back(f);
    }
    ds.samples.push_back(std::move(sample));
  }

  ds.rebuild_vocabs();
  ds.validate();
  return ds;
}

std::vector<CaptionToken> caption_tokens(const Stimulus& st) {
  std::vector<CaptionToken> tokens;
  const std::string& c = st.caption;
  std::size_t i = 0;
  while (i < c.size()) {
    while (i < c.size() && c[i] == ' ') ++i;
    if (i >= c.size()) break;
    std::size_t j = i;
    while (j < c.size() && c[j] != ' ') ++j;
    CaptionToken tok;
    tok.start = i;
    tok.end = j;
    for (const CaptionSpan& span : st.caption_spans) {
      if (span.start <= i && j <= span.end) {
        tok.symbol = span.aoi.str();
        tok.annotated = true;
        break;
      }
    }
    if (!tok.annotated) tok.symbol = "word_" + c.substr(i, j - i);
    tokens.push_back(std::move(tok));
    i = j;
  }
  return tokens;
}

namespace {

// Deterministic unit direction over the leading `prefix` components, shared
// by a label's vis and txt symbols; this is the class-correlated part.
std::vector<double> label_direction(const std::string& label, int prefix) {
  Rng rng(fnv1a64(label) ^ 0x5eedf00dULL);
  std::vector<double> d(static_cast<std::size_t>(prefix));
  double norm2 = 0.0;
  for (double& v : d) {
    v = rng.normal(0.0, 1.0);
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : d) v *= inv;
  return d;
}

std::vector<float> feature_vector(const std::string& symbol, int dim, double signal,
                                  std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "feat", fnv1a64(symbol));
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.normal(0.0, 1.0);
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;

  // AOI symbols get the shared semantic prefix; plain words stay pure noise.
  if (signal > 0.0 && (symbol.starts_with("vis_") || symbol.starts_with("txt_"))) {
    const int prefix = std::min(dim, 256);
    const auto dir = label_direction(symbol.substr(4), prefix);
    for (int i = 0; i < prefix; ++i) v[static_cast<std::size_t>(i)] += 0.75 * signal * dir[i];
  }
  norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  const double inv2 = 1.0 / std::sqrt(norm2);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv2);
  return out;
}

}  // namespace

FeatureStore generate_features(const GeneratorConfig& cfg, const Dataset& ds, std::uint64_t seed) {
  cfg.validate();
  FeatureStore store;
  for (const auto& [id, st] : ds.stimuli) {
    for (const Region& r : st.regions)
      if (!store.contains(r.aoi.str()))
        store.put(r.aoi.str(),
                  feature_vector(r.aoi.str(), cfg.feature_dim_image, cfg.signal_strength, seed));
    for (const CaptionToken& tok : caption_tokens(st))
      if (!store.contains(tok.symbol))
        store.put(tok.symbol,
                  feature_vector(tok.symbol, cfg.feature_dim_text, cfg.signal_strength, seed));
  }
  return store;
}

}  // namespace pce
