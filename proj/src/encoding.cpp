#include "pce/encoding.hpp"

#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace pce {

std::vector<int> encode_sequence(const FixationSequence& seq, const Vocab& vocab) {
  if (seq.fixations.empty()) throw std::invalid_argument("encode_sequence: empty sequence");
  std::vector<int> out;
  out.reserve(seq.fixations.size());
  for (const Fixation& f : seq.fixations) {
    auto idx = vocab.find(f.aoi.str());
    if (!idx)
      throw std::runtime_error("encode_sequence: AOI '" + f.aoi.str() + "' not in vocabulary");
    out.push_back(*idx);
  }
  return out;
}

std::vector<AoiId> decode_sequence(const std::vector<int>& indices, const Vocab& vocab) {
  std::vector<AoiId> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(AoiId(vocab.symbol(i)));
  return out;
}

int TransitionMatrix::index_of(const AoiId& aoi) const {
  for (std::size_t i = 0; i < aoi_order.size(); ++i)
    if (aoi_order[i] == aoi) return static_cast<int>(i);
  return -1;
}

TransitionMatrix transition_matrix(const FixationSequence& seq, bool counted) {
  if (seq.fixations.empty()) throw std::invalid_argument("transition_matrix: empty sequence");
  TransitionMatrix t;
  std::unordered_map<std::string, int> index;
  std::vector<int> path;
  path.reserve(seq.fixations.size());
  for (const Fixation& f : seq.fixations) {
    auto [it, inserted] = index.emplace(f.aoi.str(), static_cast<int>(t.aoi_order.size()));
    if (inserted) t.aoi_order.push_back(f.aoi);
    path.push_back(it->second);
  }
  const auto n = static_cast<Eigen::Index>(t.aoi_order.size());
  t.m = nn::Mat::Zero(n, n);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (counted)
      t.m(path[i], path[i + 1]) += 1.0;
    else
      t.m(path[i], path[i + 1]) = 1.0;
  }
  return t;
}

AmplifiedMatrix amplify(const TransitionMatrix& t, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("amplify: negative lambda");
  AmplifiedMatrix a;
  a.aoi_order = t.aoi_order;
  a.m = lambda * (t.m + t.m.transpose());
  return a;
}

nn::Mat token_bias(const AmplifiedMatrix& amplified, const TokenAoiMap& map) {
  const auto seq = static_cast<Eigen::Index>(map.size());
  std::vector<int> aoi_of(map.size(), -1);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map[i]) continue;
    int idx = -1;
    for (std::size_t k = 0; k < amplified.aoi_order.size(); ++k)
      if (amplified.aoi_order[k] == *map[i]) {
        idx = static_cast<int>(k);
        break;
      }
    if (idx < 0)
      throw std::runtime_error("token_bias: AOI '" + map[i]->str() +
                               "' not in amplified matrix order");
    aoi_of[i] = idx;
  }
  nn::Mat bias = nn::Mat::Zero(seq, seq);
  for (Eigen::Index i = 0; i < seq; ++i) {
    if (aoi_of[i] < 0) continue;
    for (Eigen::Index j = 0; j < seq; ++j)
      if (aoi_of[j] >= 0) bias(i, j) = amplified.m(aoi_of[i], aoi_of[j]);
  }
  return bias;
}

std::string matrix_csv(const std::vector<AoiId>& order, const nn::Mat& m) {
  std::string out = "aoi";
  for (const AoiId& a : order) out += "," + a.str();
  out += '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += order[static_cast<std::size_t>(r)].str();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.10g", m(r, c));
      out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace pce
