#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pce/core_data.hpp"
#include "pce/nn/tensor.hpp"

namespace pce {

// Order-preserving dense AOI indices for a fixation sequence; throws on AOIs
// missing from the vocabulary or on an empty sequence.
std::vector<int> encode_sequence(const FixationSequence& seq, const Vocab& vocab);
std::vector<AoiId> decode_sequence(const std::vector<int>& indices, const Vocab& vocab);

// Binary successor matrix over the AOIs of one stimulus exposure.  Row/column
// order is first appearance in the sequence.  With `counted` the entries hold
// occurrence counts instead of 0/1 (experimental; default off).
struct TransitionMatrix {
  std::vector<AoiId> aoi_order;
  nn::Mat m;  // square, |aoi_order| x |aoi_order|

  int index_of(const AoiId& aoi) const;  // -1 when absent
};

TransitionMatrix transition_matrix(const FixationSequence& seq, bool counted = false);

// Amplify(M, lambda) = lambda * (M + M^T); entries of a binary M land in
// {0, lambda, 2*lambda}.
struct AmplifiedMatrix {
  std::vector<AoiId> aoi_order;
  nn::Mat m;
};

AmplifiedMatrix amplify(const TransitionMatrix& t, double lambda);

// Per transformer input position: the AoiId it carries, or none (the
// classification token, unannotated caption tokens).
using TokenAoiMap = std::vector<std::optional<AoiId>>;

// Projects an AOI-level amplified matrix onto token positions:
// bias[i][j] = amplified[aoi(i)][aoi(j)] when both are mapped, else 0.
// Throws when the map names an AoiId absent from the amplified ordering.
nn::Mat token_bias(const AmplifiedMatrix& amplified, const TokenAoiMap& map);

// Debug CSV dump with AOI-symbol headers.
std::string matrix_csv(const std::vector<AoiId>& order, const nn::Mat& m);

}  // namespace pce
