#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pce/nn/tensor.hpp"

namespace pce::nn {

struct Checkpoint {
  std::vector<std::pair<std::string, Mat>> params;
  std::uint64_t seed = 0;
  std::string config_json = "{}";

  const Mat& param(const std::string& name) const;
};

// Writes <prefix>.json (manifest: names, shapes, offsets, seed, config) and
// <prefix>.bin (flat little-endian 64-bit floats in manifest order).
void save_checkpoint(const std::string& prefix,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     std::uint64_t seed, const std::string& config_json = "{}");

Checkpoint load_checkpoint(const std::string& prefix);

}  // namespace pce::nn
