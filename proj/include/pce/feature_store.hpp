#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace pce {

// Frozen symbol -> unit-norm feature vectors (stand-ins for pre-trained text
// and image encoders).  Values are quantized through 32-bit floats so the
// in-memory store and its on-disk round-trip are bit-identical.
class FeatureStore {
 public:
  void put(const std::string& symbol, const std::vector<float>& values);
  bool contains(const std::string& symbol) const { return data_.contains(symbol); }
  Eigen::VectorXd get(const std::string& symbol) const;
  std::size_t dim(const std::string& symbol) const;
  std::size_t size() const { return data_.size(); }
  std::vector<std::string> symbols() const;

  bool operator==(const FeatureStore&) const = default;

  // Flat little-endian float32 binary plus JSON index
  // { "<symbol>": {"offset": <elements>, "dim": <n>}, ... }.
  void save(const std::string& bin_path, const std::string& index_path) const;
  static FeatureStore load(const std::string& bin_path, const std::string& index_path);

 private:
  std::map<std::string, std::vector<float>> data_;
};

}  // namespace pce
