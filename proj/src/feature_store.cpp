#include "pce/feature_store.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pce {

namespace {
using json = nlohmann::json;  // sorted keys, matching std::map iteration
}

void FeatureStore::put(const std::string& symbol, const std::vector<float>& values) {
  if (values.empty()) throw std::invalid_argument("FeatureStore: empty vector for '" + symbol + "'");
  data_[symbol] = values;
}

Eigen::VectorXd FeatureStore::get(const std::string& symbol) const {
  auto it = data_.find(symbol);
  if (it == data_.end()) throw std::runtime_error("FeatureStore: no symbol '" + symbol + "'");
  Eigen::VectorXd v(static_cast<Eigen::Index>(it->second.size()));
  for (std::size_t i = 0; i < it->second.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = static_cast<double>(it->second[i]);
  return v;
}

std::size_t FeatureStore::dim(const std::string& symbol) const {
  auto it = data_.find(symbol);
  if (it == data_.end()) throw std::runtime_error("FeatureStore: no symbol '" + symbol + "'");
  return it->second.size();
}

std::vector<std::string> FeatureStore::symbols() const {
  std::vector<std::string> out;
  out.reserve(data_.size());
  for (const auto& [sym, _] : data_) out.push_back(sym);
  return out;
}

void FeatureStore::save(const std::string& bin_path, const std::string& index_path) const {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write '" + bin_path + "'");
  json index = json::object();
  std::uint64_t offset = 0;
  for (const auto& [sym, values] : data_) {
    index[sym] = {{"offset", offset}, {"dim", values.size()}};
    for (float f : values) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      char buf[4];
      for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      bin.write(buf, 4);
    }
    offset += values.size();
  }
  bin.close();

  std::ofstream out(index_path);
  if (!out) throw std::runtime_error("cannot write '" + index_path + "'");
  out << index.dump(2) << '\n';
}

FeatureStore FeatureStore::load(const std::string& bin_path, const std::string& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open '" + index_path + "'");
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw std::runtime_error(index_path + ": " + e.what());
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open '" + bin_path + "'");
  FeatureStore store;
  for (const auto& [sym, entry] : index.items()) {
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto dim = entry.at("dim").get<std::size_t>();
    bin.seekg(static_cast<std::streamoff>(offset * 4));
    std::vector<float> values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      char buf[4];
      bin.read(buf, 4);
      if (!bin) throw std::runtime_error(bin_path + ": truncated at symbol '" + sym + "'");
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[k])) << (8 * k);
      values[i] = std::bit_cast<float>(bits);
    }
    store.data_[sym] = std::move(values);
  }
  return store;
}

}  // namespace pce
