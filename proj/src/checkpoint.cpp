#include "pce/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pce::nn {

namespace {

using json = nlohmann::ordered_json;

void write_le_doubles(std::ofstream& out, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(m(r, c));
      char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(buf, 8);
    }
  }
}

double read_le_double(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw std::runtime_error("checkpoint: truncated binary");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const Mat& Checkpoint::param(const std::string& name) const {
  for (const auto& [n, m] : params)
    if (n == name) return m;
  throw std::runtime_error("checkpoint: no parameter '" + name + "'");
}

void save_checkpoint(const std::string& prefix,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     std::uint64_t seed, const std::string& config_json) {
  json manifest;
  manifest["format"] = "pce-checkpoint-v1";
  manifest["seed"] = seed;
  manifest["config"] = json::parse(config_json);
  manifest["params"] = json::array();

  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write '" + prefix + ".bin'");
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    manifest["params"].push_back({{"name", name},
                                  {"rows", t.rows()},
                                  {"cols", t.cols()},
                                  {"offset", offset}});
    write_le_doubles(bin, t.value());
    offset += static_cast<std::uint64_t>(t.size());
  }
  bin.close();

  std::ofstream out(prefix + ".json");
  if (!out) throw std::runtime_error("cannot write '" + prefix + ".json'");
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw std::runtime_error("cannot open '" + prefix + ".json'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error(prefix + ".json: " + e.what());
  }
  if (manifest.at("format").get<std::string>() != "pce-checkpoint-v1")
    throw std::runtime_error(prefix + ".json: unknown checkpoint format");

  Checkpoint ckpt;
  ckpt.seed = manifest.at("seed").get<std::uint64_t>();
  ckpt.config_json = manifest.at("config").dump();

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open '" + prefix + ".bin'");
  for (const auto& p : manifest.at("params")) {
    const auto name = p.at("name").get<std::string>();
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_le_double(bin);
    ckpt.params.emplace_back(name, std::move(m));
  }
  return ckpt;
}

}  // namespace pce::nn
