#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pce/nn/tensor.hpp"
#include "pce/rng.hpp"

namespace pce::nn {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) parameter initialization.
Tensor uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  void init(Eigen::Index in, Eigen::Index out, Rng& rng);
  Tensor apply(const Tensor& x) const { return add_rowwise(matmul(x, w), b); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNormParams {
  Tensor gain;  // 1 x d
  Tensor bias;  // 1 x d

  void init(Eigen::Index d);
  Tensor apply(const Tensor& x) const { return layer_norm(x, gain, bias); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Single LSTM cell.  Gate weights are packed column-wise in the order
// [input, forget, candidate, output], each block `hidden` wide.
struct LstmCellParams {
  Tensor w_ih;  // input x 4*hidden
  Tensor w_hh;  // hidden x 4*hidden
  Tensor b;     // 1 x 4*hidden

  void init(Eigen::Index input, Eigen::Index hidden, Rng& rng);
  Eigen::Index hidden_dim() const { return w_hh.rows(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LstmState {
  Tensor h;  // 1 x hidden
  Tensor c;  // 1 x hidden
};

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmCellParams& params);

struct MultiHeadAttention {
  int n_heads = 1;
  Linear q, k, v, out;

  void init(Eigen::Index d, int heads, Rng& rng);
  // x: seq x d; bias: seq x seq added to the scaled logits of every head.
  // When `trace` is given, each head's post-softmax attention matrix is
  // appended to it.
  Tensor apply(const Tensor& x, const Tensor& bias, std::vector<Mat>* trace = nullptr) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Post-norm encoder block: attention -> add&norm -> FF(ReLU) -> add&norm.
struct EncoderLayer {
  MultiHeadAttention attn;
  LayerNormParams norm1, norm2;
  Linear ff1, ff2;

  void init(Eigen::Index d, int heads, Eigen::Index ff_dim, Rng& rng);
  Tensor apply(const Tensor& x, const Tensor& bias, std::vector<Mat>* trace = nullptr) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Sinusoidal position encodings, seq x d.
Mat positional_encoding(Eigen::Index seq_len, Eigen::Index d);

}  // namespace pce::nn
