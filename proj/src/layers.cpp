#include "pce/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace pce::nn {

Tensor uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return Tensor::from(std::move(m), true);
}

void Linear::init(Eigen::Index in, Eigen::Index out, Rng& rng) {
  w = uniform_init(in, out, in, rng);
  b = uniform_init(1, out, in, rng);
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

void LayerNormParams::init(Eigen::Index d) {
  gain = Tensor::from(Mat::Ones(1, d), true);
  bias = Tensor::zeros(1, d, true);
}

void LayerNormParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

void LstmCellParams::init(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  w_ih = uniform_init(input, 4 * hidden, input, rng);
  w_hh = uniform_init(hidden, 4 * hidden, hidden, rng);
  b = uniform_init(1, 4 * hidden, hidden, rng);
}

void LstmCellParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".w_ih", w_ih);
  out.emplace_back(prefix + ".w_hh", w_hh);
  out.emplace_back(prefix + ".b", b);
}

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmCellParams& params) {
  const Eigen::Index hidden = params.hidden_dim();
  if (x.rows() != 1 || x.cols() != params.w_ih.rows())
    throw std::invalid_argument("lstm_cell: input is " + std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()) + ", expected 1x" +
                                std::to_string(params.w_ih.rows()));
  if (prev.h.cols() != hidden || prev.c.cols() != hidden)
    throw std::invalid_argument("lstm_cell: state dim mismatch");

  Tensor gates = add_rowwise(add(matmul(x, params.w_ih), matmul(prev.h, params.w_hh)), params.b);
  Tensor i = sigmoid(slice_cols(gates, 0, hidden));
  Tensor f = sigmoid(slice_cols(gates, hidden, hidden));
  Tensor g = tanh(slice_cols(gates, 2 * hidden, hidden));
  Tensor o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  LstmState next;
  next.c = add(mul(f, prev.c), mul(i, g));
  next.h = mul(o, tanh(next.c));
  return next;
}

void MultiHeadAttention::init(Eigen::Index d, int heads, Rng& rng) {
  if (heads <= 0 || d % heads != 0)
    throw std::invalid_argument("MultiHeadAttention: d=" + std::to_string(d) +
                                " not divisible by n_heads=" + std::to_string(heads));
  n_heads = heads;
  q.init(d, d, rng);
  k.init(d, d, rng);
  v.init(d, d, rng);
  out.init(d, d, rng);
}

Tensor MultiHeadAttention::apply(const Tensor& x, const Tensor& bias,
                                 std::vector<Mat>* trace) const {
  const Eigen::Index seq = x.rows();
  const Eigen::Index d = x.cols();
  if (bias.rows() != seq || bias.cols() != seq)
    throw std::invalid_argument("MultiHeadAttention: bias is " + std::to_string(bias.rows()) +
                                "x" + std::to_string(bias.cols()) + ", expected " +
                                std::to_string(seq) + "x" + std::to_string(seq));
  const Eigen::Index dh = d / n_heads;
  Tensor qp = q.apply(x), kp = k.apply(x), vp = v.apply(x);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(qp, h * dh, dh);
    Tensor kh = slice_cols(kp, h * dh, dh);
    Tensor vh = slice_cols(vp, h * dh, dh);
    Tensor logits = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor probs = softmax_rows(logits, bias);
    if (trace) trace->push_back(probs.value());
    heads.push_back(matmul(probs, vh));
  }
  return out.apply(concat(heads, 1));
}

void MultiHeadAttention::collect(const std::string& prefix, NamedParams& out_params) const {
  q.collect(prefix + ".q", out_params);
  k.collect(prefix + ".k", out_params);
  v.collect(prefix + ".v", out_params);
  out.collect(prefix + ".out", out_params);
}

void EncoderLayer::init(Eigen::Index d, int heads, Eigen::Index ff_dim, Rng& rng) {
  attn.init(d, heads, rng);
  norm1.init(d);
  norm2.init(d);
  ff1.init(d, ff_dim, rng);
  ff2.init(ff_dim, d, rng);
}

Tensor EncoderLayer::apply(const Tensor& x, const Tensor& bias, std::vector<Mat>* trace) const {
  Tensor attended = norm1.apply(add(x, attn.apply(x, bias, trace)));
  Tensor ff = ff2.apply(relu(ff1.apply(attended)));
  return norm2.apply(add(attended, ff));
}

void EncoderLayer::collect(const std::string& prefix, NamedParams& out) const {
  attn.collect(prefix + ".attn", out);
  norm1.collect(prefix + ".norm1", out);
  norm2.collect(prefix + ".norm2", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
}

Mat positional_encoding(Eigen::Index seq_len, Eigen::Index d) {
  Mat pe(seq_len, d);
  for (Eigen::Index pos = 0; pos < seq_len; ++pos) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace pce::nn
