#include "pce/nn/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace pce::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined()) throw std::invalid_argument("AdamW: undefined parameter");
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    Mat g = p.has_grad() ? p.grad() : Mat::Zero(p.rows(), p.cols());
    if (!g.allFinite()) throw std::runtime_error("AdamW: non-finite gradient");
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    Mat& value = p.value_mut();
    value -= config_.lr * (m_hat.array() / (v_hat.array().sqrt() + config_.eps)).matrix();
    value -= config_.lr * config_.weight_decay * value;
  }
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace pce::nn
