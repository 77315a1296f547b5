#pragma once

#include <vector>

#include "pce/nn/tensor.hpp"

namespace pce::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay: p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  // One update over all parameters.  Parameters without an accumulated
  // gradient are treated as having zero gradient (decay still applies).
  void step();
  void zero_grad();
  void set_lr(double lr) { config_.lr = lr; }
  long step_count() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Mat> m_, v_;
  AdamWConfig config_;
  long t_ = 0;
};

}  // namespace pce::nn
