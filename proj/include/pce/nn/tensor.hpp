#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pce::nn {

// Dense row-major 64-bit storage for all tensor values and gradients.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;

// Value-semantic handle onto a node of the autodiff graph.  Ops build fresh
// nodes that remember their parents and a backward rule; Tensor::backward()
// on a 1x1 result runs reverse-mode accumulation.  A graph supports a single
// backward pass; leaf gradients accumulate across graphs until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Mat value, bool requires_grad = false);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::Index size() const { return rows() * cols(); }

  const Mat& value() const;
  Mat& value_mut();  // in-place edits (optimizer steps, finite differences)
  bool requires_grad() const;
  bool has_grad() const;
  const Mat& grad() const;  // throws when no gradient has been accumulated
  void zero_grad();

  // Reverse-mode accumulation from this 1x1 node.  Throws if the node is not
  // scalar or if any non-leaf node of the graph already ran backward.
  void backward();

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  bool backward_ran = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;  // only parents that require grad
  std::function<void(const Mat& out_grad)> backprop;

  void add_grad(const Mat& g);
};

// While a pause is alive, ops compute values only: no parents are recorded
// and outputs never require grad.  Scoped per thread.
class AutogradPause {
 public:
  AutogradPause();
  ~AutogradPause();
  AutogradPause(const AutogradPause&) = delete;
  AutogradPause& operator=(const AutogradPause&) = delete;

 private:
  bool previous_;
};

bool autograd_enabled();

// --- Core ops ---------------------------------------------------------------
// All ops validate shapes (errors name the op and offending shapes) and check
// outputs for non-finite values.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor add_rowwise(const Tensor& a, const Tensor& bias);   // bias is 1 x cols
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise
Tensor scale(const Tensor& a, double c);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // 0 = rows, 1 = cols
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor transpose(const Tensor& a);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
// Row-wise normalization with learned gain/bias (both 1 x cols).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Softmax over each row of logits + bias (elementwise addition before
// normalization).  bias must match logits' shape.
Tensor softmax_rows(const Tensor& logits, const Tensor& bias);
Tensor softmax_rows(const Tensor& logits);
// Negative log-likelihood of `target` under a 1 x K row.  With `from_logits`
// the row is log-softmax-normalized internally (numerically stable path);
// otherwise it is taken as probabilities.
Tensor cross_entropy(const Tensor& input, int target, bool from_logits);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);

}  // namespace pce::nn
