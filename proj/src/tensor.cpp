#include "pce/nn/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace pce::nn {

namespace {

thread_local bool g_autograd_enabled = true;

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

void check_finite(const char* op, const Mat& value) {
  if (!value.allFinite())
    throw std::runtime_error(std::string(op) + ": non-finite output (" + shape_str(value) + ")");
}

// Builds the output node.  `inputs` are every tensor the backward rule reads;
// only grad-requiring ones become graph parents.
Tensor make_op(const char* op, Mat value, const std::vector<Tensor>& inputs,
               std::function<void(const Mat&)> backprop) {
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_autograd_enabled) {
    for (const Tensor& t : inputs)
      if (t.requires_grad()) node->parents.push_back(t.node());
    if (!node->parents.empty()) {
      node->requires_grad = true;
      node->backprop = std::move(backprop);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace

bool autograd_enabled() { return g_autograd_enabled; }

AutogradPause::AutogradPause() : previous_(g_autograd_enabled) { g_autograd_enabled = false; }
AutogradPause::~AutogradPause() { g_autograd_enabled = previous_; }

void Node::add_grad(const Mat& g) {
  if (!requires_grad) return;
  if (!grad_alloc) {
    grad = Mat::Zero(value.rows(), value.cols());
    grad_alloc = true;
  }
  if (g.rows() != grad.rows() || g.cols() != grad.cols())
    throw std::logic_error("gradient shape " + shape_str(g) + " does not match value " +
                           shape_str(value) + " (op " + op + ")");
  grad += g;
}

Tensor Tensor::from(Mat value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad && g_autograd_enabled;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad) {
  return from(Mat::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Mat m(1, 1);
  m(0, 0) = value;
  return from(std::move(m), requires_grad);
}

Eigen::Index Tensor::rows() const { return node_->value.rows(); }
Eigen::Index Tensor::cols() const { return node_->value.cols(); }
const Mat& Tensor::value() const { return node_->value; }
Mat& Tensor::value_mut() { return node_->value; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad_alloc; }

const Mat& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("Tensor::grad: no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  node_->grad.resize(0, 0);
  node_->grad_alloc = false;
}

void Tensor::backward() {
  if (!node_) throw std::runtime_error("backward: undefined tensor");
  if (node_->value.size() != 1)
    throw std::runtime_error("backward: root must be 1x1, got " + shape_str(node_->value));
  if (!node_->requires_grad)
    throw std::runtime_error("backward: root does not require grad");

  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : topo)
    if (n->backprop && n->backward_ran)
      throw std::runtime_error("backward: graph already ran backward (op " + n->op + ")");

  node_->add_grad(Mat::Ones(1, 1));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (!n->backprop) continue;
    if (!n->grad_alloc) {
      n->grad = Mat::Zero(n->value.rows(), n->value.cols());
      n->grad_alloc = true;
    }
    n->backprop(n->grad);
    n->backward_ran = true;
  }
}

// --- Ops ---------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  Mat out = a.value() * b.value();
  return make_op("matmul", std::move(out), {a, b}, [a, b](const Mat& g) {
    a.node()->add_grad(g * b.value().transpose());
    b.node()->add_grad(a.value().transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a.value(), b.value());
  return make_op("add", a.value() + b.value(), {a, b}, [a, b](const Mat& g) {
    a.node()->add_grad(g);
    b.node()->add_grad(g);
  });
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    shape_error("add_rowwise", a.value(), bias.value());
  Mat out = a.value().rowwise() + bias.value().row(0);
  return make_op("add_rowwise", std::move(out), {a, bias}, [a, bias](const Mat& g) {
    a.node()->add_grad(g);
    bias.node()->add_grad(g.colwise().sum());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a.value(), b.value());
  Mat out = a.value().cwiseProduct(b.value());
  return make_op("mul", std::move(out), {a, b}, [a, b](const Mat& g) {
    a.node()->add_grad(g.cwiseProduct(b.value()));
    b.node()->add_grad(g.cwiseProduct(a.value()));
  });
}

Tensor scale(const Tensor& a, double c) {
  return make_op("scale", a.value() * c, {a},
                 [a, c](const Mat& g) { a.node()->add_grad(g * c); });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Eigen::Index rows = parts[0].rows(), cols = parts[0].cols();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (axis == 0) {
      if (parts[i].cols() != cols) shape_error("concat", parts[0].value(), parts[i].value());
      rows += parts[i].rows();
    } else {
      if (parts[i].rows() != rows) shape_error("concat", parts[0].value(), parts[i].value());
      cols += parts[i].cols();
    }
  }
  Mat out(axis == 0 ? rows : parts[0].rows(), axis == 1 ? cols : parts[0].cols());
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    if (axis == 0) {
      out.middleRows(at, p.rows()) = p.value();
      at += p.rows();
    } else {
      out.middleCols(at, p.cols()) = p.value();
      at += p.cols();
    }
  }
  return make_op("concat", std::move(out), parts, [parts, axis](const Mat& g) {
    Eigen::Index at = 0;
    for (const Tensor& p : parts) {
      if (axis == 0) {
        p.node()->add_grad(g.middleRows(at, p.rows()));
        at += p.rows();
      } else {
        p.node()->add_grad(g.middleCols(at, p.cols()));
        at += p.cols();
      }
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count <= 0 || start + count > a.rows())
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_str(a.value()));
  Mat out = a.value().middleRows(start, count);
  return make_op("slice_rows", std::move(out), {a}, [a, start, count](const Mat& g) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    a.node()->add_grad(full);
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count <= 0 || start + count > a.cols())
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_str(a.value()));
  Mat out = a.value().middleCols(start, count);
  return make_op("slice_cols", std::move(out), {a}, [a, start, count](const Mat& g) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    a.node()->add_grad(full);
  });
}

Tensor transpose(const Tensor& a) {
  return make_op("transpose", a.value().transpose(), {a},
                 [a](const Mat& g) { a.node()->add_grad(g.transpose()); });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("embedding_lookup: no indices");
  for (int i : indices)
    if (i < 0 || i >= table.rows())
      throw std::invalid_argument("embedding_lookup: index " + std::to_string(i) +
                                  " outside table " + shape_str(table.value()));
  Mat out(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t r = 0; r < indices.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = table.value().row(indices[r]);
  return make_op("embedding_lookup", std::move(out), {table}, [table, indices](const Mat& g) {
    Mat full = Mat::Zero(table.rows(), table.cols());
    for (std::size_t r = 0; r < indices.size(); ++r)
      full.row(indices[r]) += g.row(static_cast<Eigen::Index>(r));
    table.node()->add_grad(full);
  });
}

Tensor sigmoid(const Tensor& a) {
  Mat out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Tensor result = make_op("sigmoid", std::move(out), {a}, nullptr);
  if (result.requires_grad()) {
    const Mat& y = result.value();
    result.node()->backprop = [a, y](const Mat& g) {
      a.node()->add_grad(g.cwiseProduct(y.cwiseProduct(Mat::Ones(y.rows(), y.cols()) - y)));
    };
  }
  return result;
}

Tensor tanh(const Tensor& a) {
  Mat out = a.value().array().tanh().matrix();
  Tensor result = make_op("tanh", std::move(out), {a}, nullptr);
  if (result.requires_grad()) {
    const Mat& y = result.value();
    result.node()->backprop = [a, y](const Mat& g) {
      a.node()->add_grad(g.cwiseProduct(Mat::Ones(y.rows(), y.cols()) - y.cwiseProduct(y)));
    };
  }
  return result;
}

Tensor relu(const Tensor& a) {
  Mat out = a.value().cwiseMax(0.0);
  return make_op("relu", std::move(out), {a}, [a](const Mat& g) {
    a.node()->add_grad(g.cwiseProduct(
        a.value().unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Eigen::Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n) shape_error("layer_norm", x.value(), gain.value());
  if (bias.rows() != 1 || bias.cols() != n) shape_error("layer_norm", x.value(), bias.value());

  Mat mu = x.value().rowwise().mean();  // rows x 1
  Mat centered = x.value().colwise() - mu.col(0);
  Mat var = centered.cwiseProduct(centered).rowwise().mean();
  Mat inv_sigma = (var.array() + eps).rsqrt().matrix();
  Mat xhat = (centered.array().colwise() * inv_sigma.col(0).array()).matrix();
  Mat out = ((xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
             bias.value().row(0).array())
                .matrix();
  return make_op("layer_norm", std::move(out), {x, gain, bias},
                 [x, gain, bias, xhat, inv_sigma, n](const Mat& g) {
                   bias.node()->add_grad(g.colwise().sum());
                   gain.node()->add_grad(g.cwiseProduct(xhat).colwise().sum());
                   if (!x.requires_grad()) return;
                   // dxhat = g * gain; per row r:
                   // dx = inv_sigma/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat .* xhat))
                   Mat dxhat = (g.array().rowwise() * gain.value().row(0).array()).matrix();
                   Mat s1 = dxhat.rowwise().sum();
                   Mat s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
                   Mat dx = static_cast<double>(n) * dxhat;
                   dx.colwise() -= s1.col(0);
                   dx -= (xhat.array().colwise() * s2.col(0).array()).matrix();
                   dx = (dx.array().colwise() * (inv_sigma.col(0).array() / static_cast<double>(n)))
                            .matrix();
                   x.node()->add_grad(dx);
                 });
}

namespace {

Mat softmax_forward(const Mat& z) {
  Mat shifted = z.colwise() - z.rowwise().maxCoeff();
  Mat ex = shifted.array().exp().matrix();
  Mat sums = ex.rowwise().sum();
  return (ex.array().colwise() / sums.col(0).array()).matrix();
}

// Shared softmax backward: dz = y .* (g - rowwise_sum(g .* y)).
Mat softmax_backward(const Mat& y, const Mat& g) {
  Mat dot = g.cwiseProduct(y).rowwise().sum();
  Mat dz = g;
  dz.colwise() -= dot.col(0);
  return dz.cwiseProduct(y);
}

}  // namespace

Tensor softmax_rows(const Tensor& logits, const Tensor& bias) {
  if (logits.rows() != bias.rows() || logits.cols() != bias.cols())
    shape_error("softmax_rows", logits.value(), bias.value());
  Mat y = softmax_forward(logits.value() + bias.value());
  Tensor result = make_op("softmax_rows", std::move(y), {logits, bias}, nullptr);
  if (result.requires_grad()) {
    const Mat& out = result.value();
    result.node()->backprop = [logits, bias, out](const Mat& g) {
      Mat dz = softmax_backward(out, g);
      logits.node()->add_grad(dz);
      bias.node()->add_grad(dz);
    };
  }
  return result;
}

Tensor softmax_rows(const Tensor& logits) {
  Mat y = softmax_forward(logits.value());
  Tensor result = make_op("softmax_rows", std::move(y), {logits}, nullptr);
  if (result.requires_grad()) {
    const Mat& out = result.value();
    result.node()->backprop = [logits, out](const Mat& g) {
      logits.node()->add_grad(softmax_backward(out, g));
    };
  }
  return result;
}

Tensor cross_entropy(const Tensor& input, int target, bool from_logits) {
  if (input.rows() != 1)
    throw std::invalid_argument("cross_entropy: expected a 1xK row, got " +
                                shape_str(input.value()));
  if (target < 0 || target >= input.cols())
    throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                " outside 1x" + std::to_string(input.cols()));
  if (from_logits) {
    const Mat& z = input.value();
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    Mat loss(1, 1);
    loss(0, 0) = lse - z(0, target);
    Mat probs = (z.array() - lse).exp().matrix();
    return make_op("cross_entropy", std::move(loss), {input}, [input, probs, target](const Mat& g) {
      Mat dz = probs * g(0, 0);
      dz(0, target) -= g(0, 0);
      input.node()->add_grad(dz);
    });
  }
  const double p = input.value()(0, target);
  Mat loss(1, 1);
  loss(0, 0) = -std::log(p);
  return make_op("cross_entropy", std::move(loss), {input}, [input, target, p](const Mat& g) {
    Mat dz = Mat::Zero(1, input.cols());
    dz(0, target) = -g(0, 0) / p;
    input.node()->add_grad(dz);
  });
}

Tensor mean(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().mean();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  return make_op("mean", std::move(out), {a}, [a, inv_n](const Mat& g) {
    a.node()->add_grad(Mat::Constant(a.rows(), a.cols(), g(0, 0) * inv_n));
  });
}

Tensor sum(const Tensor& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op("sum", std::move(out), {a}, [a](const Mat& g) {
    a.node()->add_grad(Mat::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

}  // namespace pce::nn
