#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "pce/nn/adamw.hpp"
#include "pce/nn/checkpoint.hpp"
#include "pce/nn/layers.hpp"
#include "pce/rng.hpp"

using namespace pce::nn;
using pce::Rng;

namespace {

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("uniform_init respects the fan-in bound and the seed") {
  Rng rng1 = Rng::stream(5, "init", 0);
  Rng rng2 = Rng::stream(5, "init", 0);
  const Tensor a = uniform_init(40, 30, 25, rng1);
  const Tensor b = uniform_init(40, 30, 25, rng2);
  CHECK(a.value() == b.value());
  CHECK(a.value().cwiseAbs().maxCoeff() <= 1.0 / 5.0);
  CHECK(a.value().cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.requires_grad());
}

TEST_CASE("lstm_cell with zero weights keeps a zero state") {
  LstmCellParams params;
  Rng rng = Rng::stream(1, "cell", 0);
  params.init(4, 3, rng);
  params.w_ih.value_mut().setZero();
  params.w_hh.value_mut().setZero();
  params.b.value_mut().setZero();
  LstmState state{Tensor::zeros(1, 3), Tensor::zeros(1, 3)};
  const Tensor x = Tensor::from(random_mat(1, 4, rng));
  state = lstm_cell(x, state, params);
  // i=f=o=sigmoid(0)=0.5, g=tanh(0)=0: c = 0.5*0 + 0.5*0 = 0, h = 0.5*tanh(0).
  CHECK(state.c.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.h.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm_cell matches a scalar hand computation") {
  // 1-dim input, 1-dim hidden, all weights fixed to known values.
  LstmCellParams params;
  Rng rng = Rng::stream(2, "cell", 0);
  params.init(1, 1, rng);
  params.w_ih.value_mut() << 0.5, -0.5, 1.0, 0.25;  // [i, f, g, o]
  params.w_hh.value_mut() << 0.1, 0.2, 0.3, 0.4;
  params.b.value_mut() << 0.0, 0.1, -0.1, 0.2;
  LstmState state{Tensor::from(Mat::Constant(1, 1, 0.3)), Tensor::from(Mat::Constant(1, 1, -0.2))};
  const Tensor x = Tensor::from(Mat::Constant(1, 1, 0.8));

  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(0.8 * 0.5 + 0.3 * 0.1 + 0.0);
  const double f = sig(0.8 * -0.5 + 0.3 * 0.2 + 0.1);
  const double g = std::tanh(0.8 * 1.0 + 0.3 * 0.3 + -0.1);
  const double o = sig(0.8 * 0.25 + 0.3 * 0.4 + 0.2);
  const double c = f * -0.2 + i * g;
  const double h = o * std::tanh(c);

  const LstmState next = lstm_cell(x, state, params);
  CHECK(next.c.value()(0, 0) == doctest::Approx(c).epsilon(1e-12));
  CHECK(next.h.value()(0, 0) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("attention rows are distributions and the bias shifts them") {
  Rng rng = Rng::stream(3, "mha", 0);
  MultiHeadAttention mha;
  mha.init(8, 2, rng);
  const Tensor x = Tensor::from(random_mat(5, 8, rng));
  std::vector<Mat> trace;
  const Tensor out = mha.apply(x, Tensor::from(Mat::Zero(5, 5)), &trace);
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 8);
  REQUIRE(trace.size() == 2);
  for (const Mat& head : trace)
    for (Eigen::Index r = 0; r < head.rows(); ++r)
      CHECK(head.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));

  // A strong bias toward column 0 concentrates every head there.
  Mat bias = Mat::Zero(5, 5);
  bias.col(0).array() = 50.0;
  std::vector<Mat> biased;
  mha.apply(x, Tensor::from(bias), &biased);
  for (const Mat& head : biased)
    for (Eigen::Index r = 0; r < head.rows(); ++r) CHECK(head(r, 0) > 0.99);
}

TEST_CASE("MultiHeadAttention::init rejects indivisible head counts") {
  Rng rng = Rng::stream(4, "mha", 0);
  MultiHeadAttention mha;
  CHECK_THROWS_AS(mha.init(10, 3, rng), std::invalid_argument);
}

TEST_CASE("encoder layer preserves shape and collects distinct parameters") {
  Rng rng = Rng::stream(5, "enc", 0);
  EncoderLayer layer;
  layer.init(8, 2, 16, rng);
  const Tensor x = Tensor::from(random_mat(4, 8, rng));
  const Tensor y = layer.apply(x, Tensor::from(Mat::Zero(4, 4)));
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 8);

  NamedParams params;
  layer.collect("enc", params);
  CHECK(params.size() == 16);  // attn 4x(w,b) + two norms (gain,bias) + ff 2x(w,b)
  std::set<std::string> names;
  for (const auto& [name, t] : params) names.insert(name);
  CHECK(names.size() == params.size());
  CHECK(names.count("enc.attn.q.w") == 1);
  CHECK(names.count("enc.norm2.gain") == 1);
  CHECK(names.count("enc.ff2.b") == 1);
}

TEST_CASE("positional encoding follows the sinusoidal definition") {
  const Mat pe = positional_encoding(10, 6);
  CHECK(pe.rows() == 10);
  CHECK(pe.cols() == 6);
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == 1.0);
  const double freq = std::pow(10000.0, -2.0 / 6.0);
  CHECK(pe(3, 2) == doctest::Approx(std::sin(3.0 * freq)).epsilon(1e-12));
  CHECK(pe(3, 3) == doctest::Approx(std::cos(3.0 * freq)).epsilon(1e-12));
}

TEST_CASE("AdamW first step matches the hand-derived update") {
  // p=1, g=1, lr=0.1, wd=0: m_hat=1, v_hat=1 => p' = 1 - 0.1*1/(1+eps) ~ 0.9.
  Tensor p = Tensor::from(Mat::Constant(1, 1, 1.0), true);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW opt({p}, cfg);
  sum(p).backward();
  opt.step();
  CHECK(p.value()(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("AdamW decoupled decay shrinks parameters with zero gradient") {
  Tensor p = Tensor::from(Mat::Constant(1, 1, 2.0), true);
  AdamWConfig cfg;
  cfg.lr = 0.5;
  cfg.weight_decay = 0.1;
  AdamW opt({p}, cfg);
  opt.step();  // no gradient accumulated at all
  CHECK(p.value()(0, 0) == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0).epsilon(1e-12));
}

TEST_CASE("AdamW with lr=0 leaves parameters untouched") {
  Tensor p = Tensor::from(Mat::Constant(2, 2, 1.5), true);
  AdamWConfig cfg;
  cfg.lr = 0.0;
  AdamW opt({p}, cfg);
  sum(mul(p, p)).backward();
  opt.step();
  CHECK(p.value() == Mat::Constant(2, 2, 1.5));
}

TEST_CASE("AdamW rejects non-finite gradients") {
  Tensor p = Tensor::from(Mat::Constant(1, 1, 1.0), true);
  AdamW opt({p}, {});
  sum(p).backward();
  p.node()->grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(), std::runtime_error);
}

TEST_CASE("AdamW drives a quadratic toward its minimum") {
  Tensor p = Tensor::from(Mat::Constant(1, 1, 3.0), true);
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt({p}, cfg);
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    Tensor loss = mean(mul(p, p));
    loss.backward();
    opt.step();
  }
  CHECK(std::abs(p.value()(0, 0)) < 0.05);
}

TEST_CASE("checkpoint round-trips parameters, seed, and config") {
  Rng rng = Rng::stream(6, "ckpt", 0);
  NamedParams params;
  params.emplace_back("layer.w", uniform_init(4, 3, 4, rng));
  params.emplace_back("layer.b", uniform_init(1, 3, 4, rng));

  const std::string prefix = (std::filesystem::temp_directory_path() / "pce_ckpt_test").string();
  save_checkpoint(prefix, params, 99, R"({"kind":"test"})");
  const Checkpoint loaded = load_checkpoint(prefix);
  CHECK(loaded.seed == 99);
  CHECK(loaded.config_json.find("\"kind\"") != std::string::npos);
  REQUIRE(loaded.params.size() == 2);
  CHECK(loaded.params[0].first == "layer.w");
  CHECK(loaded.params[0].second == params[0].second.value());
  CHECK(loaded.params[1].second == params[1].second.value());
  CHECK(loaded.param("layer.b") == params[1].second.value());
  CHECK_THROWS_AS(loaded.param("missing"), std::runtime_error);

  std::filesystem::remove(prefix + ".json");
  std::filesystem::remove(prefix + ".bin");
}
