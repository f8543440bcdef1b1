#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include "grounded/activations.h"
#include "grounded/grad_check.h"
#include "grounded/lstm.h"
#include "grounded/matrix.h"
#include "grounded/optimizer.h"
#include "grounded/params.h"
#include "grounded/rng.h"

namespace grounded {
namespace {

double Sum(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

TEST(SoftmaxTest, ShiftInvariantAndNormalized) {
  const Vec a = Softmax(Vec{1.0, 2.0, 3.0});
  const Vec b = Softmax(Vec{1001.0, 1002.0, 1003.0});
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_NEAR(Sum(a), 1.0, 1e-15);
  EXPECT_NEAR(a[2] / a[1], std::exp(1.0), 1e-12);
}

TEST(SoftmaxTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(Softmax(Vec{}), std::invalid_argument);
  EXPECT_THROW(Softmax(Vec{0.0, std::numeric_limits<double>::quiet_NaN()}),
               std::invalid_argument);
  EXPECT_THROW(Softmax(Vec{0.0, std::numeric_limits<double>::infinity()}),
               std::invalid_argument);
}

TEST(MaskedSoftmaxTest, MaskedCellsGetExactlyZero) {
  const std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  const Vec p = MaskedSoftmax(Vec{0.0, 50.0, 0.0, -3.0}, mask);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_EQ(p[3], 0.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
  const std::vector<std::uint8_t> none = {0, 0};
  EXPECT_THROW(MaskedSoftmax(Vec{1.0, 2.0}, none), std::invalid_argument);
}

TEST(ActivationsTest, ScalarIdentities) {
  for (double x : {-30.0, -2.0, -0.1, 0.0, 0.7, 4.0, 30.0}) {
    EXPECT_NEAR(Htan(x), std::tanh(x), 1e-12) << x;
    EXPECT_NEAR(Sigmoid(x) + Sigmoid(-x), 1.0, 1e-12) << x;
  }
  EXPECT_EQ(Sigmoid(0.0), 0.5);
  EXPECT_NEAR(LogSumExp(Vec{1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-9);
  EXPECT_EQ(ArgMax(Vec{0.1, 3.0, 3.0, -1.0}), 1u);
}

TEST(MatrixTest, ProductsAgreeWithHandComputation) {
  Matrix m(2, 3);
  double v = 1.0;
  for (double& x : m.values()) x = v++;
  const Vec y = MatVec(m, Vec{1.0, 0.0, -1.0});
  EXPECT_EQ(y, (Vec{-2.0, -2.0}));
  Vec t(3, 0.0);
  MatTVecAcc(m, Vec{1.0, 1.0}, t);
  EXPECT_EQ(t, (Vec{5.0, 7.0, 9.0}));
  Matrix g(2, 3);
  AddOuter(g, Vec{1.0, 2.0}, Vec{1.0, 0.0, 3.0}, 0.5);
  EXPECT_EQ(g(1, 2), 3.0);
  EXPECT_EQ(g(0, 1), 0.0);
  EXPECT_NEAR(CosineSimilarity(Vec{1.0, 0.0}, Vec{2.0, 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(CosineSimilarity(Vec{1.0, 0.0}, Vec{0.0, 5.0}), 0.0, 1e-15);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(m.AllFinite());
}

TEST(RngTest, SeedsAndSubstreamsAreReproducible) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
  const Rng base(42);
  EXPECT_EQ(base.Substream("track").seed(), Rng(42).Substream("track").seed());
  EXPECT_NE(base.Substream("track").seed(), base.Substream("link").seed());
  EXPECT_NE(base.Substream("track").seed(), Rng(43).Substream("track").seed());
}

TEST(RngTest, DrawsStayInRange) {
  Rng rng(3);
  std::set<int> seen;
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const int k = rng.IntIn(-2, 2);
    ASSERT_GE(k, -2);
    ASSERT_LE(k, 2);
    seen.insert(k);
    mean += rng.Normal() / n;
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

TEST(RngTest, ShuffleIsAPermutation) {
  Rng rng(8);
  std::vector<int> items = {0, 1, 2, 3, 4, 5, 6, 7};
  rng.Shuffle(std::span<int>(items));
  EXPECT_EQ(std::set<int>(items.begin(), items.end()).size(), 8u);
}

TEST(OptimizerTest, SgdStepFollowsClippedGradient) {
  Matrix w(1, 2, 1.0), g(1, 2);
  g(0, 0) = 3.0;
  g(0, 1) = 4.0;  // norm 5
  const std::vector<ParamTensor> params = {{"w", &w, &g}};
  Optimizer sgd({.kind = OptimizerKind::kSgd, .learning_rate = 0.1,
                 .clip_norm = 1.0});
  sgd.Step(params);
  EXPECT_NEAR(w(0, 0), 1.0 - 0.1 * 0.6, 1e-15);
  EXPECT_NEAR(w(0, 1), 1.0 - 0.1 * 0.8, 1e-15);
}

TEST(OptimizerTest, AdamFirstStepMovesByLearningRate) {
  Matrix w(1, 3, 0.0), g(1, 3);
  g(0, 0) = 0.01;
  g(0, 1) = -7.0;
  g(0, 2) = 0.0;
  const std::vector<ParamTensor> params = {{"w", &w, &g}};
  Optimizer adam({.kind = OptimizerKind::kAdam, .learning_rate = 0.01,
                  .clip_norm = 0.0});
  adam.Step(params);
  EXPECT_NEAR(w(0, 0), -0.01, 1e-6);
  EXPECT_NEAR(w(0, 1), 0.01, 1e-9);
  EXPECT_EQ(w(0, 2), 0.0);
  EXPECT_THROW(ParseOptimizerKind("rmsprop"), std::invalid_argument);
}

TEST(OptimizerTest, AdamMinimizesQuadratic) {
  Matrix w(1, 2), g(1, 2);
  w(0, 0) = 3.0;
  w(0, 1) = -2.0;
  const std::vector<ParamTensor> params = {{"w", &w, &g}};
  Optimizer adam({.learning_rate = 0.05});
  for (int step = 0; step < 2000; ++step) {
    g(0, 0) = 2.0 * (w(0, 0) - 1.0);
    g(0, 1) = 2.0 * (w(0, 1) + 0.5);
    adam.Step(params);
  }
  EXPECT_NEAR(w(0, 0), 1.0, 1e-3);
  EXPECT_NEAR(w(0, 1), -0.5, 1e-3);
}

// One LSTM step with a random linear read-out of h and c.
struct LstmFixture {
  static constexpr int kX = 3;
  static constexpr int kH = 4;
  Matrix weights{4 * kH, kX + kH}, bias{4 * kH, 1};
  Matrix d_weights{4 * kH, kX + kH}, d_bias{4 * kH, 1};
  Vec x, h_prev, c_prev, read_h, read_c;

  LstmFixture() {
    Rng rng(11);
    XavierInit(weights, rng);
    InitLstmBias(bias);
    for (double& b : bias.values()) b += rng.Normal(0.0, 0.1);
    auto draw = [&](int n) {
      Vec v(n);
      for (double& e : v) e = rng.Normal();
      return v;
    };
    x = draw(kX);
    h_prev = draw(kH);
    c_prev = draw(kH);
    read_h = draw(kH);
    read_c = draw(kH);
  }

  double Loss(const Vec& xin, const Vec& hin, const Vec& cin) const {
    LstmCache cache;
    LstmForward(weights, bias, xin, hin, cin, cache);
    return Dot(read_h, cache.h) + Dot(read_c, cache.c);
  }
};

TEST(LstmTest, ForgetBiasStartsAtOne) {
  Matrix bias(4 * 5, 1);
  InitLstmBias(bias);
  for (int r = 0; r < 20; ++r) {
    EXPECT_EQ(bias(r, 0), r >= 5 && r < 10 ? 1.0 : 0.0) << r;
  }
}

TEST(LstmTest, BackwardMatchesFiniteDifferences) {
  LstmFixture f;
  LstmCache cache;
  LstmForward(f.weights, f.bias, f.x, f.h_prev, f.c_prev, cache);
  Vec dx(LstmFixture::kX), dh_prev(LstmFixture::kH), dc_prev(LstmFixture::kH);
  LstmBackward(f.weights, cache, f.read_h, f.read_c, f.d_weights, f.d_bias, dx,
               dh_prev, dc_prev);

  const std::vector<ParamTensor> params = {
      {"weights", &f.weights, &f.d_weights}, {"bias", &f.bias, &f.d_bias}};
  const GradCheckReport report = FiniteDiffCheck(
      [&] { return f.Loss(f.x, f.h_prev, f.c_prev); }, params,
      {.samples_per_tensor = 1000});
  EXPECT_LT(report.max_relative_error, 1e-7) << report.worst_tensor;
  EXPECT_EQ(report.coordinates_checked, f.weights.size() + f.bias.size());

  const double eps = 1e-6;
  auto numeric = [&](Vec& v, std::size_t i) {
    const double saved = v[i];
    v[i] = saved + eps;
    const double up = f.Loss(f.x, f.h_prev, f.c_prev);
    v[i] = saved - eps;
    const double down = f.Loss(f.x, f.h_prev, f.c_prev);
    v[i] = saved;
    return (up - down) / (2.0 * eps);
  };
  for (std::size_t i = 0; i < dx.size(); ++i) {
    EXPECT_NEAR(dx[i], numeric(f.x, i), 1e-7);
  }
  for (std::size_t i = 0; i < dh_prev.size(); ++i) {
    EXPECT_NEAR(dh_prev[i], numeric(f.h_prev, i), 1e-7);
    EXPECT_NEAR(dc_prev[i], numeric(f.c_prev, i), 1e-7);
  }
}

TEST(GradCheckTest, FlagsWrongGradient) {
  Matrix w(1, 2), g(1, 2);
  w(0, 0) = 1.5;
  w(0, 1) = -0.5;
  auto loss = [&] { return w(0, 0) * w(0, 0) + 3.0 * w(0, 1); };
  g(0, 0) = 3.0;
  g(0, 1) = 3.0;
  const std::vector<ParamTensor> params = {{"w", &w, &g}};
  EXPECT_LT(FiniteDiffCheck(loss, params).max_relative_error, 1e-8);
  g(0, 1) = 2.0;
  const GradCheckReport bad = FiniteDiffCheck(loss, params);
  EXPECT_GT(bad.max_relative_error, 0.1);
  EXPECT_EQ(bad.worst_index, 1u);
  EXPECT_EQ(w(0, 0), 1.5);  // values are restored
}

}  // namespace
}  // namespace grounded
