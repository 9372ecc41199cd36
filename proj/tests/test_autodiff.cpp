#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "tsc/autodiff/ops.hpp"
#include "tsc/autodiff/optim.hpp"

using namespace tsc;
using namespace tsc::ad;
using tsc::testing::gradcheck;
using tsc::testing::random_tensor;

namespace {

constexpr int kInstances = 20;
constexpr double kTol = 1e-4;

// Random dims in [lo, hi].
int dim(std::mt19937_64& rng, int lo = 1, int hi = 4) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Weighted-sum reduction so every output entry gets a distinct upstream gradient.
Tensor probe(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

template <class Build>
void check_unary(const char* name, Build op, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < kInstances; ++i) {
    const Shape s{dim(rng), dim(rng)};
    auto x = random_tensor(s, rng, lo, hi);
    const auto w = tsc::testing::probe_weights(op(x), rng);
    const auto r = gradcheck([&] { return probe(op(x), w); }, {x});
    EXPECT_LT(r.max_rel_error, kTol) << name << " instance " << i;
  }
}

template <class Build>
void check_binary(const char* name, Build op, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < kInstances; ++i) {
    const Shape s{dim(rng), dim(rng)};
    auto a = random_tensor(s, rng, lo, hi), b = random_tensor(s, rng, lo, hi);
    const auto w = tsc::testing::probe_weights(op(a, b), rng);
    const auto r = gradcheck([&] { return probe(op(a, b), w); }, {a, b});
    EXPECT_LT(r.max_rel_error, kTol) << name << " instance " << i;
  }
}

}  // namespace

TEST(AutodiffExamples, ElementwiseValues) {
  const auto x = Tensor::from({3}, Eigen::Vector3d(-1.0, 0.0, 2.0), true);
  EXPECT_EQ(relu(x).value(), Eigen::Vector3d(0.0, 0.0, 2.0));
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  const auto sm = softmax(Tensor::zeros({2, 8}));
  for (double p : sm.value()) EXPECT_DOUBLE_EQ(p, 0.125);
}

TEST(AutodiffExamples, IdentityLinear) {
  const auto x = Tensor::from({1, 3}, Eigen::Vector3d(1, 2, 3));
  Eigen::VectorXd eye = Eigen::VectorXd::Zero(9);
  eye[0] = eye[4] = eye[8] = 1.0;
  const auto w = Tensor::from({3, 3}, eye);
  const auto y = linear(x, w, Tensor::zeros({3}));
  EXPECT_EQ(y.shape(), (Shape{1, 3}));
  EXPECT_EQ(y.value(), Eigen::Vector3d(1, 2, 3));
}

TEST(AutodiffExamples, CentreTapConvIsIdentity) {
  std::mt19937_64 rng(1);
  const auto x = random_tensor({1, 1, 3, 3}, rng);
  Eigen::VectorXd k = Eigen::VectorXd::Zero(9);
  k[4] = 1.0;
  const auto y = conv2d(x, Tensor::from({1, 1, 3, 3}, k), Tensor::zeros({1}), 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(y.value(), x.value());
}

TEST(AutodiffExamples, SharedInputAccumulates) {
  auto x = Tensor::scalar(3.0, true);
  const auto y = add(x, x);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  const auto z = mul(x, x);
  x.zero_grad();
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(AutodiffExamples, NoGradGuardRecordsNothing) {
  const auto x = Tensor::scalar(1.0, true);
  {
    NoGradGuard g;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(square(x).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(square(x).requires_grad());
  EXPECT_FALSE(square(x).detach().requires_grad());
}

TEST(AutodiffExamples, ShapeMismatchThrows) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
  EXPECT_THROW(reshape(Tensor::zeros({2, 3}), {4}), std::invalid_argument);
  EXPECT_THROW(gather_cols(Tensor::zeros({2, 3}), {0, 3}), std::out_of_range);
}

TEST(Gradcheck, Add) { check_binary("add", [](auto& a, auto& b) { return add(a, b); }, -1, 1, 1); }
TEST(Gradcheck, Sub) { check_binary("sub", [](auto& a, auto& b) { return sub(a, b); }, -1, 1, 2); }
TEST(Gradcheck, Mul) { check_binary("mul", [](auto& a, auto& b) { return mul(a, b); }, -1, 1, 3); }
TEST(Gradcheck, Minimum) { check_binary("minimum", [](auto& a, auto& b) { return minimum(a, b); }, -1, 1, 4); }
TEST(Gradcheck, Scale) { check_unary("scale", [](auto& x) { return scale(x, -2.5); }, -1, 1, 5); }
TEST(Gradcheck, AddScalar) { check_unary("add_scalar", [](auto& x) { return add_scalar(x, 0.7); }, -1, 1, 6); }
TEST(Gradcheck, Square) { check_unary("square", [](auto& x) { return square(x); }, -1, 1, 7); }
TEST(Gradcheck, Exp) { check_unary("exp", [](auto& x) { return exp(x); }, -2, 2, 8); }
TEST(Gradcheck, Log) { check_unary("log", [](auto& x) { return log(x); }, 0.2, 3, 9); }
TEST(Gradcheck, Relu) { check_unary("relu", [](auto& x) { return relu(x); }, -1, 1, 10); }
TEST(Gradcheck, Sigmoid) { check_unary("sigmoid", [](auto& x) { return sigmoid(x); }, -4, 4, 11); }
TEST(Gradcheck, Clamp) { check_unary("clamp", [](auto& x) { return clamp(x, -0.5, 0.5); }, -1, 1, 12); }
TEST(Gradcheck, Softmax) { check_unary("softmax", [](auto& x) { return softmax(x); }, -3, 3, 13); }
TEST(Gradcheck, LogSoftmax) { check_unary("log_softmax", [](auto& x) { return log_softmax(x); }, -3, 3, 14); }
TEST(Gradcheck, Reshape) {
  check_unary("reshape", [](auto& x) { return reshape(x, {static_cast<int>(x.numel())}); }, -1, 1, 15);
}

TEST(Gradcheck, BceWithLogits) {
  std::mt19937_64 rng(16);
  for (int i = 0; i < kInstances; ++i) {
    const Shape s{dim(rng), dim(rng)};
    auto l = random_tensor(s, rng, -5, 5);
    const auto t = random_tensor(s, rng, 0, 1, false);
    const auto w = tsc::testing::probe_weights(l, rng);
    EXPECT_LT(gradcheck([&] { return probe(bce_with_logits(l, t), w); }, {l}).max_rel_error, kTol);
  }
}

TEST(Gradcheck, SumAndMean) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < kInstances; ++i) {
    auto x = random_tensor({dim(rng), dim(rng)}, rng);
    EXPECT_LT(gradcheck([&] { return sum(square(x)); }, {x}).max_rel_error, kTol);
    EXPECT_LT(gradcheck([&] { return mean(square(x)); }, {x}).max_rel_error, kTol);
  }
}

TEST(Gradcheck, ConcatAndGather) {
  std::mt19937_64 rng(18);
  for (int i = 0; i < kInstances; ++i) {
    const int n = dim(rng), p = dim(rng), q = dim(rng);
    auto a = random_tensor({n, p}, rng), b = random_tensor({n, q}, rng);
    std::vector<int> cols(static_cast<std::size_t>(n));
    for (auto& c : cols) c = std::uniform_int_distribution<int>(0, p + q - 1)(rng);
    const auto w = random_tensor({n, p + q}, rng, -1, 1, false);
    const auto wg = random_tensor({n}, rng, -1, 1, false);
    EXPECT_LT(gradcheck([&] { return probe(concat_cols(a, b), w); }, {a, b}).max_rel_error, kTol);
    EXPECT_LT(gradcheck([&] { return probe(gather_cols(concat_cols(a, b), cols), wg); }, {a, b}).max_rel_error,
              kTol);
  }
}

TEST(Gradcheck, Linear) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < kInstances; ++i) {
    const int n = dim(rng), in = dim(rng), out = dim(rng);
    auto x = random_tensor({n, in}, rng), w = random_tensor({out, in}, rng), b = random_tensor({out}, rng);
    const auto pw = random_tensor({n, out}, rng, -1, 1, false);
    EXPECT_LT(gradcheck([&] { return probe(linear(x, w, b), pw); }, {x, w, b}).max_rel_error, kTol);
  }
}

TEST(Gradcheck, Conv2d) {
  std::mt19937_64 rng(20);
  for (int i = 0; i < kInstances; ++i) {
    const int n = dim(rng, 1, 2), c = dim(rng, 1, 3), o = dim(rng, 1, 3), h = dim(rng, 3, 5), w = dim(rng, 3, 5);
    const int stride = dim(rng, 1, 2), pad = dim(rng, 0, 1);
    auto x = random_tensor({n, c, h, w}, rng), k = random_tensor({o, c, 3, 3}, rng), b = random_tensor({o}, rng);
    const auto y = conv2d(x, k, b, stride, pad);
    const auto pw = tsc::testing::probe_weights(y, rng);
    EXPECT_LT(gradcheck([&] { return probe(conv2d(x, k, b, stride, pad), pw); }, {x, k, b}).max_rel_error, kTol);
  }
}

TEST(Gradcheck, ConvTranspose2d) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < kInstances; ++i) {
    const int n = dim(rng, 1, 2), ci = dim(rng, 1, 3), co = dim(rng, 1, 3), h = dim(rng, 2, 4), w = dim(rng, 2, 4);
    const int stride = dim(rng, 1, 2), pad = dim(rng, 0, 1), op = stride > 1 ? dim(rng, 0, 1) : 0;
    auto x = random_tensor({n, ci, h, w}, rng), k = random_tensor({ci, co, 3, 3}, rng), b = random_tensor({co}, rng);
    const auto y = conv_transpose2d(x, k, b, stride, pad, op);
    EXPECT_EQ(y.dim(2), conv_transpose_out_size(h, 3, stride, pad, op));
    const auto pw = tsc::testing::probe_weights(y, rng);
    EXPECT_LT(gradcheck([&] { return probe(conv_transpose2d(x, k, b, stride, pad, op), pw); }, {x, k, b}).max_rel_error,
              kTol);
  }
}

TEST(Conv, MatchesDirectLoops) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 50; ++i) {
    const int n = dim(rng, 1, 3), c = dim(rng, 1, 4), o = dim(rng, 1, 4), h = dim(rng, 2, 6), w = dim(rng, 2, 6);
    const int kh = dim(rng, 1, std::min(3, h)), kw = dim(rng, 1, std::min(3, w));
    const int stride = dim(rng, 1, 2), pad = dim(rng, 0, 1);
    const auto x = random_tensor({n, c, h, w}, rng, -1, 1, false);
    const auto k = random_tensor({o, c, kh, kw}, rng, -1, 1, false);
    const auto b = random_tensor({o}, rng, -1, 1, false);
    const auto y = conv2d(x, k, b, stride, pad);
    const auto ref =
        tsc::testing::direct_conv2d(x.value(), n, c, h, w, k.value(), o, kh, kw, b.value(), stride, pad);
    ASSERT_EQ(y.numel(), ref.size());
    EXPECT_LT((y.value() - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(y.dim(2), conv_out_size(h, kh, stride, pad));
  }
}

TEST(Conv, TransposeIsTheAdjoint) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const int n = dim(rng, 1, 2), c = dim(rng, 1, 3), o = dim(rng, 1, 3), h = dim(rng, 3, 6), w = dim(rng, 3, 6);
    const int stride = dim(rng, 1, 2), pad = dim(rng, 0, 1);
    const int ho = conv_out_size(h, 3, stride, pad), wo = conv_out_size(w, 3, stride, pad);
    const int oph = h - conv_transpose_out_size(ho, 3, stride, pad, 0);
    const int opw = w - conv_transpose_out_size(wo, 3, stride, pad, 0);
    const auto x = random_tensor({n, c, h, w}, rng, -1, 1, false);
    const auto y = random_tensor({n, o, ho, wo}, rng, -1, 1, false);
    const auto k = random_tensor({o, c, 3, 3}, rng, -1, 1, false);
    const double lhs = conv2d(x, k, Tensor::zeros({o}), stride, pad).value().dot(y.value());
    const double rhs = x.value().dot(conv_transpose2d(y, k, Tensor::zeros({c}), stride, pad, oph, opw).value());
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_tensor({3, 8}, rng, -20, 20, false);
    const auto p = softmax(x);
    Eigen::VectorXd shifted = x.value().array() + 123.0;
    const auto q = softmax(Tensor::from({3, 8}, shifted));
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(p.value().segment(r * 8, 8).sum(), 1.0, 1e-12);
    EXPECT_GE(p.value().minCoeff(), 0.0);
    EXPECT_LT((p.value() - q.value()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((log_softmax(x).value() - p.value().array().log().matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Optim, AdamFirstStepHasMagnitudeLr) {
  auto p = Tensor::from({3}, Eigen::Vector3d(1.0, -2.0, 0.5), true);
  Adam opt({p}, AdamConfig{0.1});
  sum(mul(p, Tensor::from({3}, Eigen::Vector3d(3.0, -0.01, 40.0)))).backward();
  opt.step();
  EXPECT_NEAR(p.value()[0], 0.9, 1e-6);
  EXPECT_NEAR(p.value()[1], -1.9, 1e-5);
  EXPECT_NEAR(p.value()[2], 0.4, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Optim, AdamMinimizesAQuadratic) {
  auto p = Tensor::from({2}, Eigen::Vector2d(3.0, -4.0), true);
  Adam opt({p}, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    sum(square(add_scalar(p, -1.0))).backward();
    opt.step();
  }
  EXPECT_NEAR(p.value()[0], 1.0, 1e-3);
  EXPECT_NEAR(p.value()[1], 1.0, 1e-3);
}

TEST(Optim, InitialisersAreSeededAndBounded) {
  std::mt19937_64 a(5), b(5);
  const auto ka = kaiming_uniform({16, 8}, 8, a), kb = kaiming_uniform({16, 8}, 8, b);
  EXPECT_EQ(ka.value(), kb.value());
  EXPECT_LE(ka.value().cwiseAbs().maxCoeff(), std::sqrt(6.0 / 8));
  const auto x = xavier_uniform({4, 8}, 8, 4, a);
  EXPECT_LE(x.value().cwiseAbs().maxCoeff(), std::sqrt(6.0 / 12));
}

TEST(Optim, ParamsJsonRoundTrip) {
  std::mt19937_64 rng(6);
  NamedParams src{{"w", random_tensor({2, 3}, rng)}, {"b", random_tensor({3}, rng)}};
  NamedParams dst{{"w", Tensor::zeros({2, 3}, true)}, {"b", Tensor::zeros({3}, true)}};
  params_from_json(dst, params_to_json(src));
  EXPECT_EQ(dst[0].second.value(), src[0].second.value());
  EXPECT_EQ(dst[1].second.value(), src[1].second.value());
  NamedParams wrong{{"w", Tensor::zeros({3, 2}, true)}, {"b", Tensor::zeros({3}, true)}};
  EXPECT_THROW(params_from_json(wrong, params_to_json(src)), std::invalid_argument);
  NamedParams renamed{{"v", Tensor::zeros({2, 3}, true)}, {"b", Tensor::zeros({3}, true)}};
  EXPECT_THROW(params_from_json(renamed, params_to_json(src)), std::invalid_argument);
}

TEST(Determinism, SameSeedSameGradients) {
  auto run = [] {
    std::mt19937_64 rng(77);
    auto x = random_tensor({2, 3, 4, 4}, rng), k = random_tensor({5, 3, 3, 3}, rng), b = random_tensor({5}, rng);
    sum(square(relu(conv2d(x, k, b, 2, 1)))).backward();
    return std::make_pair(k.grad(), x.grad());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}
