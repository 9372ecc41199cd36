#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "tsc/agents/nets.hpp"
#include "tsc/autodiff/ops.hpp"
#include "tsc/vae.hpp"

using namespace tsc;
using ad::Tensor;

namespace {

VaeConfig tiny() {
  VaeConfig c;
  c.in_channels = 3;
  c.conv_channels = {2, 3};
  c.strides = {1, 2};
  c.latent = 2;
  return c;
}

GlobalMatrix random_matrix(std::mt19937_64& rng) {
  GlobalMatrix g;
  g.rows = g.cols = 4;
  g.data.resize(33 * 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : g.data) x = u(rng);
  return g;
}

}  // namespace

TEST(VaeShapes, EncoderFlattenAndDecoderMirror) {
  std::mt19937_64 rng(1);
  Vae vae(VaeConfig{}, rng);
  const std::vector<std::pair<int, int>> sizes{{4, 4}, {4, 4}, {2, 2}, {2, 2}};
  EXPECT_EQ(vae.encoder_sizes(), sizes);
  EXPECT_EQ(vae.flatten_size(), 2 * 2 * 256);
  const auto x = tsc::testing::random_tensor({3, 33, 4, 4}, rng, 0, 1, false);
  EXPECT_EQ(vae.features(x).shape(), (ad::Shape{3, 1024}));
  const auto enc = vae.encode(x);
  EXPECT_EQ(enc.mu.shape(), (ad::Shape{3, 16}));
  EXPECT_EQ(enc.logvar.shape(), (ad::Shape{3, 16}));
  const auto dec = vae.decode(enc.mu);
  EXPECT_EQ(dec.probs.shape(), x.shape());
  EXPECT_GT(dec.probs.value().minCoeff(), 0.0);
  EXPECT_LT(dec.probs.value().maxCoeff(), 1.0);
  EXPECT_THROW(vae.encode(Tensor::zeros({1, 32, 4, 4})), std::invalid_argument);
}

TEST(VaeShapes, ParameterNamesAreStable) {
  std::mt19937_64 rng(1);
  Vae vae(VaeConfig{}, rng);
  const auto named = vae.named_parameters();
  ASSERT_EQ(named.size(), 18u);
  EXPECT_EQ(named.front().first, "encoder.0.weight");
  EXPECT_EQ(named.front().second.shape(), (ad::Shape{64, 33, 3, 3}));
  EXPECT_EQ(named[6].first, "fc_mu.weight");
  EXPECT_EQ(named[6].second.shape(), (ad::Shape{16, 1024}));
  EXPECT_EQ(named.back().first, "decoder.2.bias");
  EXPECT_EQ(named.back().second.shape(), (ad::Shape{33}));
}

TEST(VaeShapes, ZeroParametersGiveStandardPosteriorAndHalfOutputs) {
  std::mt19937_64 rng(2);
  Vae vae(VaeConfig{}, rng);
  for (auto& p : vae.parameters()) p.mutable_value().setZero();
  const auto g = random_matrix(rng);
  const auto enc = vae.encode(vae.as_input(g));
  EXPECT_TRUE(enc.mu.value().isZero());
  EXPECT_TRUE(enc.logvar.value().isZero());
  const auto dec = vae.decode(Tensor::from({1, 16}, Eigen::VectorXd::Constant(16, 0.3)));
  for (double p : dec.probs.value()) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(VaeLoss, WorkedValues) {
  EXPECT_DOUBLE_EQ(kl_divergence(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)), 0.0);
  EXPECT_DOUBLE_EQ(kl_divergence(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)), 0.5);
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(50, 0.5);
  EXPECT_NEAR(bernoulli_nll(half, half), 50 * std::log(2.0), 1e-12);

  // Logit 0 is probability 0.5.
  const auto x = Tensor::from({2, 5}, Eigen::VectorXd::Constant(10, 0.5));
  const auto l = vae_loss(x, Tensor::zeros({2, 5}), Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
  EXPECT_NEAR(l.recon.item(), 5 * std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(l.kl.item(), 0.0);
  EXPECT_THROW(vae_loss(Tensor::from({1, 1}, Eigen::VectorXd::Constant(1, 1.5)), Tensor::zeros({1, 1}),
                        Tensor::zeros({1, 1}), Tensor::zeros({1, 1})),
               std::invalid_argument);
}

TEST(VaeLoss, TensorAndScalarFormsAgree) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = tsc::testing::random_tensor({1, 12}, rng, 0, 1, false);
    const auto logits = tsc::testing::random_tensor({1, 12}, rng, -3, 3, false);
    const auto mu = tsc::testing::random_tensor({1, 4}, rng, -2, 2, false);
    const auto lv = tsc::testing::random_tensor({1, 4}, rng, -2, 2, false);
    const auto l = vae_loss(x, logits, mu, lv);
    const Eigen::VectorXd probs = 1.0 / (1.0 + (-logits.value().array()).exp());
    EXPECT_NEAR(l.recon.item(), bernoulli_nll(x.value(), probs), 1e-9);
    EXPECT_NEAR(l.kl.item(), kl_divergence(mu.value(), lv.value()), 1e-12);
  }
}

TEST(VaeLoss, KlIsNonNegative) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd mu(16), lv(16);
    for (auto& v : mu) v = u(rng);
    for (auto& v : lv) v = u(rng);
    EXPECT_GE(kl_divergence(mu, lv), 0.0);
  }
}

TEST(Reparameterize, ClosedFormCases) {
  const auto mu = Tensor::from({1, 3}, Eigen::Vector3d(1, -2, 0.5));
  const auto lv = Tensor::from({1, 3}, Eigen::Vector3d(0.3, -1, 2));
  EXPECT_EQ(reparameterize(mu, lv, Tensor::zeros({1, 3})).value(), mu.value());
  const auto e = Tensor::from({1, 3}, Eigen::Vector3d(0.1, 0.2, -0.3));
  EXPECT_EQ(reparameterize(mu, Tensor::zeros({1, 3}), e).value(), mu.value() + e.value());
}

TEST(Reparameterize, MonteCarloMoments) {
  std::mt19937_64 rng(5);
  const Eigen::Vector2d mu(0.7, -1.5), lv(0.4, -0.8);
  const int n = 100000;
  Eigen::Vector2d s = Eigen::Vector2d::Zero(), s2 = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto z = reparameterize(mu, lv, rng).z;
    s += z;
    s2 += z.cwiseProduct(z);
  }
  for (int d = 0; d < 2; ++d) {
    const double var = std::exp(lv[d]);
    const double mean = s[d] / n, sample_var = s2[d] / n - mean * mean;
    EXPECT_LT(std::abs(mean - mu[d]), 3 * std::sqrt(var / n));
    EXPECT_LT(std::abs(sample_var - var), 3 * var * std::sqrt(2.0 / n));
  }
}

TEST(VaeGrad, TinyModelPassesFiniteDifferences) {
  std::mt19937_64 rng(6);
  Vae vae(tiny(), rng);
  const auto x = tsc::testing::random_tensor({2, 3, 4, 4}, rng, 0, 1, false);
  const auto eps = tsc::testing::random_tensor({2, 2}, rng, -1, 1, false);
  auto loss = [&] {
    const auto enc = vae.encode(x);
    const auto dec = vae.decode(reparameterize(enc.mu, enc.logvar, eps));
    return vae_loss(x, dec.logits, enc.mu, enc.logvar).total;
  };
  const auto r = tsc::testing::gradcheck(loss, vae.parameters());
  EXPECT_GT(r.checked, 100u);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(VaeTrain, ZeroLearningRateLeavesParameters) {
  std::mt19937_64 rng(7);
  auto cfg = tiny();
  cfg.lr = 0.0;
  Vae vae(cfg, rng);
  std::vector<Eigen::VectorXd> before;
  for (const auto& p : vae.parameters()) before.push_back(p.value());
  const auto x = tsc::testing::random_tensor({4, 3, 4, 4}, rng, 0, 1, false);
  for (int i = 0; i < 3; ++i) vae.train_step(x, rng);
  const auto after = vae.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after[i].value(), before[i]);
}

TEST(VaeTrain, SeededRunsGiveIdenticalTraces) {
  auto trace = [] {
    std::mt19937_64 rng(8);
    Vae vae(VaeConfig{}, rng);
    std::vector<double> out;
    for (int i = 0; i < 4; ++i) {
      const auto r = vae.train_step(random_matrix(rng), rng);
      out.push_back(r.losses.total);
      out.insert(out.end(), r.mu.begin(), r.mu.end());
    }
    return out;
  };
  EXPECT_EQ(trace(), trace());
}

TEST(VaeTrain, ReturnedLatentIsPreUpdatePosteriorMean) {
  std::mt19937_64 rng(9);
  Vae vae(VaeConfig{}, rng);
  const auto g = random_matrix(rng);
  const auto before = vae.latent(g);
  const auto r = vae.train_step(g, rng);
  EXPECT_EQ(r.mu, before);
  EXPECT_NE(vae.latent(g), before);
  EXPECT_NEAR(r.losses.total, r.losses.recon + r.losses.kl, 1e-9);
}

TEST(VaeTrain, LatentFeedsCriticWithoutTouchingVaeGradients) {
  std::mt19937_64 rng(10);
  Vae vae(VaeConfig{}, rng);
  const auto g = random_matrix(rng);
  const auto z = vae.train_step(g, rng).mu;
  for (auto& p : vae.parameters()) p.zero_grad();
  Mlp critic = make_value_net(16, rng);
  ad::sum(ad::square(critic.forward(row_tensor(z)))).backward();
  for (const auto& p : vae.parameters()) EXPECT_TRUE(p.grad().isZero());
  EXPECT_FALSE(critic.parameters().front().grad().isZero());
  EXPECT_EQ(vae.latent(g), vae.latent(g));
}
