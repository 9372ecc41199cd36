#pragma once

#include <random>
#include <vector>

#include "tsc/autodiff/ops.hpp"
#include "tsc/autodiff/optim.hpp"
#include "tsc/env.hpp"

namespace tsc {

struct VaeConfig {
  int in_channels = kObservationSize;
  int grid_rows = 4;
  int grid_cols = 4;
  std::vector<int> conv_channels{64, 128, 256};
  std::vector<int> strides{1, 2, 1};
  int kernel = 3;
  int padding = 1;
  int latent = 16;
  double lr = 1e-3;
};

struct VaeLosses {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct LatentSample {
  Eigen::VectorXd mu, logvar, eps, z;
};

/// z = mu + eps * exp(logvar / 2) with eps ~ N(0, I) from `rng`.
LatentSample reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, std::mt19937_64& rng);
ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& logvar, const ad::Tensor& eps);

/// Bernoulli negative log-likelihood summed over entries.
double bernoulli_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& x_recon);
/// -1/2 sum(1 + logvar - mu^2 - exp(logvar))
double kl_divergence(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar);

struct VaeLossTensors {
  ad::Tensor total, recon, kl;
};

/// Reconstruction from logits for stability; per-sample sums averaged over the
/// batch. Throws if any x lies outside [0, 1].
VaeLossTensors vae_loss(const ad::Tensor& x, const ad::Tensor& logits, const ad::Tensor& mu, const ad::Tensor& logvar);

class Vae {
 public:
  struct Encoded {
    ad::Tensor mu, logvar;  // [N, latent]
  };
  struct Decoded {
    ad::Tensor logits, probs;  // [N, C, H, W]
  };
  struct StepResult {
    Eigen::VectorXd mu;  // latent of the first sample, detached
    VaeLosses losses;
  };

  Vae(VaeConfig cfg, std::mt19937_64& rng);

  /// x is [N, C, H, W].
  Encoded encode(const ad::Tensor& x) const;
  /// Flattened convolutional features, [N, flatten_size()].
  ad::Tensor features(const ad::Tensor& x) const;
  Decoded decode(const ad::Tensor& z) const;

  /// One Adam step on L_vae over the batch.
  StepResult train_step(const ad::Tensor& x, std::mt19937_64& rng);
  StepResult train_step(const GlobalMatrix& g, std::mt19937_64& rng);

  /// Posterior mean without recording a graph.
  Eigen::VectorXd latent(const GlobalMatrix& g) const;

  int flatten_size() const { return flatten_; }
  /// Spatial size after each encoder conv, starting with the input.
  const std::vector<std::pair<int, int>>& encoder_sizes() const { return sizes_; }
  const VaeConfig& config() const { return cfg_; }

  ad::NamedParams named_parameters() const;
  std::vector<ad::Tensor> parameters() const;

  ad::Tensor as_input(const GlobalMatrix& g) const;

 private:
  struct Layer {
    ad::Tensor w, b;
  };

  VaeConfig cfg_;
  std::vector<std::pair<int, int>> sizes_;
  std::vector<std::pair<int, int>> output_padding_;  // per decoder layer
  int flatten_ = 0;
  std::vector<Layer> enc_;
  Layer fc_mu_, fc_logvar_, fc_decode_;
  std::vector<Layer> dec_;
  ad::Adam opt_;
};

}  // namespace tsc
