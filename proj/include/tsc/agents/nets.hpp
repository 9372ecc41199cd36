#pragma once

#include <random>
#include <string>
#include <vector>

#include "tsc/autodiff/ops.hpp"
#include "tsc/autodiff/optim.hpp"

namespace tsc {

/// Fully connected stack with ReLU between layers and a linear head.
class Mlp {
 public:
  Mlp(std::vector<int> sizes, std::mt19937_64& rng);

  /// x is [N, in] -> [N, out]
  ad::Tensor forward(const ad::Tensor& x) const;

  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  ad::NamedParams named_parameters(const std::string& prefix) const;
  std::vector<ad::Tensor> parameters() const;

 private:
  std::vector<int> sizes_;
  std::vector<ad::Tensor> w_, b_;
};

inline constexpr int kHiddenDim = 66;

/// 33 -> 66 -> 66 -> 8 logits; softmax is applied by the caller.
Mlp make_policy_net(int obs_dim, int actions, std::mt19937_64& rng);
/// in -> 66 -> 66 -> 1
Mlp make_value_net(int in_dim, std::mt19937_64& rng);

/// Packs rows into a [N, d] tensor.
ad::Tensor rows_tensor(const std::vector<Eigen::VectorXd>& rows);
ad::Tensor row_tensor(const Eigen::VectorXd& row);

}  // namespace tsc
