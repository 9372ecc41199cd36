#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsc/autodiff/tensor.hpp"

namespace tsc::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  /// One update from the gradients currently held by the parameters.
  void step();
  void zero_grad();

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<Eigen::VectorXd> m_, v_;
  long t_ = 0;
};

/// U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), for layers feeding a ReLU.
Tensor kaiming_uniform(Shape shape, int fan_in, std::mt19937_64& rng);
/// U(-sqrt(6 / (fan_in + fan_out)), +...), for output heads.
Tensor xavier_uniform(Shape shape, int fan_in, int fan_out, std::mt19937_64& rng);

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// [{name, shape, data}, ...] in the given order.
nlohmann::json params_to_json(const NamedParams& params);
/// Copies values into the existing tensors; names and shapes must match.
void params_from_json(const NamedParams& params, const nlohmann::json& doc);

void copy_params(const NamedParams& from, const NamedParams& to);

}  // namespace tsc::ad
