#pragma once

// Central finite-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tsc/autodiff/tensor.hpp"

namespace tsc::testing {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients of `loss()` w.r.t. every entry of `inputs`
/// with central differences. Relative error uses a floor of `floor` in the
/// denominator so tiny gradients compare absolutely.
inline GradcheckResult gradcheck(const std::function<ad::Tensor()>& loss, std::vector<ad::Tensor> inputs,
                                 double h = 1e-6, double floor = 1e-3) {
  for (auto& t : inputs) t.zero_grad();
  ad::Tensor l = loss();
  l.backward();
  std::vector<Eigen::VectorXd> analytic;
  for (auto& t : inputs) analytic.push_back(t.grad());

  GradcheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& v = inputs[i].mutable_value();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double keep = v[j];
      v[j] = keep + h;
      const double up = loss().item();
      v[j] = keep - h;
      const double down = loss().item();
      v[j] = keep;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i][j]), floor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(numeric - analytic[i][j]) / denom);
      ++r.checked;
    }
  }
  return r;
}

inline ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd d(ad::numel(shape));
  for (auto& x : d) x = u(rng);
  return ad::Tensor::from(std::move(shape), std::move(d), requires_grad);
}

/// Weighted sum with fixed random weights so every output entry matters.
inline ad::Tensor probe_weights(const ad::Tensor& like, std::mt19937_64& rng) {
  return random_tensor(like.shape(), rng, -1.0, 1.0, false);
}

}  // namespace tsc::testing
