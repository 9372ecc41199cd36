#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tsc::ad {

using Shape = std::vector<int>;

Eigen::Index numel(const Shape& s);
std::string to_string(const Shape& s);

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into inputs
  std::uint64_t seq = 0;

  Eigen::VectorXd& grad_buffer();
};

/// Dense row-major tensor handle. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, Eigen::VectorXd data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  Eigen::Index numel() const { return node_->value.size(); }

  const Eigen::VectorXd& value() const { return node_->value; }
  /// In-place access for parameter updates; never mutate a tensor a live graph depends on.
  Eigen::VectorXd& mutable_value() { return node_->value; }
  const Eigen::VectorXd& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  void zero_grad();
  /// Same values, no history.
  Tensor detach() const;

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Result of an op. Records `inputs` and `fn` only when grad mode is on and
  /// at least one input requires a gradient.
  static Tensor make(Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs,
                     std::function<void(Node&)> fn);

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

/// Disables graph recording in its scope (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

}  // namespace tsc::ad
