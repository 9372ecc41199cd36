#include "tsc/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tsc::ad {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{0};

}  // namespace

Eigen::Index numel(const Shape& s) {
  Eigen::Index n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + to_string(s));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? ", " : "") << s[i];
  out << ']';
  return out.str();
}

Eigen::VectorXd& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Eigen::VectorXd::Zero(value.size());
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = ad::numel(shape);
  return from(std::move(shape), Eigen::VectorXd::Zero(n), requires_grad);
}

Tensor Tensor::from(Shape shape, Eigen::VectorXd data, bool requires_grad) {
  if (ad::numel(shape) != data.size()) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) + " does not match shape " +
                                to_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->seq = g_seq++;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Eigen::VectorXd d(1);
  d[0] = v;
  return from({}, std::move(d), requires_grad);
}

const Eigen::VectorXd& Tensor::grad() const { return node_->grad_buffer(); }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.setZero(); }

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

Tensor Tensor::make(Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs, std::function<void(Node&)> fn) {
  Tensor out = from(std::move(shape), std::move(value), false);
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
  out.node_->backward = std::move(fn);
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) throw std::invalid_argument("backward() needs a scalar, got shape " + to_string(shape()));
  if (!requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{node_.get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  // creation order is a topological order of the graph
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

  for (Node* n : order) {
    if (n->backward) n->grad = Eigen::VectorXd::Zero(n->value.size());
  }
  node_->grad_buffer()[0] += 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace tsc::ad
