#include "tsc/autodiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tsc::ad {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw std::invalid_argument("Adam: parameter does not require grad");
    m_.push_back(Eigen::VectorXd::Zero(p.numel()));
    v_.push_back(Eigen::VectorXd::Zero(p.numel()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i].grad();
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    params_[i].mutable_value().array() -=
        cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::VectorXd d(numel(shape));
  for (auto& v : d) v = u(rng);
  return Tensor::from(std::move(shape), std::move(d), true);
}

}  // namespace

Tensor kaiming_uniform(Shape shape, int fan_in, std::mt19937_64& rng) {
  return uniform(std::move(shape), std::sqrt(6.0 / fan_in), rng);
}

Tensor xavier_uniform(Shape shape, int fan_in, int fan_out, std::mt19937_64& rng) {
  return uniform(std::move(shape), std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

nlohmann::json params_to_json(const NamedParams& params) {
  auto doc = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    doc.push_back({{"name", name},
                   {"shape", t.shape()},
                   {"data", std::vector<double>(t.value().data(), t.value().data() + t.numel())}});
  }
  return doc;
}

void params_from_json(const NamedParams& params, const nlohmann::json& doc) {
  if (!doc.is_array() || doc.size() != params.size()) {
    throw std::invalid_argument("checkpoint holds " + std::to_string(doc.is_array() ? doc.size() : 0) +
                                " tensors, expected " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    const auto& entry = doc[i];
    const auto got_name = entry.at("name").get<std::string>();
    const auto got_shape = entry.at("shape").get<Shape>();
    if (got_name != name || got_shape != t.shape()) {
      throw std::invalid_argument("checkpoint tensor " + std::to_string(i) + " is '" + got_name + "' " +
                                  to_string(got_shape) + ", expected '" + name + "' " + to_string(t.shape()));
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != t.numel()) {
      throw std::invalid_argument("checkpoint tensor '" + name + "' has the wrong number of values");
    }
    Tensor dst = t;
    dst.mutable_value() = Eigen::Map<const Eigen::VectorXd>(data.data(), t.numel());
  }
}

void copy_params(const NamedParams& from, const NamedParams& to) {
  if (from.size() != to.size()) throw std::invalid_argument("copy_params: parameter count mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].second.shape() != to[i].second.shape()) {
      throw std::invalid_argument("copy_params: shape mismatch for '" + from[i].first + "'");
    }
    Tensor dst = to[i].second;
    dst.mutable_value() = from[i].second.value();
  }
}

}  // namespace tsc::ad
