#include "tsc/agents/nets.hpp"

#include <stdexcept>

namespace tsc {

Mlp::Mlp(std::vector<int> sizes, std::mt19937_64& rng) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least an input and an output size");
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const int in = sizes_[i], out = sizes_[i + 1];
    const bool head = i + 2 == sizes_.size();
    w_.push_back(head ? ad::xavier_uniform({out, in}, in, out, rng) : ad::kaiming_uniform({out, in}, in, rng));
    b_.push_back(ad::Tensor::zeros({out}, true));
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    h = ad::linear(h, w_[i], b_[i]);
    if (i + 1 < w_.size()) h = ad::relu(h);
  }
  return h;
}

ad::NamedParams Mlp::named_parameters(const std::string& prefix) const {
  ad::NamedParams out;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    out.emplace_back(prefix + "fc" + std::to_string(i) + ".weight", w_[i]);
    out.emplace_back(prefix + "fc" + std::to_string(i) + ".bias", b_[i]);
  }
  return out;
}

std::vector<ad::Tensor> Mlp::parameters() const {
  std::vector<ad::Tensor> out;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    out.push_back(w_[i]);
    out.push_back(b_[i]);
  }
  return out;
}

Mlp make_policy_net(int obs_dim, int actions, std::mt19937_64& rng) {
  return Mlp({obs_dim, kHiddenDim, kHiddenDim, actions}, rng);
}

Mlp make_value_net(int in_dim, std::mt19937_64& rng) { return Mlp({in_dim, kHiddenDim, kHiddenDim, 1}, rng); }

ad::Tensor rows_tensor(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) throw std::invalid_argument("rows_tensor: no rows");
  const auto d = rows.front().size();
  Eigen::VectorXd data(static_cast<Eigen::Index>(rows.size()) * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw std::invalid_argument("rows_tensor: ragged rows");
    data.segment(static_cast<Eigen::Index>(i) * d, d) = rows[i];
  }
  return ad::Tensor::from({static_cast<int>(rows.size()), static_cast<int>(d)}, std::move(data));
}

ad::Tensor row_tensor(const Eigen::VectorXd& row) {
  return ad::Tensor::from({1, static_cast<int>(row.size())}, row);
}

}  // namespace tsc
