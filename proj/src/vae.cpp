#include "tsc/vae.hpp"

#include <cmath>
#include <stdexcept>

namespace tsc {

using ad::Tensor;

LatentSample reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, std::mt19937_64& rng) {
  if (mu.size() != logvar.size()) throw std::invalid_argument("reparameterize: mu and logvar differ in length");
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentSample s{mu, logvar, Eigen::VectorXd(mu.size()), Eigen::VectorXd()};
  for (auto& e : s.eps) e = normal(rng);
  s.z = mu.array() + s.eps.array() * (0.5 * logvar.array()).exp();
  return s;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
  return ad::add(mu, ad::mul(eps, ad::exp(ad::scale(logvar, 0.5))));
}

double bernoulli_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& x_recon) {
  if (x.size() != x_recon.size()) throw std::invalid_argument("bernoulli_nll: size mismatch");
  return -(x.array() * x_recon.array().log() + (1.0 - x.array()) * (1.0 - x_recon.array()).log()).sum();
}

double kl_divergence(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
  return -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
}

VaeLossTensors vae_loss(const Tensor& x, const Tensor& logits, const Tensor& mu, const Tensor& logvar) {
  if (x.value().size() > 0 && (x.value().minCoeff() < 0.0 || x.value().maxCoeff() > 1.0)) {
    throw std::invalid_argument("vae_loss: input entries must lie in [0, 1]");
  }
  const double inv_batch = 1.0 / x.dim(0);
  Tensor recon = ad::scale(ad::sum(ad::bce_with_logits(logits, x)), inv_batch);
  Tensor kl_terms = ad::sub(ad::sub(ad::add_scalar(logvar, 1.0), ad::square(mu)), ad::exp(logvar));
  Tensor kl = ad::scale(ad::sum(kl_terms), -0.5 * inv_batch);
  return {ad::add(recon, kl), recon, kl};
}

namespace {

std::vector<Tensor> collect(const std::vector<std::pair<std::string, Tensor>>& named) {
  std::vector<Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

}  // namespace

Vae::Vae(VaeConfig cfg, std::mt19937_64& rng) : cfg_(std::move(cfg)), opt_({}, {}) {
  const std::size_t depth = cfg_.conv_channels.size();
  if (depth == 0 || cfg_.strides.size() != depth) throw std::invalid_argument("vae: need one stride per conv layer");
  const int k = cfg_.kernel, p = cfg_.padding;

  sizes_.emplace_back(cfg_.grid_rows, cfg_.grid_cols);
  int in_c = cfg_.in_channels;
  for (std::size_t i = 0; i < depth; ++i) {
    const int out_c = cfg_.conv_channels[i];
    const auto [h, w] = sizes_.back();
    sizes_.emplace_back(ad::conv_out_size(h, k, cfg_.strides[i], p), ad::conv_out_size(w, k, cfg_.strides[i], p));
    if (sizes_.back().first < 1 || sizes_.back().second < 1) throw std::invalid_argument("vae: grid too small for the encoder");
    const int fan_in = in_c * k * k;
    // the last conv feeds the latent heads directly, not a ReLU
    Tensor w_t = i + 1 < depth ? ad::kaiming_uniform({out_c, in_c, k, k}, fan_in, rng)
                               : ad::xavier_uniform({out_c, in_c, k, k}, fan_in, out_c * k * k, rng);
    enc_.push_back({w_t, Tensor::zeros({out_c}, true)});
    in_c = out_c;
  }
  flatten_ = in_c * sizes_.back().first * sizes_.back().second;

  const int L = cfg_.latent;
  fc_mu_ = {ad::xavier_uniform({L, flatten_}, flatten_, L, rng), Tensor::zeros({L}, true)};
  fc_logvar_ = {ad::xavier_uniform({L, flatten_}, flatten_, L, rng), Tensor::zeros({L}, true)};
  fc_decode_ = {ad::xavier_uniform({flatten_, L}, L, flatten_, rng), Tensor::zeros({flatten_}, true)};

  // mirror of the encoder: layer i undoes encoder layer depth - 1 - i
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t e = depth - 1 - i;
    const int ci = cfg_.conv_channels[e];
    const int co = e == 0 ? cfg_.in_channels : cfg_.conv_channels[e - 1];
    const int s = cfg_.strides[e];
    const auto [ih, iw] = sizes_[e + 1];
    const auto [th, tw] = sizes_[e];
    const int oph = th - ad::conv_transpose_out_size(ih, k, s, p, 0);
    const int opw = tw - ad::conv_transpose_out_size(iw, k, s, p, 0);
    if (oph < 0 || oph >= s || opw < 0 || opw >= s) throw std::invalid_argument("vae: decoder cannot mirror the encoder");
    output_padding_.emplace_back(oph, opw);
    Tensor w_t = e > 0 ? ad::kaiming_uniform({ci, co, k, k}, ci * k * k, rng)
                       : ad::xavier_uniform({ci, co, k, k}, ci * k * k, co * k * k, rng);
    dec_.push_back({w_t, Tensor::zeros({co}, true)});
  }

  opt_ = ad::Adam(parameters(), {cfg_.lr});
}

Tensor Vae::features(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.grid_rows || x.dim(3) != cfg_.grid_cols) {
    throw std::invalid_argument("vae: expected input [N, " + std::to_string(cfg_.in_channels) + ", " +
                                std::to_string(cfg_.grid_rows) + ", " + std::to_string(cfg_.grid_cols) + "], got " +
                                ad::to_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    h = ad::conv2d(h, enc_[i].w, enc_[i].b, cfg_.strides[i], cfg_.padding);
    if (i + 1 < enc_.size()) h = ad::relu(h);
  }
  return ad::reshape(h, {x.dim(0), flatten_});
}

Vae::Encoded Vae::encode(const Tensor& x) const {
  Tensor h = features(x);
  return {ad::linear(h, fc_mu_.w, fc_mu_.b), ad::linear(h, fc_logvar_.w, fc_logvar_.b)};
}

Vae::Decoded Vae::decode(const Tensor& z) const {
  if (z.rank() != 2 || z.dim(1) != cfg_.latent) {
    throw std::invalid_argument("vae: expected latent [N, " + std::to_string(cfg_.latent) + "], got " +
                                ad::to_string(z.shape()));
  }
  const std::size_t depth = dec_.size();
  const auto [h0, w0] = sizes_.back();
  Tensor h = ad::reshape(ad::linear(z, fc_decode_.w, fc_decode_.b), {z.dim(0), cfg_.conv_channels.back(), h0, w0});
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t e = depth - 1 - i;
    h = ad::conv_transpose2d(h, dec_[i].w, dec_[i].b, cfg_.strides[e], cfg_.padding, output_padding_[i].first,
                             output_padding_[i].second);
    if (i + 1 < depth) h = ad::relu(h);
  }
  return {h, ad::sigmoid(h)};
}

Tensor Vae::as_input(const GlobalMatrix& g) const {
  return Tensor::from({1, g.channels, g.rows, g.cols}, g.data);
}

Vae::StepResult Vae::train_step(const Tensor& x, std::mt19937_64& rng) {
  const auto enc = encode(x);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(enc.mu.numel());
  for (auto& e : eps) e = normal(rng);
  Tensor z = reparameterize(enc.mu, enc.logvar, Tensor::from(enc.mu.shape(), std::move(eps)));
  const auto dec = decode(z);
  const auto loss = vae_loss(x, dec.logits, enc.mu, enc.logvar);

  opt_.zero_grad();
  loss.total.backward();
  opt_.step();

  StepResult r;
  r.mu = enc.mu.value().head(cfg_.latent);
  r.losses = {loss.total.item(), loss.recon.item(), loss.kl.item()};
  return r;
}

Vae::StepResult Vae::train_step(const GlobalMatrix& g, std::mt19937_64& rng) { return train_step(as_input(g), rng); }

Eigen::VectorXd Vae::latent(const GlobalMatrix& g) const {
  ad::NoGradGuard guard;
  return encode(as_input(g)).mu.value();
}

ad::NamedParams Vae::named_parameters() const {
  ad::NamedParams out;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    out.emplace_back("encoder." + std::to_string(i) + ".weight", enc_[i].w);
    out.emplace_back("encoder." + std::to_string(i) + ".bias", enc_[i].b);
  }
  out.emplace_back("fc_mu.weight", fc_mu_.w);
  out.emplace_back("fc_mu.bias", fc_mu_.b);
  out.emplace_back("fc_logvar.weight", fc_logvar_.w);
  out.emplace_back("fc_logvar.bias", fc_logvar_.b);
  out.emplace_back("fc_decode.weight", fc_decode_.w);
  out.emplace_back("fc_decode.bias", fc_decode_.b);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    out.emplace_back("decoder." + std::to_string(i) + ".weight", dec_[i].w);
    out.emplace_back("decoder." + std::to_string(i) + ".bias", dec_[i].b);
  }
  return out;
}

std::vector<Tensor> Vae::parameters() const { return collect(named_parameters()); }

}  // namespace tsc
