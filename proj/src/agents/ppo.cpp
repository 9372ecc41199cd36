#include "tsc/agents/ppo.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tsc {

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (actor_lr < 0.0 || critic_lr < 0.0) throw std::invalid_argument("learning rates must be non-negative");
}

std::vector<double> deltas(const std::vector<double>& rewards, const std::vector<double>& values, double gamma) {
  if (values.size() != rewards.size() + 1) {
    throw std::invalid_argument("deltas: expected " + std::to_string(rewards.size() + 1) + " values, got " +
                                std::to_string(values.size()));
  }
  std::vector<double> d(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) d[t] = rewards[t] + gamma * values[t + 1] - values[t];
  return d;
}

std::vector<double> gae(const std::vector<double>& deltas, double gamma, double lambda) {
  std::vector<double> adv(deltas.size());
  double running = 0.0;
  for (std::size_t t = deltas.size(); t-- > 0;) {
    running = deltas[t] + gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

ad::Tensor clipped_surrogate(const ad::Tensor& log_probs, const Eigen::VectorXd& old_log_probs,
                             const Eigen::VectorXd& advantages, double clip_eps) {
  const ad::Shape shape = log_probs.shape();
  if (old_log_probs.size() != log_probs.numel() || advantages.size() != log_probs.numel()) {
    throw std::invalid_argument("clipped_surrogate: batch size mismatch");
  }
  const ad::Tensor old = ad::Tensor::from(shape, old_log_probs);
  const ad::Tensor adv = ad::Tensor::from(shape, advantages);
  const ad::Tensor ratio = ad::exp(ad::sub(log_probs, old));
  const ad::Tensor plain = ad::mul(ratio, adv);
  const ad::Tensor clipped = ad::mul(ad::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv);
  return ad::mean(ad::minimum(plain, clipped));
}

ActResult act_from_logits(const Eigen::VectorXd& logits, bool greedy, std::mt19937_64& rng) {
  ActResult r;
  const double mx = logits.maxCoeff();
  r.probs = (logits.array() - mx).exp();
  const double z = r.probs.sum();
  r.probs /= z;
  if (greedy) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    r.action = static_cast<int>(best);
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double draw = u(rng);
    double acc = 0.0;
    r.action = static_cast<int>(logits.size()) - 1;
    for (Eigen::Index i = 0; i < r.probs.size(); ++i) {
      acc += r.probs[i];
      if (draw < acc) {
        r.action = static_cast<int>(i);
        break;
      }
    }
  }
  r.log_prob = logits[r.action] - mx - std::log(z);
  return r;
}

ActResult act(const Mlp& policy, const Eigen::VectorXd& obs, bool greedy, std::mt19937_64& rng) {
  ad::NoGradGuard guard;
  return act_from_logits(policy.forward(row_tensor(obs)).value(), greedy, rng);
}

void PpoBatch::clear() {
  obs.clear();
  actions.clear();
  old_log_probs.clear();
  rewards.clear();
  dones.clear();
  critic_inputs.clear();
}

AdvantageTargets advantages_and_targets(const Mlp& value, const PpoBatch& batch, const PpoConfig& cfg) {
  const std::size_t T = batch.size();
  if (batch.rewards.size() != T || batch.dones.size() != T || batch.critic_inputs.size() != T + 1) {
    throw std::invalid_argument("ppo batch has inconsistent lengths");
  }
  Eigen::VectorXd v;
  {
    ad::NoGradGuard guard;
    v = value.forward(rows_tensor(batch.critic_inputs)).value();
  }
  std::vector<double> values(T + 1);
  for (std::size_t t = 0; t < T; ++t) values[t] = v[static_cast<Eigen::Index>(t)];
  values[T] = v[static_cast<Eigen::Index>(T)];

  AdvantageTargets out;
  out.targets.resize(T);
  std::vector<double> d(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double next = batch.dones[t] ? 0.0 : values[t + 1];
    out.targets[t] = batch.rewards[t] + cfg.gamma * next;
    d[t] = out.targets[t] - values[t];
  }
  // a terminal step cuts the recursion as well
  out.advantages.resize(T);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    running = d[t] + (batch.dones[t] ? 0.0 : cfg.gamma * cfg.lambda * running);
    out.advantages[t] = running;
  }
  return out;
}

Eigen::VectorXd normalized(const std::vector<double>& v) {
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  if (a.size() < 2) return a;
  const double m = a.mean();
  const double sd = std::sqrt((a.array() - m).square().sum() / static_cast<double>(a.size() - 1));
  return (a.array() - m) / (sd + 1e-8);
}

namespace {

void check_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << what << " became non-finite (" << v << ") at epoch " << epoch;
    throw std::runtime_error(msg.str());
  }
}

}  // namespace

double actor_update(const Mlp& policy, ad::Adam& opt, const PpoBatch& batch, const Eigen::VectorXd& advantages,
                    const PpoConfig& cfg) {
  const ad::Tensor obs = rows_tensor(batch.obs);
  const Eigen::VectorXd old = Eigen::Map<const Eigen::VectorXd>(batch.old_log_probs.data(),
                                                                static_cast<Eigen::Index>(batch.old_log_probs.size()));
  double last = 0.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    const ad::Tensor logp_all = ad::log_softmax(policy.forward(obs));
    const ad::Tensor logp = ad::gather_cols(logp_all, batch.actions);
    ad::Tensor loss = ad::scale(clipped_surrogate(logp, old, advantages, cfg.clip_eps), -1.0);
    if (cfg.entropy_coef > 0.0) {
      const ad::Tensor neg_entropy = ad::scale(ad::sum(ad::mul(ad::exp(logp_all), logp_all)), 1.0 / obs.dim(0));
      loss = ad::add(loss, ad::scale(neg_entropy, cfg.entropy_coef));
    }
    last = loss.item();
    check_finite(last, "actor loss", e);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return last;
}

double critic_update(const Mlp& value, ad::Adam& opt, const std::vector<Eigen::VectorXd>& inputs,
                     const std::vector<double>& targets, int epochs) {
  if (inputs.size() != targets.size()) throw std::invalid_argument("critic_update: size mismatch");
  const ad::Tensor x = rows_tensor(inputs);
  const ad::Tensor y = ad::Tensor::from(
      {static_cast<int>(targets.size()), 1},
      Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size())));
  double last = 0.0;
  for (int e = 0; e < epochs; ++e) {
    const ad::Tensor loss = ad::mean(ad::square(ad::sub(value.forward(x), y)));
    last = loss.item();
    check_finite(last, "critic loss", e);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  return last;
}

PpoAgent::PpoAgent(int obs_dim, int critic_dim, int actions, const PpoConfig& c, std::mt19937_64& rng)
    : policy(make_policy_net(obs_dim, actions, rng)),
      value(make_value_net(critic_dim, rng)),
      actor_opt(policy.parameters(), {c.actor_lr}),
      critic_opt(value.parameters(), {c.critic_lr}),
      cfg(c) {
  cfg.validate();
}

PpoStats PpoAgent::update(const PpoBatch& batch) {
  if (batch.size() == 0) return {};
  const auto at = advantages_and_targets(value, batch, cfg);
  const Eigen::VectorXd adv =
      cfg.normalize_advantages ? normalized(at.advantages)
                               : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(at.advantages.data(),
                                                                                   static_cast<Eigen::Index>(at.advantages.size())));
  PpoStats s;
  s.actor_loss = actor_update(policy, actor_opt, batch, adv, cfg);
  std::vector<Eigen::VectorXd> inputs(batch.critic_inputs.begin(), batch.critic_inputs.end() - 1);
  s.critic_loss = critic_update(value, critic_opt, inputs, at.targets, cfg.epochs);
  return s;
}

}  // namespace tsc
