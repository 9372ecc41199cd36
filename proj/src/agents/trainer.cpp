#include "tsc/agents/trainer.hpp"

#include <fstream>
#include <stdexcept>

namespace tsc {

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::Fixed: return "fixed";
    case Algo::Ippo: return "ippo";
    case Algo::Mappo: return "mappo";
    case Algo::Idqn: return "idqn";
    case Algo::MacLight: return "maclight";
  }
  return "?";
}

Algo algo_from_string(std::string_view s) {
  for (auto a : {Algo::Fixed, Algo::Ippo, Algo::Mappo, Algo::Idqn, Algo::MacLight}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

Trainer::Trainer(const TrafficEnv& env, AgentConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      agents_(env.agents()),
      obs_dim_(kObservationSize),
      actions_(env.sim().phases().size()),
      rng_(seed),
      fixed_(cfg_.fixed_period_s, actions_, env.sim().phases().min_hold_s) {
  cfg_.ppo.validate();
  const bool ppo = cfg_.algo == Algo::Ippo || cfg_.algo == Algo::Mappo || cfg_.algo == Algo::MacLight;
  if (cfg_.algo == Algo::MacLight) {
    cfg_.vae.in_channels = obs_dim_;
    cfg_.vae.grid_rows = env.network().grid_rows();
    cfg_.vae.grid_cols = env.network().grid_cols();
    vae_ = std::make_unique<Vae>(cfg_.vae, rng_);
  }
  if (ppo) {
    for (int k = 0; k < agents_; ++k) {
      actors_.push_back(make_policy_net(obs_dim_, actions_, rng_));
      actor_opts_.emplace_back(actors_.back().parameters(), ad::AdamConfig{cfg_.ppo.actor_lr});
    }
    const int n_critics = cfg_.algo == Algo::Mappo ? 1 : agents_;
    for (int k = 0; k < n_critics; ++k) {
      critics_.push_back(make_value_net(critic_input_dim(), rng_));
      critic_opts_.emplace_back(critics_.back().parameters(), ad::AdamConfig{cfg_.ppo.critic_lr});
    }
  }
  if (cfg_.algo == Algo::Idqn) {
    for (int k = 0; k < agents_; ++k) dqn_.emplace_back(obs_dim_, actions_, cfg_.idqn, rng_);
  }
}

int Trainer::critic_input_dim() const {
  switch (cfg_.algo) {
    case Algo::MacLight: return cfg_.vae.latent + obs_dim_;
    case Algo::Mappo: return agents_ * obs_dim_;
    default: return obs_dim_;
  }
}

int Trainer::choose(int k, const Eigen::VectorXd& obs, double clock_s, bool learn, bool greedy, double* log_prob) {
  switch (cfg_.algo) {
    case Algo::Fixed: return fixed_.phase_at(clock_s);
    case Algo::Idqn: {
      const double eps = (learn && !greedy) ? epsilon_at(env_steps_, total_steps_, cfg_.idqn) : 0.0;
      return dqn_[static_cast<std::size_t>(k)].act(obs, eps, rng_);
    }
    default: {
      const auto r = act(actors_[static_cast<std::size_t>(k)], obs, greedy, rng_);
      *log_prob = r.log_prob;
      return r.action;
    }
  }
}

EpisodeResult Trainer::run_episode(TrafficEnv& env, std::vector<Trip> demand, std::vector<BlockEvent> blocks,
                                   bool learn, bool greedy) {
  const bool ppo = !actors_.empty();
  const auto K = static_cast<std::size_t>(agents_);
  EpisodeResult out;
  out.agent_returns.assign(K, 0.0);
  std::vector<PpoBatch> batches(ppo ? K : 0);

  auto critic_input = [&](const StepResult& r, std::size_t k, const Eigen::VectorXd& latent) {
    switch (cfg_.algo) {
      case Algo::MacLight: {
        Eigen::VectorXd v(latent.size() + obs_dim_);
        v << latent, r.observations[k];
        return v;
      }
      case Algo::Mappo: {
        Eigen::VectorXd v(static_cast<Eigen::Index>(K) * obs_dim_);
        for (std::size_t j = 0; j < K; ++j) v.segment(static_cast<Eigen::Index>(j) * obs_dim_, obs_dim_) = r.observations[j];
        return v;
      }
      default: return Eigen::VectorXd(r.observations[k]);
    }
  };

  StepResult cur = env.reset(std::move(demand), std::move(blocks));
  double queue_sum = 0.0, speed_sum = 0.0, vae_sum = 0.0;
  std::vector<int> actions(K);
  std::vector<double> log_probs(K, 0.0);
  while (!cur.done) {
    Eigen::VectorXd latent;
    if (vae_) {
      if (learn) {
        const auto step = vae_->train_step(cur.global, rng_);
        latent = step.mu;
        vae_sum += step.losses.total;
      } else {
        latent = vae_->latent(cur.global);
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      actions[k] = choose(static_cast<int>(k), cur.observations[k], cur.metrics.clock_s, learn, greedy, &log_probs[k]);
    }
    StepResult next = env.step(actions);
    ++out.steps;
    if (learn) ++env_steps_;
    out.wait += next.metrics.total_waiting_s;
    queue_sum += next.metrics.halting;
    speed_sum += next.metrics.mean_speed_mps;
    for (std::size_t k = 0; k < K; ++k) {
      out.agent_returns[k] += next.rewards[k];
      out.ret += next.rewards[k];
    }

    if (learn && ppo) {
      for (std::size_t k = 0; k < K; ++k) {
        auto& b = batches[k];
        b.obs.push_back(cur.observations[k]);
        b.actions.push_back(actions[k]);
        b.old_log_probs.push_back(log_probs[k]);
        b.rewards.push_back(cfg_.ppo.reward_scale * next.rewards[k]);
        b.dones.push_back(next.done);
        b.critic_inputs.push_back(critic_input(cur, k, latent));
      }
    }
    if (learn && !dqn_.empty()) {
      double loss = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        auto& agent = dqn_[k];
        agent.buffer.push({cur.observations[k], actions[k], cfg_.idqn.reward_scale * next.rewards[k],
                           next.observations[k], next.done});
        if (auto l = agent.update(rng_)) loss += *l;
      }
      out.critic_loss += loss / static_cast<double>(K);
    }
    cur = std::move(next);
  }

  if (out.steps > 0) {
    out.queue = queue_sum / out.steps;
    out.speed = speed_sum / out.steps;
    out.vae_loss = vae_sum / out.steps;
    if (!dqn_.empty()) out.critic_loss /= out.steps;
  }
  if (learn && ppo && out.steps > 0) {
    Eigen::VectorXd latent;
    if (vae_) latent = vae_->latent(cur.global);
    for (std::size_t k = 0; k < K; ++k) batches[k].critic_inputs.push_back(critic_input(cur, k, latent));
    update_ppo(batches, out);
  }
  return out;
}

void Trainer::update_ppo(std::vector<PpoBatch>& batches, EpisodeResult& out) {
  const auto K = batches.size();
  const bool shared = critics_.size() == 1 && K > 1;
  std::vector<Eigen::VectorXd> pooled_inputs;
  std::vector<double> pooled_targets;
  double actor_loss = 0.0, critic_loss = 0.0;
  // advantages use the critic as it was at collection time, before any update
  std::vector<AdvantageTargets> at(K);
  for (std::size_t k = 0; k < K; ++k) {
    at[k] = advantages_and_targets(critics_[shared ? 0 : k], batches[k], cfg_.ppo);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const auto& b = batches[k];
    const Eigen::VectorXd adv = cfg_.ppo.normalize_advantages
                                    ? normalized(at[k].advantages)
                                    : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                          at[k].advantages.data(), static_cast<Eigen::Index>(at[k].advantages.size())));
    actor_loss += actor_update(actors_[k], actor_opts_[k], b, adv, cfg_.ppo);
    std::vector<Eigen::VectorXd> inputs(b.critic_inputs.begin(), b.critic_inputs.end() - 1);
    if (shared) {
      pooled_inputs.insert(pooled_inputs.end(), inputs.begin(), inputs.end());
      pooled_targets.insert(pooled_targets.end(), at[k].targets.begin(), at[k].targets.end());
    } else {
      critic_loss += critic_update(critics_[k], critic_opts_[k], inputs, at[k].targets, cfg_.ppo.epochs);
    }
  }
  if (shared) {
    critic_loss = critic_update(critics_[0], critic_opts_[0], pooled_inputs, pooled_targets, cfg_.ppo.epochs) * K;
  }
  out.actor_loss = actor_loss / static_cast<double>(K);
  out.critic_loss = critic_loss / static_cast<double>(K);
}

ad::NamedParams Trainer::named_parameters() const {
  ad::NamedParams out;
  for (std::size_t k = 0; k < actors_.size(); ++k) {
    auto p = actors_[k].named_parameters("actor." + std::to_string(k) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  for (std::size_t k = 0; k < critics_.size(); ++k) {
    auto p = critics_[k].named_parameters("critic." + std::to_string(k) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  for (std::size_t k = 0; k < dqn_.size(); ++k) {
    auto p = dqn_[k].q.named_parameters("q." + std::to_string(k) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  if (vae_) {
    for (auto& [n, t] : vae_->named_parameters()) out.emplace_back("vae." + n, t);
  }
  return out;
}

nlohmann::json Trainer::checkpoint() const {
  return {{"algo", to_string(cfg_.algo)}, {"agents", agents_}, {"tensors", ad::params_to_json(named_parameters())}};
}

void Trainer::load_checkpoint(const nlohmann::json& doc) {
  const auto algo = doc.at("algo").get<std::string>();
  if (algo != to_string(cfg_.algo)) {
    throw std::invalid_argument("checkpoint is for '" + algo + "', not '" + std::string(to_string(cfg_.algo)) + "'");
  }
  if (doc.at("agents").get<int>() != agents_) throw std::invalid_argument("checkpoint agent count does not match the network");
  ad::params_from_json(named_parameters(), doc.at("tensors"));
  for (auto& a : dqn_) a.sync_target();
}

void Trainer::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f << checkpoint().dump();
}

void Trainer::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  load_checkpoint(nlohmann::json::parse(f));
}

}  // namespace tsc
