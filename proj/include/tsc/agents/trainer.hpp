#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsc/agents/baselines.hpp"
#include "tsc/agents/ppo.hpp"
#include "tsc/env.hpp"
#include "tsc/vae.hpp"

namespace tsc {

enum class Algo { Fixed, Ippo, Mappo, Idqn, MacLight };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view s);

struct AgentConfig {
  Algo algo = Algo::MacLight;
  PpoConfig ppo;
  IdqnConfig idqn;
  VaeConfig vae;
  double fixed_period_s = 45.0;
};

struct EpisodeResult {
  double ret = 0.0;    // sum over agents and steps of env rewards (unscaled)
  double wait = 0.0;   // sum over steps of system total waiting
  double queue = 0.0;  // mean over steps of total halting vehicles
  double speed = 0.0;  // mean over steps of mean vehicle speed
  std::vector<double> agent_returns;
  int steps = 0;
  double vae_loss = 0.0;  // mean over steps, MacLight only
  double actor_loss = 0.0;
  double critic_loss = 0.0;
};

/// Owns every learner of one run (one seed) and drives episodes on an env.
class Trainer {
 public:
  Trainer(const TrafficEnv& env, AgentConfig cfg, std::uint64_t seed);

  /// learn = false freezes all parameters; greedy picks argmax actions.
  EpisodeResult run_episode(TrafficEnv& env, std::vector<Trip> demand, std::vector<BlockEvent> blocks, bool learn,
                            bool greedy);

  /// Used by the IDQN exploration schedule.
  void set_training_steps(long total) { total_steps_ = total; }

  const AgentConfig& config() const { return cfg_; }
  int agents() const { return agents_; }
  int critic_input_dim() const;

  ad::NamedParams named_parameters() const;
  nlohmann::json checkpoint() const;
  void load_checkpoint(const nlohmann::json& doc);
  void save(const std::string& path) const;
  void load(const std::string& path);

  const std::vector<Mlp>& actors() const { return actors_; }
  const std::vector<Mlp>& critics() const { return critics_; }
  const Vae* vae() const { return vae_.get(); }

 private:
  int choose(int k, const Eigen::VectorXd& obs, double clock_s, bool learn, bool greedy, double* log_prob);
  void update_ppo(std::vector<PpoBatch>& batches, EpisodeResult& out);

  AgentConfig cfg_;
  int agents_;
  int obs_dim_;
  int actions_;
  std::mt19937_64 rng_;
  FixedTimeController fixed_;
  std::vector<Mlp> actors_;
  std::vector<ad::Adam> actor_opts_;
  std::vector<Mlp> critics_;  // one per agent, or a single shared one for MAPPO
  std::vector<ad::Adam> critic_opts_;
  std::vector<IdqnAgent> dqn_;
  std::unique_ptr<Vae> vae_;
  long env_steps_ = 0;
  long total_steps_ = 1;
};

}  // namespace tsc
