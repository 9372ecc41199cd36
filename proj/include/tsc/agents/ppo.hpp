#pragma once

#include <random>
#include <vector>

#include "tsc/agents/nets.hpp"

namespace tsc {

struct PpoConfig {
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double lambda = 0.95;
  double gamma = 0.99;
  int epochs = 10;
  double clip_eps = 0.2;
  double entropy_coef = 0.0;
  /// Multiplies env rewards before they reach the learner.
  double reward_scale = 0.01;
  bool normalize_advantages = true;

  void validate() const;
};

/// delta_t = r_t + gamma * V_{t+1} - V_t; `values` has one more entry than
/// `rewards` (0 after a terminal step).
std::vector<double> deltas(const std::vector<double>& rewards, const std::vector<double>& values, double gamma);

/// Backward recursion A_t = delta_t + gamma * lambda * A_{t+1}.
std::vector<double> gae(const std::vector<double>& deltas, double gamma, double lambda);

/// Mean over samples of min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A),
/// ratio = exp(log_probs - old_log_probs). An objective to maximize.
ad::Tensor clipped_surrogate(const ad::Tensor& log_probs, const Eigen::VectorXd& old_log_probs,
                             const Eigen::VectorXd& advantages, double clip_eps);

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  Eigen::VectorXd probs;
};

/// Samples from softmax(logits), or takes the argmax (lowest index on ties).
ActResult act_from_logits(const Eigen::VectorXd& logits, bool greedy, std::mt19937_64& rng);
ActResult act(const Mlp& policy, const Eigen::VectorXd& obs, bool greedy, std::mt19937_64& rng);

/// One agent's episode. `critic_inputs` holds T + 1 states (the last one is
/// only bootstrapped when the final step is not terminal).
struct PpoBatch {
  std::vector<Eigen::VectorXd> obs;
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> rewards;  // already scaled
  std::vector<bool> dones;
  std::vector<Eigen::VectorXd> critic_inputs;

  std::size_t size() const { return actions.size(); }
  void clear();
};

struct AdvantageTargets {
  std::vector<double> advantages;  // raw GAE
  std::vector<double> targets;     // r_t + gamma * V_old(s_{t+1}) * (1 - done_t)
};

AdvantageTargets advantages_and_targets(const Mlp& value, const PpoBatch& batch, const PpoConfig& cfg);

Eigen::VectorXd normalized(const std::vector<double>& v);

/// `epochs` full-batch steps on the clipped objective. Returns the final loss.
double actor_update(const Mlp& policy, ad::Adam& opt, const PpoBatch& batch, const Eigen::VectorXd& advantages,
                    const PpoConfig& cfg);
/// `epochs` full-batch steps of mean squared error against frozen targets.
double critic_update(const Mlp& value, ad::Adam& opt, const std::vector<Eigen::VectorXd>& inputs,
                     const std::vector<double>& targets, int epochs);

struct PpoStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
};

/// Actor and critic with their optimizers.
class PpoAgent {
 public:
  PpoAgent(int obs_dim, int critic_dim, int actions, const PpoConfig& cfg, std::mt19937_64& rng);

  PpoStats update(const PpoBatch& batch);

  Mlp policy;
  Mlp value;
  ad::Adam actor_opt;
  ad::Adam critic_opt;
  PpoConfig cfg;
};

}  // namespace tsc
