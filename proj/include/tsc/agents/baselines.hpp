#pragma once

#include <optional>
#include <random>
#include <vector>

#include "tsc/agents/nets.hpp"

namespace tsc {

/// Cycles phases 0..n-1 on a wall-clock schedule: phase(t) = floor(t / period) mod n.
class FixedTimeController {
 public:
  explicit FixedTimeController(double period_s = 45.0, int phases = 8, double min_hold_s = 10.0);

  int phase_at(double clock_s) const;
  double period() const { return period_; }
  double cycle_length() const { return period_ * phases_; }

 private:
  double period_;
  int phases_;
};

struct IdqnConfig {
  int buffer_size = 50000;
  int batch_size = 64;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.3;  // share of total training steps spent decaying
  int target_sync = 500;      // gradient updates between hard syncs
  double lr = 1e-3;
  double gamma = 0.99;
  double reward_scale = 0.01;
};

struct Transition {
  Eigen::VectorXd s;
  int a = 0;
  double r = 0.0;
  Eigen::VectorXd s2;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

double td_target(double r, double gamma, double max_next_q, bool done);

/// Linear decay from eps_start to eps_end over eps_fraction of `total_steps`.
double epsilon_at(long step, long total_steps, const IdqnConfig& cfg);

class IdqnAgent {
 public:
  IdqnAgent(int obs_dim, int actions, const IdqnConfig& cfg, std::mt19937_64& rng);

  int act(const Eigen::VectorXd& obs, double epsilon, std::mt19937_64& rng) const;
  /// One TD step on a uniform minibatch; nullopt while the buffer is underfull.
  std::optional<double> update(std::mt19937_64& rng);
  void sync_target();

  Mlp q;
  Mlp target;
  ad::Adam opt;
  ReplayBuffer buffer;
  IdqnConfig cfg;
  long updates = 0;
};

}  // namespace tsc
