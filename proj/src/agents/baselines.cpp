#include "tsc/agents/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsc {

FixedTimeController::FixedTimeController(double period_s, int phases, double min_hold_s)
    : period_(period_s), phases_(phases) {
  if (period_s < min_hold_s) throw std::invalid_argument("fixed-time period shorter than the min-hold");
  if (phases < 1) throw std::invalid_argument("fixed-time controller needs at least one phase");
}

int FixedTimeController::phase_at(double clock_s) const {
  const auto slot = static_cast<long>(std::floor(clock_s / period_ + 1e-9));
  return static_cast<int>(slot % phases_);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (data_.empty()) throw std::logic_error("sampling an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &data_[pick(rng)];
  return out;
}

double td_target(double r, double gamma, double max_next_q, bool done) {
  return done ? r : r + gamma * max_next_q;
}

double epsilon_at(long step, long total_steps, const IdqnConfig& cfg) {
  const double horizon = std::max(1.0, cfg.eps_fraction * static_cast<double>(total_steps));
  const double frac = static_cast<double>(step) / horizon;
  if (frac >= 1.0) return cfg.eps_end;
  return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
}

IdqnAgent::IdqnAgent(int obs_dim, int actions, const IdqnConfig& c, std::mt19937_64& rng)
    : q(make_policy_net(obs_dim, actions, rng)),
      target(make_policy_net(obs_dim, actions, rng)),
      opt(q.parameters(), {c.lr}),
      buffer(static_cast<std::size_t>(c.buffer_size)),
      cfg(c) {
  sync_target();
}

int IdqnAgent::act(const Eigen::VectorXd& obs, double epsilon, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, q.out_dim() - 1);
    return pick(rng);
  }
  ad::NoGradGuard guard;
  Eigen::Index best = 0;
  q.forward(row_tensor(obs)).value().maxCoeff(&best);
  return static_cast<int>(best);
}

std::optional<double> IdqnAgent::update(std::mt19937_64& rng) {
  if (buffer.size() < static_cast<std::size_t>(cfg.batch_size)) return std::nullopt;
  const auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng);
  std::vector<Eigen::VectorXd> s, s2;
  std::vector<int> a;
  for (const auto* t : batch) {
    s.push_back(t->s);
    s2.push_back(t->s2);
    a.push_back(t->a);
  }
  const int n = static_cast<int>(batch.size());
  Eigen::VectorXd y(n);
  {
    ad::NoGradGuard guard;
    const Eigen::VectorXd next = target.forward(rows_tensor(s2)).value();
    const int m = target.out_dim();
    for (int i = 0; i < n; ++i) {
      const double best = next.segment(static_cast<Eigen::Index>(i) * m, m).maxCoeff();
      y[i] = td_target(batch[static_cast<std::size_t>(i)]->r, cfg.gamma, best, batch[static_cast<std::size_t>(i)]->done);
    }
  }
  const ad::Tensor qsa = ad::gather_cols(q.forward(rows_tensor(s)), a);
  const ad::Tensor loss = ad::mean(ad::square(ad::sub(qsa, ad::Tensor::from({n}, y))));
  opt.zero_grad();
  loss.backward();
  opt.step();
  if (++updates % cfg.target_sync == 0) sync_target();
  return loss.item();
}

void IdqnAgent::sync_target() { ad::copy_params(q.named_parameters(""), target.named_parameters("")); }

}  // namespace tsc
