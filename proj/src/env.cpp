#include "tsc/env.hpp"

#include <cmath>
#include <stdexcept>

namespace tsc {

std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::WaitingDiff: return "waiting_diff";
    case RewardKind::Pressure: return "pressure";
    case RewardKind::Queue: return "queue";
    case RewardKind::Speed: return "speed";
    case RewardKind::WaitingTotal: return "waiting_total";
  }
  return "?";
}

RewardKind reward_kind_from_string(std::string_view s) {
  for (auto k : {RewardKind::WaitingDiff, RewardKind::Pressure, RewardKind::Queue, RewardKind::Speed,
                 RewardKind::WaitingTotal}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown reward kind '" + std::string(s) + "'");
}

namespace {

void require_signalized(const Simulator& sim, NodeId node) {
  const auto& net = sim.network();
  if (node < 0 || static_cast<std::size_t>(node) >= net.nodes().size()) {
    throw std::out_of_range("unknown node id " + std::to_string(node));
  }
  if (!net.node(node).has_signal) throw std::invalid_argument("node " + net.node(node).name + " has no signal");
}

}  // namespace

Observation observe(const Simulator& sim, NodeId node) {
  require_signalized(sim, node);
  const auto& net = sim.network();
  const auto& sig = sim.state().signals[static_cast<std::size_t>(node)];
  Observation o = Observation::Zero(kObservationSize);
  o[sig.shown_phase()] = 1.0;
  o[kPhaseCount] = sim.can_switch(node) ? 1.0 : 0.0;
  for (int arm = 0; arm < kApproaches; ++arm) {
    const EdgeId e = net.incoming(node, static_cast<Approach>(arm));
    if (e < 0) continue;
    const double cap = sim.lane_capacity(e);
    for (int l = 0; l < kLanesPerEdge; ++l) {
      const auto s = sim.lane_stats(e, l);
      const int slot = arm * kLanesPerEdge + l;
      o[kPhaseCount + 1 + slot] = s.vehicle_count / cap;
      o[kPhaseCount + 1 + kIncomingLanes + slot] = s.halting_count / cap;
    }
  }
  return o;
}

NodeProbe probe(const Simulator& sim, NodeId node) {
  require_signalized(sim, node);
  const auto& net = sim.network();
  NodeProbe p;
  double speed = 0.0;
  for (EdgeId e : net.in_edges(node)) {
    for (int l = 0; l < kLanesPerEdge; ++l) {
      const auto s = sim.lane_stats(e, l);
      p.incoming += s.vehicle_count;
      p.halting += s.halting_count;
      speed += s.mean_speed_mps * s.vehicle_count;
    }
  }
  for (EdgeId e : net.out_edges(node)) {
    for (int l = 0; l < kLanesPerEdge; ++l) p.outgoing += sim.lane_stats(e, l).vehicle_count;
  }
  p.mean_in_speed_mps = p.incoming > 0 ? speed / p.incoming : 0.0;
  p.waiting_s = sim.waiting_at(node);
  return p;
}

void apply_action(Simulator& sim, NodeId node, int a) {
  require_signalized(sim, node);
  if (a < 0 || a >= sim.phases().size()) throw std::out_of_range("action " + std::to_string(a) + " out of range");
  sim.request_phase(node, a);
}

double reward(const NodeProbe& prev, const NodeProbe& now, RewardKind kind, double free_speed_mps) {
  switch (kind) {
    case RewardKind::WaitingDiff: return prev.waiting_s - now.waiting_s;
    case RewardKind::Pressure: return -std::abs(static_cast<double>(now.incoming - now.outgoing));
    case RewardKind::Queue: return -static_cast<double>(now.halting);
    case RewardKind::Speed: return now.incoming > 0 ? now.mean_in_speed_mps / free_speed_mps : 1.0;
    case RewardKind::WaitingTotal: return -now.waiting_s;
  }
  return 0.0;
}

Observation GlobalMatrix::cell(int i, int j) const {
  Observation o(channels);
  for (int c = 0; c < channels; ++c) o[c] = at(i, j, c);
  return o;
}

GlobalMatrix build_global_matrix(const std::map<NodeId, Observation>& observations, const RoadNetwork& net) {
  std::vector<Observation> ordered;
  ordered.reserve(net.signalized().size());
  for (NodeId n : net.signalized()) {
    auto it = observations.find(n);
    if (it == observations.end()) throw std::invalid_argument("no observation for node " + net.node(n).name);
    ordered.push_back(it->second);
  }
  return build_global_matrix(ordered, net);
}

GlobalMatrix build_global_matrix(const std::vector<Observation>& observations, const RoadNetwork& net) {
  if (observations.size() != net.signalized().size()) {
    throw std::invalid_argument("expected " + std::to_string(net.signalized().size()) + " observations, got " +
                                std::to_string(observations.size()));
  }
  GlobalMatrix g;
  g.rows = net.grid_rows();
  g.cols = net.grid_cols();
  g.data = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.channels) * g.rows * g.cols);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto& o = observations[k];
    if (o.size() != g.channels) throw std::invalid_argument("observation has wrong length");
    const int i = static_cast<int>(k) / g.cols;
    const int j = static_cast<int>(k) % g.cols;
    for (int c = 0; c < g.channels; ++c) g.at(i, j, c) = o[c];
  }
  return g;
}

// ---------------------------------------------------------------------------

TrafficEnv::TrafficEnv(const RoadNetwork& net, PhaseTable phases, EnvConfig cfg)
    : net_(&net), cfg_(cfg), sim_(net, std::move(phases), cfg.sim) {
  if (!(cfg_.decision_interval_s >= cfg_.sim.dt_s)) throw std::invalid_argument("decision interval shorter than dt");
  if (!(cfg_.horizon_s > 0.0)) throw std::invalid_argument("horizon must be positive");
}

int TrafficEnv::steps_per_episode() const {
  return static_cast<int>(std::ceil(cfg_.horizon_s / cfg_.decision_interval_s - 1e-9));
}

StepResult TrafficEnv::reset(std::vector<Trip> demand, std::vector<BlockEvent> blocks) {
  sim_.reset(std::move(demand), std::move(blocks));
  probes_.clear();
  initial_waiting_.clear();
  for (NodeId n : net_->signalized()) {
    probes_.push_back(probe(sim_, n));
    initial_waiting_.push_back(probes_.back().waiting_s);
  }
  return snapshot(std::vector<double>(probes_.size(), 0.0), TickMetrics{});
}

StepResult TrafficEnv::step(const std::vector<int>& actions) {
  const auto& nodes = net_->signalized();
  if (actions.size() != nodes.size()) {
    throw std::invalid_argument("expected " + std::to_string(nodes.size()) + " actions, got " +
                                std::to_string(actions.size()));
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (actions[k] >= 0) apply_action(sim_, nodes[k], actions[k]);
  }
  TickMetrics last;
  const int ticks = static_cast<int>(std::lround(cfg_.decision_interval_s / cfg_.sim.dt_s));
  for (int t = 0; t < ticks && sim_.state().clock_s + 1e-9 < cfg_.horizon_s; ++t) last = sim_.step();

  std::vector<double> rewards(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const NodeProbe now = probe(sim_, nodes[k]);
    rewards[k] = reward(probes_[k], now, cfg_.reward, cfg_.sim.free_speed_mps);
    probes_[k] = now;
  }
  return snapshot(std::move(rewards), last);
}

StepResult TrafficEnv::step(const std::map<NodeId, int>& actions) {
  std::vector<int> ordered;
  ordered.reserve(net_->signalized().size());
  for (NodeId n : net_->signalized()) {
    auto it = actions.find(n);
    if (it == actions.end()) throw std::invalid_argument("no action for node " + net_->node(n).name);
    ordered.push_back(it->second);
  }
  return step(ordered);
}

std::vector<double> TrafficEnv::current_waiting() const {
  std::vector<double> w;
  for (NodeId n : net_->signalized()) w.push_back(sim_.waiting_at(n));
  return w;
}

StepResult TrafficEnv::snapshot(std::vector<double> rewards, const TickMetrics& last) {
  StepResult r;
  r.observations.reserve(net_->signalized().size());
  for (NodeId n : net_->signalized()) r.observations.push_back(observe(sim_, n));
  r.rewards = std::move(rewards);
  r.global = build_global_matrix(r.observations, *net_);
  r.done = sim_.state().clock_s + 1e-9 >= cfg_.horizon_s;
  r.metrics.clock_s = sim_.state().clock_s;
  r.metrics.total_waiting_s = last.total_waiting_s;
  r.metrics.halting = last.halting;
  r.metrics.mean_speed_mps = last.mean_speed_mps;
  r.metrics.spawned = sim_.state().spawned;
  r.metrics.arrived = sim_.state().arrived;
  r.metrics.running = last.running;
  r.metrics.delayed = static_cast<int>(sim_.state().delayed.size());
  return r;
}

}  // namespace tsc
