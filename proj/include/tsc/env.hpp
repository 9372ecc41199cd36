#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tsc/microsim.hpp"

namespace tsc {

inline constexpr int kObservationSize = kPhaseCount + 1 + 2 * kIncomingLanes;  // 33

/// one_hot(phase, 8) | can_switch | lane density (12) | halting density (12).
/// Lanes are ordered by approach N, E, S, W, then lane 0..2.
using Observation = Eigen::VectorXd;

enum class RewardKind { WaitingDiff, Pressure, Queue, Speed, WaitingTotal };

std::string_view to_string(RewardKind k);
RewardKind reward_kind_from_string(std::string_view s);

/// Everything a reward needs to know about one intersection at one instant.
struct NodeProbe {
  double waiting_s = 0.0;  // W: accumulated wait of halting vehicles on incoming lanes
  int halting = 0;
  int incoming = 0;
  int outgoing = 0;
  double mean_in_speed_mps = 0.0;  // 0 when there are no incoming vehicles
};

Observation observe(const Simulator& sim, NodeId node);
NodeProbe probe(const Simulator& sim, NodeId node);

/// Requests phase `a` at `node`; disallowed switches are ignored.
void apply_action(Simulator& sim, NodeId node, int a);

double reward(const NodeProbe& prev, const NodeProbe& now, RewardKind kind, double free_speed_mps);

/// Observations stacked by grid position, channel-major (C x H x W) so it can
/// be fed to a convolution directly. Row 0 is the southern row of the grid.
struct GlobalMatrix {
  int channels = kObservationSize;
  int rows = 0;
  int cols = 0;
  Eigen::VectorXd data;

  double& at(int i, int j, int c) { return data[(c * rows + i) * cols + j]; }
  double at(int i, int j, int c) const { return data[(c * rows + i) * cols + j]; }
  Observation cell(int i, int j) const;
};

GlobalMatrix build_global_matrix(const std::map<NodeId, Observation>& observations, const RoadNetwork& net);
/// Observations given in agent order (net.signalized()).
GlobalMatrix build_global_matrix(const std::vector<Observation>& observations, const RoadNetwork& net);

struct EnvConfig {
  double decision_interval_s = 5.0;
  double horizon_s = 3600.0;
  RewardKind reward = RewardKind::WaitingDiff;
  SimConfig sim;
};

/// System indicators sampled at the end of a decision step.
struct StepMetrics {
  double clock_s = 0.0;
  double total_waiting_s = 0.0;
  int halting = 0;
  double mean_speed_mps = 0.0;
  int spawned = 0;
  int arrived = 0;
  int running = 0;
  int delayed = 0;
};

struct StepResult {
  std::vector<Observation> observations;  // agent order
  std::vector<double> rewards;
  GlobalMatrix global;
  bool done = false;
  StepMetrics metrics;
};

/// Multi-agent wrapper: agent k controls net.signalized()[k].
class TrafficEnv {
 public:
  TrafficEnv(const RoadNetwork& net, PhaseTable phases, EnvConfig cfg = {});

  StepResult reset(std::vector<Trip> demand, std::vector<BlockEvent> blocks = {});
  /// One action per agent; a negative action leaves the signal alone.
  StepResult step(const std::vector<int>& actions);
  StepResult step(const std::map<NodeId, int>& actions);

  int agents() const { return static_cast<int>(net_->signalized().size()); }
  int steps_per_episode() const;
  const Simulator& sim() const { return sim_; }
  Simulator& sim() { return sim_; }
  const RoadNetwork& network() const { return *net_; }
  const EnvConfig& config() const { return cfg_; }
  /// W per agent at the last reset.
  const std::vector<double>& initial_waiting() const { return initial_waiting_; }
  std::vector<double> current_waiting() const;

 private:
  StepResult snapshot(std::vector<double> rewards, const TickMetrics& last);

  const RoadNetwork* net_;
  EnvConfig cfg_;
  Simulator sim_;
  std::vector<NodeProbe> probes_;
  std::vector<double> initial_waiting_;
};

}  // namespace tsc
