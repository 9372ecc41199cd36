#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "tsc/env.hpp"

using namespace tsc;

namespace {

const RoadNetwork& grid() {
  static const RoadNetwork net = build_grid(6, 6, 200.0);
  return net;
}

void park(Simulator& sim, EdgeId e, int lane) {
  auto& st = sim.mutable_state();
  Vehicle v;
  v.id = static_cast<int>(st.vehicles.size());
  v.route = {e};
  v.lane = lane;
  v.status = VehicleStatus::Running;
  st.vehicles.push_back(v);
  st.lanes[static_cast<std::size_t>(st.lane_index(e, lane))].push_back(v.id);
}

}  // namespace

TEST(Observe, EmptyNetworkShowsOnlyThePhase) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = *grid().find_node("C2");
  sim.mutable_state().signals[static_cast<std::size_t>(n)].phase = 2;
  const auto o = observe(sim, n);
  ASSERT_EQ(o.size(), 33);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(33);
  expect[2] = 1.0;
  EXPECT_EQ(o, expect);  // can_switch is 0 at t = 0
}

TEST(Observe, SwitchFlagAfterMinHold) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = grid().signalized()[0];
  for (int t = 0; t < 10; ++t) sim.step();
  EXPECT_DOUBLE_EQ(observe(sim, n)[kPhaseCount], 1.0);
}

TEST(Observe, FullJamSaturatesAllDensities) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = *grid().find_node("D3");
  for (EdgeId e : grid().in_edges(n)) {
    for (int l = 0; l < kLanesPerEdge; ++l) {
      for (int k = 0; k < sim.lane_capacity(e); ++k) park(sim, e, l);
    }
  }
  const auto o = observe(sim, n);
  for (int i = kPhaseCount + 1; i < kObservationSize; ++i) EXPECT_DOUBLE_EQ(o[i], 1.0) << i;
  const auto p = probe(sim, n);
  EXPECT_EQ(p.incoming, 12 * 26);
  EXPECT_EQ(p.halting, 12 * 26);
  EXPECT_EQ(p.outgoing, 0);
}

TEST(Observe, LaneSlotsFollowArmThenLane) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = *grid().find_node("D3");
  park(sim, grid().incoming(n, Approach::South), 2);
  const auto o = observe(sim, n);
  const int slot = 2 * kLanesPerEdge + 2;
  EXPECT_DOUBLE_EQ(o[kPhaseCount + 1 + slot], 1.0 / 26);
  EXPECT_DOUBLE_EQ(o[kPhaseCount + 1 + kIncomingLanes + slot], 1.0 / 26);
  EXPECT_DOUBLE_EQ(o.segment(kPhaseCount + 1, 24).sum(), 2.0 / 26);
}

TEST(Observe, RejectsUnsignalizedAndUnknownNodes) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  EXPECT_THROW(observe(sim, grid().boundary()[0]), std::invalid_argument);
  EXPECT_THROW(observe(sim, 999), std::out_of_range);
}

TEST(Action, SameAndEarlyRequestsAreIgnored) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = grid().signalized()[0];
  const auto& sig = sim.state().signals[static_cast<std::size_t>(n)];
  for (int t = 0; t < 7; ++t) sim.step();
  apply_action(sim, n, 3);
  EXPECT_EQ(sig.phase, 0);
  EXPECT_FALSE(sig.in_yellow());
  for (int t = 7; t < 20; ++t) sim.step();
  apply_action(sim, n, 0);
  EXPECT_FALSE(sig.in_yellow());
  EXPECT_THROW(apply_action(sim, n, 8), std::out_of_range);
  EXPECT_THROW(apply_action(sim, n, -1), std::out_of_range);
}

TEST(Action, ThreeSecondsOfYellowPrecedeTheNewGreen) {
  Simulator sim(grid(), default_phase_table());
  sim.reset({});
  const NodeId n = grid().signalized()[0];
  const Movement ns{Approach::North, Turn::Straight}, ew{Approach::East, Turn::Straight};
  for (int t = 0; t < 10; ++t) sim.step();
  EXPECT_TRUE(sim.movement_green(n, ns));
  apply_action(sim, n, 2);
  for (int t = 0; t < 3; ++t) {
    EXPECT_TRUE(sim.state().signals[static_cast<std::size_t>(n)].in_yellow()) << t;
    EXPECT_FALSE(sim.movement_green(n, ns));
    EXPECT_FALSE(sim.movement_green(n, ew));
    EXPECT_DOUBLE_EQ(observe(sim, n)[2], 1.0);  // committed phase is shown
    sim.step();
  }
  EXPECT_FALSE(sim.state().signals[static_cast<std::size_t>(n)].in_yellow());
  EXPECT_TRUE(sim.movement_green(n, ew));
  EXPECT_FALSE(sim.movement_green(n, ns));
  EXPECT_DOUBLE_EQ(sim.state().signals[static_cast<std::size_t>(n)].time_in_phase_s, 0.0);
}

TEST(Reward, WorkedExamples) {
  NodeProbe prev, now;
  prev.waiting_s = 10;
  now.waiting_s = 4;
  EXPECT_DOUBLE_EQ(reward(prev, now, RewardKind::WaitingDiff, 13.89), 6.0);
  EXPECT_DOUBLE_EQ(reward(now, now, RewardKind::WaitingDiff, 13.89), 0.0);
  now.incoming = now.outgoing = 7;
  EXPECT_DOUBLE_EQ(reward(prev, now, RewardKind::Pressure, 13.89), 0.0);
  now.outgoing = 3;
  EXPECT_DOUBLE_EQ(reward(prev, now, RewardKind::Pressure, 13.89), -4.0);
  now.halting = 5;
  EXPECT_DOUBLE_EQ(reward(prev, now, RewardKind::Queue, 13.89), -5.0);
  EXPECT_DOUBLE_EQ(reward(prev, now, RewardKind::WaitingTotal, 13.89), -4.0);
  for (auto k : {RewardKind::WaitingDiff, RewardKind::Pressure, RewardKind::Queue, RewardKind::Speed,
                 RewardKind::WaitingTotal}) {
    EXPECT_EQ(reward_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(reward_kind_from_string("bogus"), std::invalid_argument);
}

TEST(GlobalMatrixTest, ShapeOrderAndCells) {
  const auto& net = grid();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<NodeId, Observation>> items;
  for (NodeId n : net.signalized()) {
    Observation o(33);
    for (auto& x : o) x = u(rng);
    items.emplace_back(n, o);
  }
  std::map<NodeId, Observation> fwd, rev;
  for (const auto& [n, o] : items) fwd.emplace(n, o);
  for (auto it = items.rbegin(); it != items.rend(); ++it) rev.emplace(it->first, it->second);
  const auto a = build_global_matrix(fwd, net), b = build_global_matrix(rev, net);
  EXPECT_EQ(a.channels, 33);
  EXPECT_EQ(a.rows, 4);
  EXPECT_EQ(a.cols, 4);
  EXPECT_EQ(a.data.size(), 4 * 4 * 33);
  EXPECT_EQ(a.data, b.data);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(a.cell(i, j), items[static_cast<std::size_t>(i * 4 + j)].second);
  }
  EXPECT_EQ(a.cell(0, 0), fwd.at(*net.find_node("B1")));
  EXPECT_EQ(a.cell(3, 0), fwd.at(*net.find_node("B4")));

  fwd.erase(fwd.begin());
  EXPECT_THROW(build_global_matrix(fwd, net), std::invalid_argument);
  std::vector<Observation> zeros(16, Observation::Zero(33));
  EXPECT_TRUE(build_global_matrix(zeros, net).data.isZero());
}

TEST(TrafficEnvTest, EpisodeLengthAndIdleRewards) {
  TrafficEnv env(grid(), default_phase_table());
  EXPECT_EQ(env.steps_per_episode(), 720);
  env.reset({});
  int steps = 0;
  StepResult r;
  do {
    r = env.step(std::vector<int>(16, -1));
    ++steps;
    for (double x : r.rewards) EXPECT_DOUBLE_EQ(x, 0.0);
  } while (!r.done);
  EXPECT_EQ(steps, 720);
  EXPECT_DOUBLE_EQ(r.metrics.clock_s, 3600.0);
}

TEST(TrafficEnvTest, WaitingDiffTelescopes) {
  const auto& net = grid();
  EnvConfig cfg;
  cfg.horizon_s = 900.0;
  TrafficEnv env(net, default_phase_table(), cfg);
  env.reset(generate_demand(net, 2500, 900.0, 9));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ph(0, 7);
  std::vector<double> sums(16, 0.0);
  StepResult r;
  do {
    std::vector<int> a(16);
    for (auto& x : a) x = ph(rng);
    r = env.step(a);
    for (std::size_t k = 0; k < 16; ++k) sums[k] += r.rewards[k];
  } while (!r.done);
  const auto w = env.current_waiting();
  double total_wait = 0.0;
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_NEAR(sums[k], env.initial_waiting()[k] - w[k], 1e-9 * (1.0 + w[k]));
    total_wait += w[k];
  }
  EXPECT_GT(total_wait, 0.0);
}

TEST(TrafficEnvTest, MapAndVectorActionsAgree) {
  const auto& net = grid();
  EnvConfig cfg;
  cfg.horizon_s = 300.0;
  TrafficEnv a(net, default_phase_table(), cfg), b(net, default_phase_table(), cfg);
  const auto d = generate_demand(net, 600, 300.0, 2);
  a.reset(d);
  b.reset(d);
  for (int s = 0; s < 60; ++s) {
    std::vector<int> v(16);
    std::map<NodeId, int> m;
    for (int k = 0; k < 16; ++k) {
      v[static_cast<std::size_t>(k)] = (s + k) % 8;
      m[net.signalized()[static_cast<std::size_t>(k)]] = (s + k) % 8;
    }
    const auto ra = a.step(v), rb = b.step(m);
    ASSERT_EQ(ra.rewards, rb.rewards);
    ASSERT_EQ(ra.global.data, rb.global.data);
  }
  EXPECT_THROW(a.step(std::vector<int>(3, 0)), std::invalid_argument);
}
