#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsc/roadnet.hpp"

namespace tsc {

/// Point-queue link model constants. Defaults are standard traffic-engineering
/// values: 50 km/h, 7.5 m effective length, 2 s saturation headway.
struct SimConfig {
  double dt_s = 1.0;
  double free_speed_mps = 13.89;
  double vehicle_length_m = 7.5;
  double saturation_headway_s = 2.0;
  double stop_speed_mps = 0.1;
};

struct Trip {
  int id = 0;
  NodeId origin = -1;
  NodeId destination = -1;
  double depart_s = 0.0;
};

/// Uniform departures over [0, horizon), origin and destination drawn
/// uniformly from distinct boundary nodes. Sorted by departure time; ids
/// follow that order.
std::vector<Trip> generate_demand(const RoadNetwork& net, int total_vehicles, double horizon_s,
                                  std::uint64_t seed);

class NoRoute : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Free-flow shortest paths over the edge graph with U-turns excluded.
/// Distances to each destination are cached until the closure set changes.
class RoutePlanner {
 public:
  explicit RoutePlanner(const RoadNetwork& net);

  void set_closed(std::vector<bool> closed);
  const std::vector<bool>& closed() const { return closed_; }
  bool is_closed(EdgeId e) const { return !closed_.empty() && closed_[static_cast<std::size_t>(e)]; }

  /// Path starting at `origin` (no arrival edge). Throws NoRoute.
  std::vector<EdgeId> from_node(NodeId origin, NodeId destination);
  /// Continuation after `current` (excluded from the result). When `lane` is
  /// in [0, 3) the first turn must be permitted from that lane. Throws NoRoute.
  std::vector<EdgeId> from_edge(EdgeId current, NodeId destination, int lane = -1);

 private:
  const std::vector<double>& cost_after(NodeId destination);
  std::vector<EdgeId> walk(NodeId start, EdgeId arrived_by, NodeId destination, int lane);

  const RoadNetwork* net_;
  std::vector<bool> closed_;
  std::map<NodeId, std::vector<double>> cache_;
};

/// Minimum free-flow travel time path from `from` to `to` avoiding closed
/// edges; equal-cost paths are resolved by the lexicographically smallest
/// sequence of edge names. `closed` may be empty (nothing closed) or sized to
/// the edge count. Throws NoRoute.
std::vector<EdgeId> shortest_route(const RoadNetwork& net, NodeId from, NodeId to,
                                   const std::vector<bool>& closed = {});

enum class VehicleStatus : std::uint8_t { Scheduled, Delayed, Running, Arrived };

struct Vehicle {
  int id = 0;
  NodeId origin = -1;
  NodeId destination = -1;
  double depart_s = 0.0;
  std::vector<EdgeId> route;
  std::size_t leg = 0;  // index into route of the current edge
  int lane = -1;
  double offset_m = 0.0;  // distance travelled along the current edge
  double speed_mps = 0.0;
  double accumulated_wait_s = 0.0;
  VehicleStatus status = VehicleStatus::Scheduled;

  EdgeId edge() const { return route[leg]; }
};

struct SignalState {
  int phase = 0;         // green phase (the outgoing one while yellow)
  int pending = -1;      // target phase while yellow, otherwise -1
  double yellow_left_s = 0.0;
  double time_in_phase_s = 0.0;

  bool in_yellow() const { return pending >= 0; }
  /// Phase the intersection is committed to: the target while yellow.
  int shown_phase() const { return in_yellow() ? pending : phase; }
};

struct BlockEvent {
  std::vector<EdgeId> edges;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct LaneStats {
  int vehicle_count = 0;
  int halting_count = 0;
  double mean_speed_mps = 0.0;
};

/// Per-tick probe values.
struct TickMetrics {
  double clock_s = 0.0;
  int spawned = 0;
  int arrived = 0;
  int running = 0;
  int delayed = 0;
  int halting = 0;
  double total_waiting_s = 0.0;  // accumulated wait of all halting vehicles
  double mean_speed_mps = 0.0;   // over running vehicles, 0 if none
  int crossings = 0;
  int reroutes = 0;
};

struct SimState {
  double clock_s = 0.0;
  std::vector<Vehicle> vehicles;     // indexed by trip id
  std::vector<std::deque<int>> lanes;  // edge * 3 + lane; front() is nearest the stop line
  std::vector<double> last_service_s;  // per lane
  std::vector<SignalState> signals;    // per node (unused for boundary nodes)
  std::vector<bool> closed;            // per edge
  std::vector<BlockEvent> blocks;
  std::vector<bool> block_active;
  std::size_t next_departure = 0;
  std::vector<int> delayed;  // spawned but not yet on a lane, in spawn order
  int spawned = 0;
  int arrived = 0;
  int route_failures = 0;
  std::vector<std::vector<int>> entries;  // [edge][minute bin] vehicles entering

  int lane_index(EdgeId e, int lane) const { return e * kLanesPerEdge + lane; }
};

/// Deterministic discrete-time simulator. One instance per worker.
class Simulator {
 public:
  Simulator(const RoadNetwork& net, PhaseTable phases, SimConfig cfg = {});

  void reset(std::vector<Trip> demand, std::vector<BlockEvent> blocks = {});

  /// Advances the clock by exactly dt.
  TickMetrics step();

  /// Closes the event's edges now and reroutes every running vehicle whose
  /// remaining route uses one of them. Vehicles already on a closed edge
  /// finish traversing it.
  void apply_block(const BlockEvent& ev);
  /// Reopens edges not covered by another active event and reroutes all
  /// running vehicles.
  void lift_block(const BlockEvent& ev);

  /// Requests phase `phase` at a signalized node. Ignored while yellow, when
  /// already active, or before the min-hold has elapsed. Returns true when a
  /// yellow interval was started.
  bool request_phase(NodeId node, int phase);

  bool movement_green(NodeId node, Movement m) const;
  bool can_switch(NodeId node) const;

  LaneStats lane_stats(EdgeId e, int lane) const;
  std::vector<LaneStats> lane_stats() const;

  /// Accumulated wait of the halting vehicles on the node's incoming lanes.
  double waiting_at(NodeId node) const;
  int halting_at(NodeId node) const;
  int lane_capacity(EdgeId e) const { return capacity_[static_cast<std::size_t>(e)]; }

  const SimState& state() const { return state_; }
  /// Direct access for scripted scenarios and tests.
  SimState& mutable_state() { return state_; }
  const RoadNetwork& network() const { return *net_; }
  const PhaseTable& phases() const { return phases_; }
  const SimConfig& config() const { return cfg_; }

  const RoutePlanner& planner() const { return planner_; }

 private:
  void refresh_closures();
  int choose_lane(EdgeId e, Turn next_turn) const;
  Turn next_turn(const Vehicle& v, std::size_t leg) const;
  bool has_room(int lane_idx, EdgeId e) const;
  void place(int vid, EdgeId e, int lane, double offset);
  bool reroute(int vid);
  void record_entry(EdgeId e);
  void try_insert(int vid);

  const RoadNetwork* net_;
  PhaseTable phases_;
  SimConfig cfg_;
  std::vector<int> capacity_;
  SimState state_;
  RoutePlanner planner_;
  int reroutes_this_tick_ = 0;
};

/// CSV rows "edge_id,minute_bin,count" for every non-zero bin.
std::string flow_csv(const RoadNetwork& net, const SimState& state);

}  // namespace tsc
