#include "tsc/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

namespace tsc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;

}  // namespace

std::vector<Trip> generate_demand(const RoadNetwork& net, int total_vehicles, double horizon_s,
                                  std::uint64_t seed) {
  if (total_vehicles <= 0) throw std::invalid_argument("total_vehicles must be positive");
  if (!(horizon_s > 0.0)) throw std::invalid_argument("horizon must be positive");
  const auto& ends = net.boundary();
  if (ends.size() < 2) throw std::invalid_argument("network needs at least two boundary nodes");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> depart(0.0, horizon_s);
  std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);

  std::vector<Trip> trips(static_cast<std::size_t>(total_vehicles));
  for (auto& t : trips) {
    t.depart_s = depart(rng);
    t.origin = ends[pick(rng)];
    do {
      t.destination = ends[pick(rng)];
    } while (t.destination == t.origin);
  }
  std::stable_sort(trips.begin(), trips.end(),
                   [](const Trip& a, const Trip& b) { return a.depart_s < b.depart_s; });
  for (std::size_t i = 0; i < trips.size(); ++i) trips[i].id = static_cast<int>(i);
  return trips;
}

// ---------------------------------------------------------------------------

RoutePlanner::RoutePlanner(const RoadNetwork& net) : net_(&net) {}

void RoutePlanner::set_closed(std::vector<bool> closed) {
  if (!closed.empty() && closed.size() != net_->edges().size()) {
    throw std::invalid_argument("closure mask size does not match the edge count");
  }
  if (closed != closed_) {
    closed_ = std::move(closed);
    cache_.clear();
  }
}

// cost[e]: free-flow length still to drive after reaching the head of edge e.
const std::vector<double>& RoutePlanner::cost_after(NodeId destination) {
  if (auto it = cache_.find(destination); it != cache_.end()) return it->second;

  const auto& edges = net_->edges();
  std::vector<double> cost(edges.size(), kInf);
  using Item = std::pair<double, EdgeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  for (const auto& e : edges) {
    if (e.to == destination) {
      cost[static_cast<std::size_t>(e.id)] = 0.0;
      open.emplace(0.0, e.id);
    }
  }
  while (!open.empty()) {
    auto [d, f] = open.top();
    open.pop();
    if (d > cost[static_cast<std::size_t>(f)]) continue;
    if (is_closed(f)) continue;  // nobody may enter f
    const auto& ef = net_->edge(f);
    for (EdgeId e : net_->in_edges(ef.from)) {
      if (!net_->turn_between(e, f)) continue;
      const double cand = ef.length_m + d;
      if (cand < cost[static_cast<std::size_t>(e)]) {
        cost[static_cast<std::size_t>(e)] = cand;
        open.emplace(cand, e);
      }
    }
  }
  return cache_.emplace(destination, std::move(cost)).first->second;
}

std::vector<EdgeId> RoutePlanner::walk(NodeId start, EdgeId arrived_by, NodeId destination, int lane) {
  const auto& cost = cost_after(destination);
  std::vector<EdgeId> path;
  NodeId cur = start;
  EdgeId prev = arrived_by;
  const std::size_t max_len = net_->edges().size();
  while (cur != destination) {
    EdgeId best = -1;
    double best_cost = kInf;
    for (EdgeId f : net_->out_edges(cur)) {
      if (is_closed(f)) continue;
      const double c = net_->edge(f).length_m + cost[static_cast<std::size_t>(f)];
      if (!std::isfinite(c)) continue;
      if (prev >= 0) {
        const auto turn = net_->turn_between(prev, f);
        if (!turn) continue;
        if (path.empty() && lane >= 0 && !lane_permits(lane, *turn)) continue;
      }
      if (best < 0 || c < best_cost - kTieEps ||
          (c <= best_cost + kTieEps && net_->edge(f).name < net_->edge(best).name)) {
        best = f;
        best_cost = c;
      }
    }
    if (best < 0 || path.size() > max_len) {
      throw NoRoute("no route from " + net_->node(start).name + " to " + net_->node(destination).name);
    }
    path.push_back(best);
    prev = best;
    cur = net_->edge(best).to;
  }
  return path;
}

std::vector<EdgeId> RoutePlanner::from_node(NodeId origin, NodeId destination) {
  if (origin == destination) throw std::invalid_argument("origin equals destination");
  return walk(origin, -1, destination, -1);
}

std::vector<EdgeId> RoutePlanner::from_edge(EdgeId current, NodeId destination, int lane) {
  const NodeId head = net_->edge(current).to;
  if (head == destination) return {};
  return walk(head, current, destination, lane);
}

std::vector<EdgeId> shortest_route(const RoadNetwork& net, NodeId from, NodeId to,
                                   const std::vector<bool>& closed) {
  RoutePlanner planner(net);
  planner.set_closed(closed);
  return planner.from_node(from, to);
}

// ---------------------------------------------------------------------------

Simulator::Simulator(const RoadNetwork& net, PhaseTable phases, SimConfig cfg)
    : net_(&net), phases_(std::move(phases)), cfg_(cfg), planner_(net) {
  if (!(cfg_.dt_s > 0.0)) throw std::invalid_argument("dt must be positive");
  capacity_.reserve(net.edges().size());
  for (const auto& e : net.edges()) capacity_.push_back(net.lane_capacity(e.id, cfg_.vehicle_length_m));
  reset({});
}

void Simulator::reset(std::vector<Trip> demand, std::vector<BlockEvent> blocks) {
  std::stable_sort(demand.begin(), demand.end(),
                   [](const Trip& a, const Trip& b) { return a.depart_s < b.depart_s; });
  state_ = SimState{};
  const auto n_edges = net_->edges().size();
  state_.vehicles.reserve(demand.size());
  for (std::size_t i = 0; i < demand.size(); ++i) {
    const auto& t = demand[i];
    if (t.origin == t.destination) throw std::invalid_argument("trip with identical origin and destination");
    Vehicle v;
    v.id = static_cast<int>(i);
    v.origin = t.origin;
    v.destination = t.destination;
    v.depart_s = t.depart_s;
    state_.vehicles.push_back(std::move(v));
  }
  state_.lanes.assign(n_edges * kLanesPerEdge, {});
  state_.last_service_s.assign(n_edges * kLanesPerEdge, -kInf);
  state_.signals.assign(net_->nodes().size(), SignalState{});
  state_.closed.assign(n_edges, false);
  for (const auto& b : blocks) {
    if (!(b.start_s < b.end_s)) throw std::invalid_argument("block event must start before it ends");
    for (EdgeId e : b.edges) {
      if (e < 0 || static_cast<std::size_t>(e) >= n_edges) throw std::invalid_argument("block event references an unknown edge");
    }
  }
  state_.blocks = std::move(blocks);
  state_.block_active.assign(state_.blocks.size(), false);
  state_.entries.assign(n_edges, {});
  planner_.set_closed(state_.closed);
}

void Simulator::refresh_closures() {
  std::vector<bool> closed(net_->edges().size(), false);
  for (std::size_t i = 0; i < state_.blocks.size(); ++i) {
    if (!state_.block_active[i]) continue;
    for (EdgeId e : state_.blocks[i].edges) closed[static_cast<std::size_t>(e)] = true;
  }
  state_.closed = closed;
  planner_.set_closed(std::move(closed));
}

bool Simulator::request_phase(NodeId node, int phase) {
  if (phase < 0 || phase >= phases_.size()) throw std::out_of_range("phase index out of range");
  auto& sig = state_.signals.at(static_cast<std::size_t>(node));
  if (sig.in_yellow() || phase == sig.phase) return false;
  if (sig.time_in_phase_s + 1e-9 < phases_.min_hold_s) return false;
  if (phases_.yellow_duration_s <= 0.0) {
    sig.phase = phase;
    sig.time_in_phase_s = 0.0;
    return true;
  }
  sig.pending = phase;
  sig.yellow_left_s = phases_.yellow_duration_s;
  return true;
}

bool Simulator::can_switch(NodeId node) const {
  const auto& sig = state_.signals.at(static_cast<std::size_t>(node));
  return !sig.in_yellow() && sig.time_in_phase_s + 1e-9 >= phases_.min_hold_s;
}

bool Simulator::movement_green(NodeId node, Movement m) const {
  const auto& sig = state_.signals.at(static_cast<std::size_t>(node));
  if (!phases_[sig.phase].permits(m)) return false;
  // while yellow only movements shared with the target phase keep flowing
  return !sig.in_yellow() || phases_[sig.pending].permits(m);
}

Turn Simulator::next_turn(const Vehicle& v, std::size_t leg) const {
  if (leg + 1 >= v.route.size()) return Turn::Straight;
  return net_->turn_between(v.route[leg], v.route[leg + 1]).value_or(Turn::Straight);
}

bool Simulator::has_room(int lane_idx, EdgeId e) const {
  const auto& q = state_.lanes[static_cast<std::size_t>(lane_idx)];
  if (static_cast<int>(q.size()) >= capacity_[static_cast<std::size_t>(e)]) return false;
  if (q.empty()) return true;
  return state_.vehicles[static_cast<std::size_t>(q.back())].offset_m + 1e-9 >= cfg_.vehicle_length_m;
}

int Simulator::choose_lane(EdgeId e, Turn turn) const {
  switch (turn) {
    case Turn::Left: return 0;
    case Turn::Right: return 2;
    case Turn::Straight: break;
  }
  const auto n1 = state_.lanes[static_cast<std::size_t>(state_.lane_index(e, 1))].size();
  const auto n2 = state_.lanes[static_cast<std::size_t>(state_.lane_index(e, 2))].size();
  if (has_room(state_.lane_index(e, 1), e) && (n1 <= n2 || !has_room(state_.lane_index(e, 2), e))) return 1;
  if (has_room(state_.lane_index(e, 2), e)) return 2;
  return n1 <= n2 ? 1 : 2;
}

void Simulator::record_entry(EdgeId e) {
  auto& bins = state_.entries[static_cast<std::size_t>(e)];
  const auto minute = static_cast<std::size_t>(std::floor(state_.clock_s / 60.0));
  if (bins.size() <= minute) bins.resize(minute + 1, 0);
  ++bins[minute];
}

// Inserts vid into the lane keeping offsets non-increasing from the front.
void Simulator::place(int vid, EdgeId e, int lane, double offset) {
  auto& q = state_.lanes[static_cast<std::size_t>(state_.lane_index(e, lane))];
  auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
  auto pos = q.begin();
  while (pos != q.end() && state_.vehicles[static_cast<std::size_t>(*pos)].offset_m >= offset) ++pos;
  if (pos != q.begin()) {
    offset = std::min(offset, state_.vehicles[static_cast<std::size_t>(*std::prev(pos))].offset_m - cfg_.vehicle_length_m);
  }
  const double floor_offset = pos == q.end() ? 0.0 : state_.vehicles[static_cast<std::size_t>(*pos)].offset_m;
  v.offset_m = std::max(offset, floor_offset);
  v.lane = lane;
  q.insert(pos, vid);
}

void Simulator::try_insert(int vid) {
  auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
  std::vector<EdgeId> route;
  try {
    route = planner_.from_node(v.origin, v.destination);
  } catch (const NoRoute&) {
    ++state_.route_failures;
    return;
  }
  v.route = std::move(route);
  v.leg = 0;
  const EdgeId first = v.route.front();
  const int lane = choose_lane(first, next_turn(v, 0));
  if (!has_room(state_.lane_index(first, lane), first)) return;
  v.status = VehicleStatus::Running;
  v.offset_m = 0.0;
  v.speed_mps = cfg_.free_speed_mps;
  v.lane = lane;
  state_.lanes[static_cast<std::size_t>(state_.lane_index(first, lane))].push_back(vid);
  record_entry(first);
}

// Recomputes the remainder of a running vehicle's route from its current edge.
bool Simulator::reroute(int vid) {
  auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
  const EdgeId cur = v.edge();
  if (net_->edge(cur).to == v.destination) return true;

  auto adopt = [&](std::vector<EdgeId> rest) {
    v.route.resize(v.leg + 1);
    v.route.insert(v.route.end(), rest.begin(), rest.end());
    ++reroutes_this_tick_;
  };

  std::vector<EdgeId> rest;
  try {
    rest = planner_.from_edge(cur, v.destination);
  } catch (const NoRoute&) {
    ++state_.route_failures;
    return false;
  }
  const Turn turn = *net_->turn_between(cur, rest.front());
  if (lane_permits(v.lane, turn)) {
    adopt(std::move(rest));
    return true;
  }
  // switch to a lane serving the new movement when it has space
  const int target = choose_lane(cur, turn);
  const int target_idx = state_.lane_index(cur, target);
  if (lane_permits(target, turn) &&
      static_cast<int>(state_.lanes[static_cast<std::size_t>(target_idx)].size()) < capacity_[static_cast<std::size_t>(cur)]) {
    auto& from = state_.lanes[static_cast<std::size_t>(state_.lane_index(cur, v.lane))];
    from.erase(std::find(from.begin(), from.end(), vid));
    place(vid, cur, target, v.offset_m);
    adopt(std::move(rest));
    return true;
  }
  try {
    adopt(planner_.from_edge(cur, v.destination, v.lane));
    return true;
  } catch (const NoRoute&) {
    ++state_.route_failures;
    return false;
  }
}

void Simulator::apply_block(const BlockEvent& ev) {
  auto it = std::find_if(state_.blocks.begin(), state_.blocks.end(), [&](const BlockEvent& b) {
    return b.edges == ev.edges && b.start_s == ev.start_s && b.end_s == ev.end_s;
  });
  if (it == state_.blocks.end()) {
    state_.blocks.push_back(ev);
    state_.block_active.push_back(true);
  } else {
    state_.block_active[static_cast<std::size_t>(it - state_.blocks.begin())] = true;
  }
  refresh_closures();

  std::vector<bool> newly(net_->edges().size(), false);
  for (EdgeId e : ev.edges) newly[static_cast<std::size_t>(e)] = true;
  for (auto& v : state_.vehicles) {
    if (v.status != VehicleStatus::Running) continue;
    bool affected = false;
    for (std::size_t k = v.leg + 1; k < v.route.size() && !affected; ++k) {
      affected = newly[static_cast<std::size_t>(v.route[k])];
    }
    if (affected) reroute(v.id);
  }
}

void Simulator::lift_block(const BlockEvent& ev) {
  for (std::size_t i = 0; i < state_.blocks.size(); ++i) {
    const auto& b = state_.blocks[i];
    if (b.edges == ev.edges && b.start_s == ev.start_s && b.end_s == ev.end_s) state_.block_active[i] = false;
  }
  refresh_closures();
  for (auto& v : state_.vehicles) {
    if (v.status == VehicleStatus::Running) reroute(v.id);
  }
}

TickMetrics Simulator::step() {
  reroutes_this_tick_ = 0;
  const double now = state_.clock_s;
  const double dt = cfg_.dt_s;

  // block windows
  for (std::size_t i = 0; i < state_.blocks.size(); ++i) {
    const auto ev = state_.blocks[i];
    const bool inside = now + 1e-9 >= ev.start_s && now + 1e-9 < ev.end_s;
    if (inside && !state_.block_active[i]) {
      apply_block(ev);
    } else if (!inside && state_.block_active[i] && now + 1e-9 >= ev.end_s) {
      lift_block(ev);
    }
  }

  // departures falling inside this tick
  while (state_.next_departure < state_.vehicles.size() &&
         state_.vehicles[state_.next_departure].depart_s < now + dt) {
    auto& v = state_.vehicles[state_.next_departure++];
    v.status = VehicleStatus::Delayed;
    ++state_.spawned;
    state_.delayed.push_back(v.id);
  }
  if (!state_.delayed.empty()) {
    std::vector<int> still;
    for (int vid : state_.delayed) {
      try_insert(vid);
      if (state_.vehicles[static_cast<std::size_t>(vid)].status == VehicleStatus::Delayed) still.push_back(vid);
    }
    state_.delayed = std::move(still);
  }

  // car-following toward the stop line or the leader
  const double step_m = cfg_.free_speed_mps * dt;
  for (std::size_t li = 0; li < state_.lanes.size(); ++li) {
    const auto& q = state_.lanes[li];
    const double length = net_->edge(static_cast<EdgeId>(li / kLanesPerEdge)).length_m;
    double limit = length;
    for (int vid : q) {
      auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
      const double next = std::max(v.offset_m, std::min(v.offset_m + step_m, limit));
      v.speed_mps = (next - v.offset_m) / dt;
      v.offset_m = next;
      limit = next - cfg_.vehicle_length_m;
    }
  }

  // stop-line service
  int crossings = 0;
  for (std::size_t li = 0; li < state_.lanes.size(); ++li) {
    auto& q = state_.lanes[li];
    if (q.empty()) continue;
    const auto e = static_cast<EdgeId>(li / kLanesPerEdge);
    const auto& edge = net_->edge(e);
    const int vid = q.front();
    auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
    if (v.offset_m + 1e-9 < edge.length_m) continue;

    if (edge.to == v.destination) {
      q.pop_front();
      v.status = VehicleStatus::Arrived;
      v.lane = -1;
      ++state_.arrived;
      continue;
    }
    if (now + 1e-9 < state_.last_service_s[li] + cfg_.saturation_headway_s) continue;

    if (planner_.is_closed(v.route[v.leg + 1]) && !reroute(vid)) continue;
    if (planner_.is_closed(v.route[v.leg + 1])) continue;
    const EdgeId next = v.route[v.leg + 1];
    const Turn turn = *net_->turn_between(e, next);
    if (!lane_permits(v.lane, turn)) continue;  // only after a failed lane switch
    if (net_->node(edge.to).has_signal && !movement_green(edge.to, {net_->arrival_arm(e), turn})) continue;

    const int lane = choose_lane(next, next_turn(v, v.leg + 1));
    const int target = state_.lane_index(next, lane);
    if (!has_room(target, next)) continue;

    q.pop_front();
    ++v.leg;
    v.lane = lane;
    v.offset_m = 0.0;
    state_.lanes[static_cast<std::size_t>(target)].push_back(vid);
    state_.last_service_s[li] = now;
    record_entry(next);
    ++crossings;
  }

  // waiting accounting and probes
  TickMetrics m;
  double speed_sum = 0.0;
  for (const auto& q : state_.lanes) {
    for (int vid : q) {
      auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
      ++m.running;
      speed_sum += v.speed_mps;
      if (v.speed_mps < cfg_.stop_speed_mps) {
        v.accumulated_wait_s += dt;
        ++m.halting;
        m.total_waiting_s += v.accumulated_wait_s;
      }
    }
  }

  // signal timers
  for (const NodeId n : net_->signalized()) {
    auto& sig = state_.signals[static_cast<std::size_t>(n)];
    if (sig.in_yellow()) {
      sig.yellow_left_s -= dt;
      if (sig.yellow_left_s <= 1e-9) {
        sig.phase = sig.pending;
        sig.pending = -1;
        sig.yellow_left_s = 0.0;
        sig.time_in_phase_s = 0.0;
      }
    } else {
      sig.time_in_phase_s += dt;
    }
  }

  state_.clock_s = now + dt;
  m.clock_s = state_.clock_s;
  m.spawned = state_.spawned;
  m.arrived = state_.arrived;
  m.delayed = static_cast<int>(state_.delayed.size());
  m.mean_speed_mps = m.running > 0 ? speed_sum / m.running : 0.0;
  m.crossings = crossings;
  m.reroutes = reroutes_this_tick_;
  return m;
}

LaneStats Simulator::lane_stats(EdgeId e, int lane) const {
  LaneStats s;
  double sum = 0.0;
  for (int vid : state_.lanes[static_cast<std::size_t>(state_.lane_index(e, lane))]) {
    const auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
    ++s.vehicle_count;
    sum += v.speed_mps;
    if (v.speed_mps < cfg_.stop_speed_mps) ++s.halting_count;
  }
  s.mean_speed_mps = s.vehicle_count > 0 ? sum / s.vehicle_count : 0.0;
  return s;
}

std::vector<LaneStats> Simulator::lane_stats() const {
  std::vector<LaneStats> out;
  out.reserve(state_.lanes.size());
  for (const auto& e : net_->edges()) {
    for (int l = 0; l < kLanesPerEdge; ++l) out.push_back(lane_stats(e.id, l));
  }
  return out;
}

double Simulator::waiting_at(NodeId node) const {
  double w = 0.0;
  for (EdgeId e : net_->in_edges(node)) {
    for (int l = 0; l < kLanesPerEdge; ++l) {
      for (int vid : state_.lanes[static_cast<std::size_t>(state_.lane_index(e, l))]) {
        const auto& v = state_.vehicles[static_cast<std::size_t>(vid)];
        if (v.speed_mps < cfg_.stop_speed_mps) w += v.accumulated_wait_s;
      }
    }
  }
  return w;
}

int Simulator::halting_at(NodeId node) const {
  int h = 0;
  for (EdgeId e : net_->in_edges(node)) {
    for (int l = 0; l < kLanesPerEdge; ++l) h += lane_stats(e, l).halting_count;
  }
  return h;
}

std::string flow_csv(const RoadNetwork& net, const SimState& state) {
  std::ostringstream out;
  out << "edge_id,minute_bin,count\n";
  for (const auto& e : net.edges()) {
    const auto& bins = state.entries[static_cast<std::size_t>(e.id)];
    for (std::size_t m = 0; m < bins.size(); ++m) {
      if (bins[m] > 0) out << e.name << ',' << m << ',' << bins[m] << '\n';
    }
  }
  return out.str();
}

}  // namespace tsc
