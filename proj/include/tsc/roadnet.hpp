#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tsc {

using NodeId = int;
using EdgeId = int;

inline constexpr int kLanesPerEdge = 3;
inline constexpr int kApproaches = 4;
inline constexpr int kIncomingLanes = kLanesPerEdge * kApproaches;  // 12
inline constexpr int kPhaseCount = 8;

/// Compass arm of an intersection, clockwise from north.
enum class Approach : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

enum class Turn : std::uint8_t { Left = 0, Straight = 1, Right = 2 };

struct Movement {
  Approach approach;
  Turn turn;

  friend bool operator==(const Movement&, const Movement&) = default;
};

/// Dense index of a movement in [0, 12): approach * 3 + turn.
inline int movement_index(Movement m) {
  return static_cast<int>(m.approach) * 3 + static_cast<int>(m.turn);
}

inline Movement movement_from_index(int i) {
  return {static_cast<Approach>(i / 3), static_cast<Turn>(i % 3)};
}

std::string_view to_string(Approach a);
std::string_view to_string(Turn t);

/// Lane 0 is left-only, lane 1 straight, lane 2 straight+right.
bool lane_permits(int lane, Turn turn);

/// One of the 16 lane-level signals, numbered 1..16 clockwise from north.
/// Per approach: right (lane 2), straight (lane 2), straight (lane 1), left (lane 0).
struct Signal {
  int number;
  Approach approach;
  Turn turn;
  int lane;
};

const std::array<Signal, 16>& signal_layout();

/// True iff the two movements' trajectories cross inside the box. Right turns
/// hug the corner and never cross; merges into distinct exit lanes do not count.
bool conflicting(Movement m1, Movement m2);

struct Phase {
  std::string name;
  std::array<bool, 12> green{};  // indexed by movement_index

  bool permits(Movement m) const { return green[static_cast<std::size_t>(movement_index(m))]; }
};

struct PhaseTable {
  std::vector<Phase> phases;
  double yellow_duration_s = 3.0;
  double min_hold_s = 10.0;

  const Phase& operator[](int i) const { return phases.at(static_cast<std::size_t>(i)); }
  int size() const { return static_cast<int>(phases.size()); }
};

/// NS-straight, NS-left, EW-straight, EW-left, then N/E/S/W all-movement
/// phases. Right turns are green in every phase.
PhaseTable default_phase_table();

/// Pairs of conflicting movements inside any phase of the table.
std::vector<std::pair<Movement, Movement>> phase_conflicts(const PhaseTable& table);

struct Node {
  NodeId id = -1;
  std::string name;
  int row = 0;  // lattice row, 0 = south
  int col = 0;  // lattice column, 0 = west
  bool has_signal = false;
};

struct Edge {
  EdgeId id = -1;
  std::string name;  // "<from><to>", e.g. "D3C3"
  NodeId from = -1;
  NodeId to = -1;
  double length_m = 0.0;
  int lanes = kLanesPerEdge;
};

/// Grid of signalized interior nodes surrounded by a ring of unsignalized
/// boundary nodes (sources and sinks). Immutable after construction.
class RoadNetwork {
 public:
  int lattice_rows() const { return rows_; }
  int lattice_cols() const { return cols_; }
  /// Dimensions of the signalized sub-grid: (rows - 2) x (cols - 2).
  int grid_rows() const { return rows_ - 2; }
  int grid_cols() const { return cols_ - 2; }
  double spacing_m() const { return spacing_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Edge& edge(EdgeId id) const { return edges_.at(static_cast<std::size_t>(id)); }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<EdgeId> find_edge(std::string_view name) const;
  EdgeId edge_by_name(std::string_view name) const;

  /// Signalized nodes in row-major grid order (south row first, west to east).
  const std::vector<NodeId>& signalized() const { return signalized_; }
  const std::vector<NodeId>& boundary() const { return boundary_; }

  /// Position of a signalized node in the signalized grid, or -1.
  int agent_index(NodeId node) const { return agent_index_.at(static_cast<std::size_t>(node)); }

  /// Edge arriving at `node` from the given arm, or -1.
  EdgeId incoming(NodeId node, Approach arm) const;
  /// Edge leaving `node` toward the given arm, or -1.
  EdgeId outgoing(NodeId node, Approach arm) const;
  const std::vector<EdgeId>& out_edges(NodeId node) const { return out_.at(static_cast<std::size_t>(node)); }
  const std::vector<EdgeId>& in_edges(NodeId node) const { return in_.at(static_cast<std::size_t>(node)); }

  /// Arm of edge.to through which the edge arrives.
  Approach arrival_arm(EdgeId e) const;
  /// Arm of edge.from through which the edge departs.
  Approach departure_arm(EdgeId e) const;

  /// Turn made going from `in` to `out` at their shared node; nullopt for a U-turn.
  std::optional<Turn> turn_between(EdgeId in, EdgeId out) const;

  /// Lane capacity in vehicles for a given effective vehicle length.
  int lane_capacity(EdgeId e, double vehicle_length_m) const;

  friend RoadNetwork build_grid(int rows, int cols, double spacing_m);
  friend RoadNetwork network_from_json(const nlohmann::json& doc);

 private:
  void index();

  int rows_ = 0;
  int cols_ = 0;
  double spacing_ = 0.0;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<NodeId> signalized_;
  std::vector<NodeId> boundary_;
  std::vector<int> agent_index_;
  std::vector<std::array<EdgeId, 4>> in_by_arm_;
  std::vector<std::array<EdgeId, 4>> out_by_arm_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
};

/// Lattice of `rows` x `cols` including the boundary ring; corner lattice
/// points are omitted. Throws std::invalid_argument if there is no interior node.
RoadNetwork build_grid(int rows, int cols, double spacing_m);

std::string node_name(int row, int col);

nlohmann::json to_json(const RoadNetwork& net, const PhaseTable& phases);
RoadNetwork network_from_json(const nlohmann::json& doc);
PhaseTable phases_from_json(const nlohmann::json& doc);

}  // namespace tsc
