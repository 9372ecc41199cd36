#include "tsc/roadnet.hpp"

#include <algorithm>
#include <cmath>

namespace tsc {

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::North: return "N";
    case Approach::East: return "E";
    case Approach::South: return "S";
    case Approach::West: return "W";
  }
  return "?";
}

std::string_view to_string(Turn t) {
  switch (t) {
    case Turn::Left: return "left";
    case Turn::Straight: return "straight";
    case Turn::Right: return "right";
  }
  return "?";
}

bool lane_permits(int lane, Turn turn) {
  switch (lane) {
    case 0: return turn == Turn::Left;
    case 1: return turn == Turn::Straight;
    case 2: return turn == Turn::Straight || turn == Turn::Right;
    default: return false;
  }
}

const std::array<Signal, 16>& signal_layout() {
  static const std::array<Signal, 16> layout = [] {
    std::array<Signal, 16> s{};
    int n = 0;
    for (int a = 0; a < kApproaches; ++a) {
      const auto ap = static_cast<Approach>(a);
      s[n] = {n + 1, ap, Turn::Right, 2}; ++n;
      s[n] = {n + 1, ap, Turn::Straight, 2}; ++n;
      s[n] = {n + 1, ap, Turn::Straight, 1}; ++n;
      s[n] = {n + 1, ap, Turn::Left, 0}; ++n;
    }
    return s;
  }();
  return layout;
}

bool conflicting(Movement m1, Movement m2) {
  if (m1.approach == m2.approach) return false;
  if (m1.turn == Turn::Right || m2.turn == Turn::Right) return false;
  const int rel = (static_cast<int>(m2.approach) - static_cast<int>(m1.approach) + 4) % 4;
  if (rel == 2) {
    // opposing through movements run side by side; opposing lefts pass in front
    return m1.turn != m2.turn;
  }
  if (m1.turn == m2.turn) return true;
  // perpendicular left vs straight: a left only crosses the through stream of
  // the approach clockwise-next to it
  if (m1.turn == Turn::Left) return rel == 1;
  return rel == 3;
}

namespace {

Phase make_phase(std::string name, std::initializer_list<Movement> movements) {
  Phase p;
  p.name = std::move(name);
  for (int a = 0; a < kApproaches; ++a) {
    p.green[static_cast<std::size_t>(movement_index({static_cast<Approach>(a), Turn::Right}))] = true;
  }
  for (const auto& m : movements) p.green[static_cast<std::size_t>(movement_index(m))] = true;
  return p;
}

}  // namespace

PhaseTable default_phase_table() {
  using A = Approach;
  using T = Turn;
  PhaseTable t;
  t.phases = {
      make_phase("NS-straight", {{A::North, T::Straight}, {A::South, T::Straight}}),
      make_phase("NS-left", {{A::North, T::Left}, {A::South, T::Left}}),
      make_phase("EW-straight", {{A::East, T::Straight}, {A::West, T::Straight}}),
      make_phase("EW-left", {{A::East, T::Left}, {A::West, T::Left}}),
      make_phase("N-all", {{A::North, T::Straight}, {A::North, T::Left}}),
      make_phase("E-all", {{A::East, T::Straight}, {A::East, T::Left}}),
      make_phase("S-all", {{A::South, T::Straight}, {A::South, T::Left}}),
      make_phase("W-all", {{A::West, T::Straight}, {A::West, T::Left}}),
  };
  return t;
}

std::vector<std::pair<Movement, Movement>> phase_conflicts(const PhaseTable& table) {
  std::vector<std::pair<Movement, Movement>> out;
  for (const auto& phase : table.phases) {
    for (int i = 0; i < 12; ++i) {
      for (int j = i + 1; j < 12; ++j) {
        const auto a = movement_from_index(i);
        const auto b = movement_from_index(j);
        if (phase.permits(a) && phase.permits(b) && conflicting(a, b)) out.emplace_back(a, b);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string node_name(int row, int col) {
  if (col < 0 || col >= 26) throw std::invalid_argument("column index out of range for letter naming");
  return std::string(1, static_cast<char>('A' + col)) + std::to_string(row);
}

std::optional<NodeId> RoadNetwork::find_node(std::string_view name) const {
  for (const auto& n : nodes_) {
    if (n.name == name) return n.id;
  }
  return std::nullopt;
}

std::optional<EdgeId> RoadNetwork::find_edge(std::string_view name) const {
  for (const auto& e : edges_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

EdgeId RoadNetwork::edge_by_name(std::string_view name) const {
  if (auto e = find_edge(name)) return *e;
  throw std::invalid_argument("unknown edge '" + std::string(name) + "'");
}

EdgeId RoadNetwork::incoming(NodeId node, Approach arm) const {
  return in_by_arm_.at(static_cast<std::size_t>(node))[static_cast<std::size_t>(arm)];
}

EdgeId RoadNetwork::outgoing(NodeId node, Approach arm) const {
  return out_by_arm_.at(static_cast<std::size_t>(node))[static_cast<std::size_t>(arm)];
}

namespace {

// Arm of `at` on which `other` lies. Rows grow northward.
Approach arm_toward(const Node& at, const Node& other) {
  if (other.row > at.row) return Approach::North;
  if (other.row < at.row) return Approach::South;
  if (other.col > at.col) return Approach::East;
  return Approach::West;
}

}  // namespace

Approach RoadNetwork::arrival_arm(EdgeId e) const {
  const auto& ed = edge(e);
  return arm_toward(node(ed.to), node(ed.from));
}

Approach RoadNetwork::departure_arm(EdgeId e) const {
  const auto& ed = edge(e);
  return arm_toward(node(ed.from), node(ed.to));
}

std::optional<Turn> RoadNetwork::turn_between(EdgeId in, EdgeId out) const {
  if (edge(in).to != edge(out).from) throw std::invalid_argument("edges are not consecutive");
  const int a = static_cast<int>(arrival_arm(in));
  const int b = static_cast<int>(departure_arm(out));
  const int rel = (b - a + 4) % 4;
  switch (rel) {
    case 1: return Turn::Left;
    case 2: return Turn::Straight;
    case 3: return Turn::Right;
    default: return std::nullopt;
  }
}

int RoadNetwork::lane_capacity(EdgeId e, double vehicle_length_m) const {
  return std::max(1, static_cast<int>(std::floor(edge(e).length_m / vehicle_length_m + 1e-9)));
}

void RoadNetwork::index() {
  const auto n = nodes_.size();
  in_by_arm_.assign(n, {-1, -1, -1, -1});
  out_by_arm_.assign(n, {-1, -1, -1, -1});
  in_.assign(n, {});
  out_.assign(n, {});
  agent_index_.assign(n, -1);
  signalized_.clear();
  boundary_.clear();
  for (const auto& e : edges_) {
    in_by_arm_[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(arrival_arm(e.id))] = e.id;
    out_by_arm_[static_cast<std::size_t>(e.from)][static_cast<std::size_t>(departure_arm(e.id))] = e.id;
    in_[static_cast<std::size_t>(e.to)].push_back(e.id);
    out_[static_cast<std::size_t>(e.from)].push_back(e.id);
  }
  std::vector<NodeId> sig;
  for (const auto& nd : nodes_) (nd.has_signal ? sig : boundary_).push_back(nd.id);
  std::sort(sig.begin(), sig.end(), [&](NodeId a, NodeId b) {
    const auto& na = node(a);
    const auto& nb = node(b);
    return std::pair(na.row, na.col) < std::pair(nb.row, nb.col);
  });
  signalized_ = sig;
  for (std::size_t i = 0; i < signalized_.size(); ++i) {
    agent_index_[static_cast<std::size_t>(signalized_[i])] = static_cast<int>(i);
  }
}

RoadNetwork build_grid(int rows, int cols, double spacing_m) {
  if (rows < 3 || cols < 3) {
    throw std::invalid_argument("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " has no interior signalized node (need rows, cols >= 3)");
  }
  if (cols > 26) throw std::invalid_argument("at most 26 lattice columns are supported");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("node spacing must be positive");

  RoadNetwork net;
  net.rows_ = rows;
  net.cols_ = cols;
  net.spacing_ = spacing_m;

  auto interior = [&](int r, int c) { return r > 0 && r < rows - 1 && c > 0 && c < cols - 1; };
  auto corner = [&](int r, int c) { return (r == 0 || r == rows - 1) && (c == 0 || c == cols - 1); };

  std::vector<std::vector<NodeId>> at(static_cast<std::size_t>(rows), std::vector<NodeId>(static_cast<std::size_t>(cols), -1));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      if (corner(r, c)) continue;
      Node nd;
      nd.id = static_cast<NodeId>(net.nodes_.size());
      nd.name = node_name(r, c);
      nd.row = r;
      nd.col = c;
      nd.has_signal = interior(r, c);
      at[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = nd.id;
      net.nodes_.push_back(nd);
    }
  }

  // Links exist between lattice neighbours when at least one end is interior.
  auto link = [&](NodeId a, NodeId b) {
    for (auto [u, v] : {std::pair{a, b}, std::pair{b, a}}) {
      Edge e;
      e.id = static_cast<EdgeId>(net.edges_.size());
      e.from = u;
      e.to = v;
      e.name = net.nodes_[static_cast<std::size_t>(u)].name + net.nodes_[static_cast<std::size_t>(v)].name;
      e.length_m = spacing_m;
      net.edges_.push_back(e);
    }
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const NodeId here = at[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (here < 0) continue;
      if (c + 1 < cols) {
        const NodeId east = at[static_cast<std::size_t>(r)][static_cast<std::size_t>(c + 1)];
        if (east >= 0 && (interior(r, c) || interior(r, c + 1))) link(here, east);
      }
      if (r + 1 < rows) {
        const NodeId north = at[static_cast<std::size_t>(r + 1)][static_cast<std::size_t>(c)];
        if (north >= 0 && (interior(r, c) || interior(r + 1, c))) link(here, north);
      }
    }
  }
  net.index();
  return net;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const RoadNetwork& net, const PhaseTable& phases) {
  nlohmann::json doc;
  doc["grid"] = {{"rows", net.lattice_rows()}, {"cols", net.lattice_cols()}, {"spacing_m", net.spacing_m()}};
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (const auto& n : net.nodes()) {
    nodes.push_back({{"id", n.name}, {"row", n.row}, {"col", n.col}, {"has_signal", n.has_signal}});
  }
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : net.edges()) {
    edges.push_back({{"id", e.name},
                     {"from", net.node(e.from).name},
                     {"to", net.node(e.to).name},
                     {"length_m", e.length_m},
                     {"lanes", e.lanes}});
  }
  nlohmann::json ph = nlohmann::json::array();
  for (const auto& p : phases.phases) {
    nlohmann::json green = nlohmann::json::array();
    for (int i = 0; i < 12; ++i) {
      if (!p.green[static_cast<std::size_t>(i)]) continue;
      const auto m = movement_from_index(i);
      green.push_back(std::string(to_string(m.approach)) + "-" + std::string(to_string(m.turn)));
    }
    ph.push_back({{"name", p.name}, {"green", green}});
  }
  doc["phases"] = {{"yellow_duration_s", phases.yellow_duration_s}, {"min_hold_s", phases.min_hold_s}, {"table", ph}};
  return doc;
}

RoadNetwork network_from_json(const nlohmann::json& doc) {
  RoadNetwork net;
  net.rows_ = doc.at("grid").at("rows").get<int>();
  net.cols_ = doc.at("grid").at("cols").get<int>();
  net.spacing_ = doc.at("grid").at("spacing_m").get<double>();
  for (const auto& jn : doc.at("nodes")) {
    Node n;
    n.id = static_cast<NodeId>(net.nodes_.size());
    n.name = jn.at("id").get<std::string>();
    n.row = jn.at("row").get<int>();
    n.col = jn.at("col").get<int>();
    n.has_signal = jn.at("has_signal").get<bool>();
    net.nodes_.push_back(n);
  }
  for (const auto& je : doc.at("edges")) {
    Edge e;
    e.id = static_cast<EdgeId>(net.edges_.size());
    e.name = je.at("id").get<std::string>();
    const auto from = net.find_node(je.at("from").get<std::string>());
    const auto to = net.find_node(je.at("to").get<std::string>());
    if (!from || !to) throw std::invalid_argument("edge '" + e.name + "' references an unknown node");
    e.from = *from;
    e.to = *to;
    e.length_m = je.at("length_m").get<double>();
    e.lanes = je.value("lanes", kLanesPerEdge);
    if (e.lanes != kLanesPerEdge) throw std::invalid_argument("edge '" + e.name + "' must have 3 lanes");
    net.edges_.push_back(e);
  }
  net.index();
  return net;
}

PhaseTable phases_from_json(const nlohmann::json& doc) {
  const auto& jp = doc.at("phases");
  PhaseTable t;
  t.yellow_duration_s = jp.at("yellow_duration_s").get<double>();
  t.min_hold_s = jp.at("min_hold_s").get<double>();
  for (const auto& entry : jp.at("table")) {
    Phase p;
    p.name = entry.at("name").get<std::string>();
    for (const auto& g : entry.at("green")) {
      const auto s = g.get<std::string>();
      const auto dash = s.find('-');
      bool found = false;
      for (int i = 0; i < 12 && !found; ++i) {
        const auto m = movement_from_index(i);
        if (s.substr(0, dash) == to_string(m.approach) && s.substr(dash + 1) == to_string(m.turn)) {
          p.green[static_cast<std::size_t>(i)] = true;
          found = true;
        }
      }
      if (!found) throw std::invalid_argument("unknown movement '" + s + "'");
    }
    t.phases.push_back(std::move(p));
  }
  return t;
}

}  // namespace tsc
