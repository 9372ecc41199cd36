#include "tsc/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace tsc {

using nlohmann::json;

namespace {

// Strict view of one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_, (path_.empty() ? std::string("config") : path_) + ": expected an object");
    }
  }

  template <class T>
  void read(const char* key, T& dst) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      dst = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(full(key), full(key) + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), full(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(full(it.key()), "unknown key '" + full(it.key()) + "'");
    }
  }

 private:
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key, key + ": " + msg);
}

}  // namespace

std::vector<std::string> preset_names() { return {"normal", "peak", "block", "block_fixed"}; }

ScenarioConfig preset(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  if (name == "normal") return c;
  if (name == "peak") {
    c.total_vehicles = 10286;
    return c;
  }
  if (name == "block") {
    c.block.enabled = true;
    c.block.randomize = true;
    return c;
  }
  if (name == "block_fixed") {
    c.block.enabled = true;
    c.block.randomize = false;
    c.block.edges = {"D3C3", "D3D2", "D2C2", "C3C2"};
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> central_edges(const RoadNetwork& net) {
  if (net.grid_rows() < 2 || net.grid_cols() < 2) throw std::invalid_argument("grid has no central 2x2 block");
  const int r0 = 1 + (net.grid_rows() - 2) / 2;
  const int c0 = 1 + (net.grid_cols() - 2) / 2;
  const std::string sw = node_name(r0, c0), se = node_name(r0, c0 + 1);
  const std::string nw = node_name(r0 + 1, c0), ne = node_name(r0 + 1, c0 + 1);
  return {ne + nw, nw + ne, ne + se, se + ne, se + sw, sw + se, nw + sw, sw + nw};
}

std::pair<double, double> ScenarioConfig::block_window() const {
  const double start = block.start_s >= 0.0 ? block.start_s : horizon_s / 3.0;
  const double end = block.end_s >= 0.0 ? block.end_s : 2.0 * horizon_s / 3.0;
  return {start, end};
}

RoadNetwork ScenarioConfig::network() const { return build_grid(grid_rows + 2, grid_cols + 2, spacing_m); }

PhaseTable ScenarioConfig::phase_table() const {
  PhaseTable t = default_phase_table();
  t.yellow_duration_s = yellow_s;
  t.min_hold_s = min_hold_s;
  return t;
}

std::vector<BlockEvent> ScenarioConfig::blocks_for(const RoadNetwork& net, std::uint64_t seed) const {
  if (!block.enabled) return {};
  std::vector<std::string> names = block.edges.empty() ? central_edges(net) : block.edges;
  if (block.randomize) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xb10cu};
    std::mt19937_64 rng(seq);
    std::shuffle(names.begin(), names.end(), rng);
    names.resize(static_cast<std::size_t>(std::min<int>(block.count, static_cast<int>(names.size()))));
  }
  BlockEvent ev;
  for (const auto& n : names) ev.edges.push_back(net.edge_by_name(n));
  std::sort(ev.edges.begin(), ev.edges.end());
  std::tie(ev.start_s, ev.end_s) = block_window();
  return {ev};
}

void ScenarioConfig::validate() const {
  check(grid_rows >= 1 && grid_cols >= 1, "network", "grid must have at least one signalized node");
  check(spacing_m >= env.sim.vehicle_length_m, "network.spacing_m", "must hold at least one vehicle");
  check(total_vehicles > 0, "demand.total_vehicles", "must be positive");
  check(horizon_s > 0.0, "demand.horizon_s", "must be positive");
  check(yellow_s >= 0.0, "signals.yellow_s", "must be non-negative");
  check(min_hold_s >= 0.0, "signals.min_hold_s", "must be non-negative");
  check(episodes >= 1, "episodes", "must be >= 1");
  check(!seeds.empty(), "seeds", "must not be empty");
  check(eval_episodes >= 1, "eval_episodes", "must be >= 1");
  check(threads >= 1, "threads", "must be >= 1");
  check(env.decision_interval_s >= env.sim.dt_s, "env.decision_interval_s", "must be at least sim.dt_s");
  check(env.sim.dt_s > 0.0, "sim.dt_s", "must be positive");
  check(env.sim.free_speed_mps > 0.0, "sim.free_speed_mps", "must be positive");
  check(env.sim.vehicle_length_m > 0.0, "sim.vehicle_length_m", "must be positive");
  check(env.sim.saturation_headway_s >= 0.0, "sim.saturation_headway_s", "must be non-negative");
  check(agent.fixed_period_s >= min_hold_s, "fixed_period_s", "must be at least the min-hold");
  check(agent.idqn.buffer_size >= agent.idqn.batch_size && agent.idqn.batch_size >= 1, "idqn.batch_size",
        "must be positive and fit in the buffer");
  check(agent.idqn.target_sync >= 1, "idqn.target_sync", "must be >= 1");
  check(agent.vae.latent >= 1, "vae.latent", "must be >= 1");
  check(agent.vae.conv_channels.size() == agent.vae.strides.size() && !agent.vae.strides.empty(), "vae.strides",
        "need one stride per conv layer");
  try {
    agent.ppo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("ppo", std::string("ppo: ") + e.what());
  }
  if (block.enabled) {
    const auto [start, end] = block_window();
    check(start < end, "block", "start_s must be before end_s");
    check(start >= 0.0 && end <= horizon_s, "block", "window must lie inside the horizon");
    check(block.count >= 1, "block.count", "must be >= 1");
    const auto net = network();
    for (const auto& e : block.edges) check(net.find_edge(e).has_value(), "block.edges", "no edge named '" + e + "'");
    if (!block.randomize) check(!block.edges.empty(), "block.edges", "fixed blocking needs edge names");
  }
}

ScenarioConfig config_from_json(const json& doc) {
  Section top(doc, "");
  std::string base = "normal";
  top.read("preset", base);
  ScenarioConfig c = preset(base);
  top.read("name", c.name);

  if (top.has("network")) {
    auto s = top.child("network");
    s.read("rows", c.grid_rows);
    s.read("cols", c.grid_cols);
    s.read("spacing_m", c.spacing_m);
    s.finish();
  }
  if (top.has("demand")) {
    auto s = top.child("demand");
    s.read("total_vehicles", c.total_vehicles);
    s.read("horizon_s", c.horizon_s);
    s.finish();
  }
  if (top.has("signals")) {
    auto s = top.child("signals");
    s.read("yellow_s", c.yellow_s);
    s.read("min_hold_s", c.min_hold_s);
    s.finish();
  }
  if (top.has("block")) {
    auto s = top.child("block");
    s.read("enabled", c.block.enabled);
    s.read("randomize", c.block.randomize);
    s.read("count", c.block.count);
    s.read("edges", c.block.edges);
    s.read("start_s", c.block.start_s);
    s.read("end_s", c.block.end_s);
    s.finish();
  }
  if (top.has("env")) {
    auto s = top.child("env");
    std::string reward(to_string(c.env.reward));
    s.read("reward", reward);
    try {
      c.env.reward = reward_kind_from_string(reward);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("env.reward", std::string("env.reward: ") + e.what());
    }
    s.read("decision_interval_s", c.env.decision_interval_s);
    s.finish();
  }
  if (top.has("sim")) {
    auto s = top.child("sim");
    s.read("dt_s", c.env.sim.dt_s);
    s.read("free_speed_mps", c.env.sim.free_speed_mps);
    s.read("vehicle_length_m", c.env.sim.vehicle_length_m);
    s.read("saturation_headway_s", c.env.sim.saturation_headway_s);
    s.read("stop_speed_mps", c.env.sim.stop_speed_mps);
    s.finish();
  }
  std::string algo(to_string(c.agent.algo));
  top.read("algorithm", algo);
  try {
    c.agent.algo = algo_from_string(algo);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("algorithm", std::string("algorithm: ") + e.what());
  }
  top.read("episodes", c.episodes);
  top.read("seeds", c.seeds);
  top.read("eval_seeds", c.eval_seeds);
  top.read("eval_episodes", c.eval_episodes);
  top.read("threads", c.threads);
  top.read("fixed_period_s", c.agent.fixed_period_s);
  if (top.has("ppo")) {
    auto s = top.child("ppo");
    auto& p = c.agent.ppo;
    s.read("actor_lr", p.actor_lr);
    s.read("critic_lr", p.critic_lr);
    s.read("lambda", p.lambda);
    s.read("gamma", p.gamma);
    s.read("epochs", p.epochs);
    s.read("clip_eps", p.clip_eps);
    s.read("entropy_coef", p.entropy_coef);
    s.read("reward_scale", p.reward_scale);
    s.read("normalize_advantages", p.normalize_advantages);
    s.finish();
  }
  if (top.has("idqn")) {
    auto s = top.child("idqn");
    auto& q = c.agent.idqn;
    s.read("buffer_size", q.buffer_size);
    s.read("batch_size", q.batch_size);
    s.read("eps_start", q.eps_start);
    s.read("eps_end", q.eps_end);
    s.read("eps_fraction", q.eps_fraction);
    s.read("target_sync", q.target_sync);
    s.read("lr", q.lr);
    s.read("gamma", q.gamma);
    s.read("reward_scale", q.reward_scale);
    s.finish();
  }
  if (top.has("vae")) {
    auto s = top.child("vae");
    auto& v = c.agent.vae;
    s.read("conv_channels", v.conv_channels);
    s.read("strides", v.strides);
    s.read("latent", v.latent);
    s.read("lr", v.lr);
    s.finish();
  }
  top.finish();
  c.env.horizon_s = c.horizon_s;
  c.validate();
  return c;
}

namespace {

int line_of_key(const std::string& text, const std::string& dotted) {
  const auto leaf = dotted.substr(dotted.rfind('.') == std::string::npos ? 0 : dotted.rfind('.') + 1);
  const auto pos = text.find('"' + leaf + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

}  // namespace

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open file");
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path + ":" + std::to_string(line) + ": parse error: " + e.what());
  }
  try {
    return config_from_json(doc);
  } catch (const ConfigError& e) {
    const int line = e.key().empty() ? 0 : line_of_key(text, e.key());
    throw ConfigError(e.key(), path + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + e.what());
  }
}

json to_json(const ScenarioConfig& c) {
  const auto& p = c.agent.ppo;
  const auto& q = c.agent.idqn;
  const auto& v = c.agent.vae;
  return {
      {"name", c.name},
      {"network", {{"rows", c.grid_rows}, {"cols", c.grid_cols}, {"spacing_m", c.spacing_m}}},
      {"demand", {{"total_vehicles", c.total_vehicles}, {"horizon_s", c.horizon_s}}},
      {"signals", {{"yellow_s", c.yellow_s}, {"min_hold_s", c.min_hold_s}}},
      {"block",
       {{"enabled", c.block.enabled},
        {"randomize", c.block.randomize},
        {"count", c.block.count},
        {"edges", c.block.edges},
        {"start_s", c.block.start_s},
        {"end_s", c.block.end_s}}},
      {"env", {{"reward", to_string(c.env.reward)}, {"decision_interval_s", c.env.decision_interval_s}}},
      {"sim",
       {{"dt_s", c.env.sim.dt_s},
        {"free_speed_mps", c.env.sim.free_speed_mps},
        {"vehicle_length_m", c.env.sim.vehicle_length_m},
        {"saturation_headway_s", c.env.sim.saturation_headway_s},
        {"stop_speed_mps", c.env.sim.stop_speed_mps}}},
      {"algorithm", to_string(c.agent.algo)},
      {"episodes", c.episodes},
      {"seeds", c.seeds},
      {"eval_seeds", c.eval_seeds},
      {"eval_episodes", c.eval_episodes},
      {"threads", c.threads},
      {"fixed_period_s", c.agent.fixed_period_s},
      {"ppo",
       {{"actor_lr", p.actor_lr},
        {"critic_lr", p.critic_lr},
        {"lambda", p.lambda},
        {"gamma", p.gamma},
        {"epochs", p.epochs},
        {"clip_eps", p.clip_eps},
        {"entropy_coef", p.entropy_coef},
        {"reward_scale", p.reward_scale},
        {"normalize_advantages", p.normalize_advantages}}},
      {"idqn",
       {{"buffer_size", q.buffer_size},
        {"batch_size", q.batch_size},
        {"eps_start", q.eps_start},
        {"eps_end", q.eps_end},
        {"eps_fraction", q.eps_fraction},
        {"target_sync", q.target_sync},
        {"lr", q.lr},
        {"gamma", q.gamma},
        {"reward_scale", q.reward_scale}}},
      {"vae", {{"conv_channels", v.conv_channels}, {"strides", v.strides}, {"latent", v.latent}, {"lr", v.lr}}},
  };
}

}  // namespace tsc
