#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsc/agents/trainer.hpp"
#include "tsc/env.hpp"
#include "tsc/microsim.hpp"

namespace tsc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  /// Dotted path of the offending key, empty when not tied to one.
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct BlockSpec {
  bool enabled = false;
  /// Draw `count` edges per seed from `edges` (or the central candidates when
  /// empty); otherwise close exactly `edges`.
  bool randomize = true;
  int count = 4;
  std::vector<std::string> edges;
  /// Negative means the middle third of the horizon.
  double start_s = -1.0;
  double end_s = -1.0;
};

struct ScenarioConfig {
  std::string name = "normal";
  int grid_rows = 4;  // signalized grid, boundary ring excluded
  int grid_cols = 4;
  double spacing_m = 200.0;
  int total_vehicles = 8000;
  double horizon_s = 3600.0;
  double yellow_s = 3.0;
  double min_hold_s = 10.0;
  BlockSpec block;
  EnvConfig env;
  AgentConfig agent;
  int episodes = 80;
  std::vector<std::uint64_t> seeds{42, 43, 44, 45, 46};
  std::vector<std::uint64_t> eval_seeds;  // empty: same as seeds
  int eval_episodes = 1;
  int threads = 1;

  void validate() const;
  RoadNetwork network() const;
  PhaseTable phase_table() const;
  /// The block window for this seed; empty unless blocking is enabled.
  std::vector<BlockEvent> blocks_for(const RoadNetwork& net, std::uint64_t seed) const;
  std::pair<double, double> block_window() const;
};

/// `normal`, `peak`, `block` (random central closures) or `block_fixed`
/// (D3C3, D3D2, D2C2, C3C2).
ScenarioConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// The eight directed edges joining the central 2 x 2 block of the grid.
std::vector<std::string> central_edges(const RoadNetwork& net);

/// Overlays `doc` on the preset it names (default `normal`). Unknown keys and
/// invalid values raise ConfigError naming the offending key.
ScenarioConfig config_from_json(const nlohmann::json& doc);
/// As above, but errors carry the line of the offending key in `path`.
ScenarioConfig load_config(const std::string& path);

nlohmann::json to_json(const ScenarioConfig& cfg);

}  // namespace tsc
