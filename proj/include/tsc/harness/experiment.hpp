#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsc/harness/config.hpp"

namespace tsc {

/// One row per (seed, episode). Higher is better for return and speed, lower
/// for wait and queue.
struct RunRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  double ret = 0.0;
  double wait = 0.0;
  double queue = 0.0;
  double speed = 0.0;
};

struct RunOptions {
  /// When set, the final parameters of each seed go to
  /// <dir>/checkpoint_seed<seed>.json.
  std::string checkpoint_dir;
  std::function<void(const RunRecord&)> on_episode;
};

/// Trains `cfg.episodes` episodes per seed; records are ordered by seed then
/// episode regardless of threading.
std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, const RunOptions& opts = {});
std::vector<RunRecord> run_seed(const ScenarioConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});

struct EvalResult {
  double mean_return = 0.0;
  std::vector<RunRecord> rows;
};

/// Greedy rollouts without learning over the evaluation seeds. An empty
/// checkpoint path evaluates the seed's fresh initialization.
EvalResult evaluate(const ScenarioConfig& cfg, const std::string& checkpoint = {});

/// Per-edge minute-binned entry counts of the same demand with and without
/// the configured blocks, both under the fixed-time controller.
struct FlowCensus {
  std::vector<std::string> edges;
  std::vector<int> sign;  // +1 eastbound/northbound, -1 westbound/southbound
  std::vector<std::vector<int>> baseline;
  std::vector<std::vector<int>> blocked;
  std::vector<BlockEvent> blocks;
  int bins = 0;
};

FlowCensus flow_census(const ScenarioConfig& cfg, std::uint64_t seed);
int direction_sign(const RoadNetwork& net, EdgeId e);

std::string records_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_records_csv(const std::string& text);
/// edge_id,minute_bin,sign,baseline,blocked
std::string census_csv(const FlowCensus& census);

}  // namespace tsc
