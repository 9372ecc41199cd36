// tsclab: command-line front end for the signal-control lab.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tsc/harness/config.hpp"
#include "tsc/harness/experiment.hpp"
#include "tsc/harness/plots.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

struct Common {
  std::string config;
  std::string preset;
  std::vector<std::uint64_t> seeds;
  int episodes = 0;
  std::string out = "out";
  std::string algo;
};

void add_common(CLI::App* cmd, Common& c, bool with_episodes = true) {
  cmd->add_option("--config", c.config, "JSON scenario file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "builtin scenario: normal, peak, block, block_fixed");
  cmd->add_option("--seed,--seeds", c.seeds, "seed list, e.g. --seeds 42,43,44")->delimiter(',');
  if (with_episodes) cmd->add_option("--episodes", c.episodes, "episodes per seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--algo", c.algo, "fixed, ippo, mappo, idqn or maclight");
}

tsc::ScenarioConfig resolve(const Common& c) {
  if (!c.config.empty() && !c.preset.empty()) throw tsc::ConfigError("give either --config or --preset, not both");
  tsc::ScenarioConfig cfg = c.config.empty() ? tsc::preset(c.preset.empty() ? "normal" : c.preset)
                                             : tsc::load_config(c.config);
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (c.episodes != 0) cfg.episodes = c.episodes;
  if (!c.algo.empty()) {
    try {
      cfg.agent.algo = tsc::algo_from_string(c.algo);
    } catch (const std::invalid_argument& e) {
      throw tsc::ConfigError("algorithm", e.what());
    }
  }
  cfg.env.horizon_s = cfg.horizon_s;
  cfg.validate();
  return cfg;
}

void write(const fs::path& p, const std::string& body) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
}

void progress(const tsc::RunRecord& r) {
  std::cerr << "seed " << r.seed << " episode " << r.episode << ": return " << r.ret << ", wait " << r.wait
            << ", queue " << r.queue << ", speed " << r.speed << '\n';
}

int cmd_simulate(const Common& c) {
  auto cfg = resolve(c);
  cfg.agent.algo = tsc::Algo::Fixed;
  fs::create_directories(c.out);
  const auto net = cfg.network();
  std::vector<tsc::RunRecord> records;
  for (auto seed : cfg.seeds) {
    tsc::EnvConfig ec = cfg.env;
    tsc::TrafficEnv env(net, cfg.phase_table(), ec);
    tsc::Trainer controller(env, cfg.agent, seed);
    const auto demand = tsc::generate_demand(net, cfg.total_vehicles, cfg.horizon_s, seed);
    const auto blocks = cfg.blocks_for(net, seed);
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      const auto r = controller.run_episode(env, demand, blocks, false, true);
      records.push_back({seed, ep, r.ret, r.wait, r.queue, r.speed});
      progress(records.back());
    }
    write(fs::path(c.out) / ("flow_seed" + std::to_string(seed) + ".csv"), tsc::flow_csv(net, env.sim().state()));
  }
  write(fs::path(c.out) / "records.csv", tsc::records_csv(records));
  std::cout << "wrote " << records.size() << " records to " << (fs::path(c.out) / "records.csv").string() << '\n';
  return kOk;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  fs::create_directories(c.out);
  write(fs::path(c.out) / "config.json", tsc::to_json(cfg).dump(2) + "\n");
  tsc::RunOptions opts;
  opts.checkpoint_dir = c.out;
  opts.on_episode = progress;
  const auto records = tsc::run_experiment(cfg, opts);
  write(fs::path(c.out) / "records.csv", tsc::records_csv(records));
  tsc::emit_plots(records, c.out);
  std::cout << "wrote " << records.size() << " records to " << (fs::path(c.out) / "records.csv").string() << '\n';
  return kOk;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint) {
  const auto cfg = resolve(c);
  const auto result = tsc::evaluate(cfg, checkpoint);
  fs::create_directories(c.out);
  write(fs::path(c.out) / "eval.csv", tsc::records_csv(result.rows));
  std::cout << "mean return " << result.mean_return << " over " << result.rows.size() << " episodes\n";
  return kOk;
}

int cmd_census(const Common& c) {
  const auto cfg = resolve(c);
  fs::create_directories(c.out);
  const auto net = cfg.network();
  for (auto seed : cfg.seeds) {
    const auto census = tsc::flow_census(cfg, seed);
    write(fs::path(c.out) / ("census_seed" + std::to_string(seed) + ".csv"), tsc::census_csv(census));
    std::vector<std::string> edges;
    for (const auto& b : census.blocks) {
      for (auto e : b.edges) edges.push_back(net.edge(e).name);
    }
    if (edges.empty()) edges = tsc::central_edges(net);
    tsc::emit_flow_plots(census, (fs::path(c.out) / ("flow_seed" + std::to_string(seed))).string(), edges);
  }
  std::cout << "wrote censuses for " << cfg.seeds.size() << " seed(s) to " << c.out << '\n';
  return kOk;
}

int cmd_plot(const std::string& records_path, const std::string& out) {
  std::ifstream f(records_path);
  if (!f) throw std::runtime_error("cannot read " + records_path);
  std::stringstream buf;
  buf << f.rdbuf();
  const auto files = tsc::emit_plots(tsc::parse_records_csv(buf.str()), out);
  for (const auto& p : files) std::cout << p << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic signal control lab: simulation, training and evaluation"};
  app.require_subcommand(1);

  Common sim_opts, train_opts, eval_opts, census_opts;
  std::string checkpoint, records_path, plot_out = "out";
  auto* sim = app.add_subcommand("simulate", "run the fixed-time controller without learning");
  add_common(sim, sim_opts);
  auto* train = app.add_subcommand("train", "train agents and write per-episode records");
  add_common(train, train_opts);
  auto* eval = app.add_subcommand("evaluate", "greedy rollouts of a checkpoint (or a fresh initialization)");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON written by train")->check(CLI::ExistingFile);
  auto* census = app.add_subcommand("census", "paired per-edge flow counts with and without blocks");
  add_common(census, census_opts, false);
  auto* plot = app.add_subcommand("plot", "SVG curves from a records CSV");
  plot->add_option("--records", records_path, "records CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_evaluate(eval_opts, checkpoint);
    if (*census) return cmd_census(census_opts);
    if (*plot) return cmd_plot(records_path, plot_out);
  } catch (const tsc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
