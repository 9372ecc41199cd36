#include "tsc/harness/experiment.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace tsc {

namespace {

EnvConfig env_config(const ScenarioConfig& cfg) {
  EnvConfig e = cfg.env;
  e.horizon_s = cfg.horizon_s;
  return e;
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

RunRecord to_record(std::uint64_t seed, int episode, const EpisodeResult& r) {
  return {seed, episode, r.ret, r.wait, r.queue, r.speed};
}

}  // namespace

std::vector<RunRecord> run_seed(const ScenarioConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const RoadNetwork net = cfg.network();
  TrafficEnv env(net, cfg.phase_table(), env_config(cfg));
  Trainer trainer(env, cfg.agent, seed);
  trainer.set_training_steps(static_cast<long>(cfg.episodes) * env.steps_per_episode());
  const auto demand = generate_demand(net, cfg.total_vehicles, cfg.horizon_s, seed);
  const auto blocks = cfg.blocks_for(net, seed);
  const bool learn = cfg.agent.algo != Algo::Fixed;

  std::vector<RunRecord> out;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    try {
      out.push_back(to_record(seed, ep, trainer.run_episode(env, demand, blocks, learn, false)));
    } catch (const std::exception& e) {
      throw std::runtime_error("seed " + std::to_string(seed) + ", episode " + std::to_string(ep) + ": " + e.what());
    }
    if (opts.on_episode) opts.on_episode(out.back());
  }
  if (!opts.checkpoint_dir.empty()) {
    trainer.save(opts.checkpoint_dir + "/checkpoint_seed" + std::to_string(seed) + ".json");
  }
  return out;
}

std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<std::vector<RunRecord>> per_seed(n);

  if (cfg.threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) per_seed[i] = run_seed(cfg, cfg.seeds[i], opts);
  } else {
    std::mutex mu;
    RunOptions shared = opts;
    if (opts.on_episode) {
      shared.on_episode = [&](const RunRecord& r) {
        std::lock_guard<std::mutex> lock(mu);
        opts.on_episode(r);
      };
    }
    std::vector<std::exception_ptr> errors(n);
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= n) return;
          i = next++;
        }
        try {
          per_seed[i] = run_seed(cfg, cfg.seeds[i], shared);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(cfg.threads, static_cast<int>(n)); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<RunRecord> all;
  for (auto& v : per_seed) all.insert(all.end(), v.begin(), v.end());
  return all;
}

EvalResult evaluate(const ScenarioConfig& cfg, const std::string& checkpoint) {
  cfg.validate();
  const RoadNetwork net = cfg.network();
  TrafficEnv env(net, cfg.phase_table(), env_config(cfg));
  const auto& seeds = cfg.eval_seeds.empty() ? cfg.seeds : cfg.eval_seeds;
  EvalResult out;
  double total = 0.0;
  for (auto seed : seeds) {
    Trainer trainer(env, cfg.agent, seed);
    if (!checkpoint.empty()) trainer.load(checkpoint);
    const auto demand = generate_demand(net, cfg.total_vehicles, cfg.horizon_s, seed);
    const auto blocks = cfg.blocks_for(net, seed);
    for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
      out.rows.push_back(to_record(seed, ep, trainer.run_episode(env, demand, blocks, false, true)));
      total += out.rows.back().ret;
    }
  }
  out.mean_return = total / static_cast<double>(out.rows.size());
  return out;
}

int direction_sign(const RoadNetwork& net, EdgeId e) {
  const auto& edge = net.edge(e);
  const auto& a = net.node(edge.from);
  const auto& b = net.node(edge.to);
  return (b.col > a.col || b.row > a.row) ? 1 : -1;
}

FlowCensus flow_census(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const RoadNetwork net = cfg.network();
  TrafficEnv env(net, cfg.phase_table(), env_config(cfg));
  AgentConfig fixed = cfg.agent;
  fixed.algo = Algo::Fixed;
  Trainer controller(env, fixed, seed);
  const auto demand = generate_demand(net, cfg.total_vehicles, cfg.horizon_s, seed);

  FlowCensus c;
  c.bins = static_cast<int>(std::ceil(cfg.horizon_s / 60.0));
  c.blocks = cfg.blocks_for(net, seed);
  auto counts = [&](const std::vector<BlockEvent>& blocks) {
    controller.run_episode(env, demand, blocks, false, true);
    std::vector<std::vector<int>> out;
    for (const auto& bins : env.sim().state().entries) {
      std::vector<int> row(static_cast<std::size_t>(c.bins), 0);
      for (std::size_t m = 0; m < bins.size() && m < row.size(); ++m) row[m] = bins[m];
      out.push_back(std::move(row));
    }
    return out;
  };
  c.baseline = counts({});
  c.blocked = counts(c.blocks);
  for (const auto& e : net.edges()) {
    c.edges.push_back(e.name);
    c.sign.push_back(direction_sign(net, e.id));
  }
  return c;
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "seed,episode,return,wait,queue,speed\n";
  for (const auto& r : records) {
    out << r.seed << ',' << r.episode << ',' << fmt_double(r.ret) << ',' << fmt_double(r.wait) << ','
        << fmt_double(r.queue) << ',' << fmt_double(r.speed) << '\n';
  }
  return out.str();
}

std::vector<RunRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("seed,episode,return,wait,queue,speed", 0) != 0) {
    throw std::invalid_argument("records CSV must start with the header seed,episode,return,wait,queue,speed");
  }
  std::vector<RunRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::invalid_argument("records CSV line " + std::to_string(lineno) + ": expected 6 fields");
    try {
      out.push_back({std::stoull(cells[0]), std::stoi(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                     std::stod(cells[4]), std::stod(cells[5])});
    } catch (const std::exception&) {
      throw std::invalid_argument("records CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

std::string census_csv(const FlowCensus& c) {
  std::ostringstream out;
  out << "edge_id,minute_bin,sign,baseline,blocked\n";
  for (std::size_t e = 0; e < c.edges.size(); ++e) {
    for (int m = 0; m < c.bins; ++m) {
      const int b = c.baseline[e][static_cast<std::size_t>(m)];
      const int k = c.blocked[e][static_cast<std::size_t>(m)];
      if (b == 0 && k == 0) continue;
      out << c.edges[e] << ',' << m << ',' << c.sign[e] << ',' << b << ',' << k << '\n';
    }
  }
  return out.str();
}

}  // namespace tsc
