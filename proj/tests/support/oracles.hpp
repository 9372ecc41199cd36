#pragma once

// Independent reference implementations used only by tests.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsc/roadnet.hpp"

namespace tsc::testing {

// Direct 6-loop cross-correlation over [N, C, H, W] row-major buffers.
inline Eigen::VectorXd direct_conv2d(const Eigen::VectorXd& x, int n, int c, int h, int w, const Eigen::VectorXd& k,
                                     int o, int kh, int kw, const Eigen::VectorXd& b, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * o * ho * wo);
  for (int s = 0; s < n; ++s)
    for (int oc = 0; oc < o; ++oc)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double acc = b[oc];
          for (int ic = 0; ic < c; ++ic)
            for (int a = 0; a < kh; ++a)
              for (int bb = 0; bb < kw; ++bb) {
                const int ii = i * stride - pad + a, jj = j * stride - pad + bb;
                if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                acc += k[((oc * c + ic) * kh + a) * kw + bb] * x[((s * c + ic) * h + ii) * w + jj];
              }
          y[((s * o + oc) * ho + i) * wo + j] = acc;
        }
  return y;
}

// GAE by explicit summation: A_t = sum_l (gamma*lambda)^l delta_{t+l}.
inline std::vector<double> gae_direct(const std::vector<double>& d, double gamma, double lambda) {
  std::vector<double> a(d.size(), 0.0);
  for (std::size_t t = 0; t < d.size(); ++t) {
    double w = 1.0;
    for (std::size_t l = t; l < d.size(); ++l) {
      a[t] += w * d[l];
      w *= gamma * lambda;
    }
  }
  return a;
}

// Straight-segment trajectories through a box with three incoming and three
// outgoing lanes per arm, right-hand traffic. Lane k sits k + 0.5 lane widths
// to the right of the road centre line, lane 0 innermost.
struct Point {
  double x, y;
};

inline Point arm_dir(int arm) {
  static const std::array<Point, 4> d{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};
  return d[static_cast<std::size_t>(arm)];
}

inline Point right_of(Point h) { return {h.y, -h.x}; }

inline std::pair<Point, Point> lane_segment(int from_arm, int to_arm, int lane) {
  const Point u = arm_dir(from_arm);
  const Point heading{-u.x, -u.y};
  const Point r_in = right_of(heading);
  const Point start{3 * u.x + (lane + 0.5) * r_in.x, 3 * u.y + (lane + 0.5) * r_in.y};
  const Point v = arm_dir(to_arm);
  const Point r_out = right_of(v);
  const Point end{3 * v.x + (lane + 0.5) * r_out.x, 3 * v.y + (lane + 0.5) * r_out.y};
  return {start, end};
}

inline bool segments_cross(std::pair<Point, Point> p, std::pair<Point, Point> q) {
  auto cross = [](Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  const double d1 = cross(q.first, q.second, p.first), d2 = cross(q.first, q.second, p.second);
  const double d3 = cross(p.first, p.second, q.first), d4 = cross(p.first, p.second, q.second);
  return ((d1 > 1e-12 && d2 < -1e-12) || (d1 < -1e-12 && d2 > 1e-12)) &&
         ((d3 > 1e-12 && d4 < -1e-12) || (d3 < -1e-12 && d4 > 1e-12));
}

inline int exit_arm(int arm, Turn t) {
  const int offset = t == Turn::Left ? 1 : t == Turn::Straight ? 2 : 3;
  return (arm + offset) % 4;
}

inline std::vector<int> lanes_for(Turn t) {
  switch (t) {
    case Turn::Left: return {0};
    case Turn::Straight: return {1, 2};
    case Turn::Right: return {2};
  }
  return {};
}

inline bool geometric_conflict(Movement a, Movement b) {
  const int aa = static_cast<int>(a.approach), ba = static_cast<int>(b.approach);
  for (int la : lanes_for(a.turn))
    for (int lb : lanes_for(b.turn))
      if (segments_cross(lane_segment(aa, exit_arm(aa, a.turn), la), lane_segment(ba, exit_arm(ba, b.turn), lb)))
        return true;
  return false;
}

// Minimum-length path with no U-turns by exhaustive DFS over paths that use
// each edge at most once (an optimal walk never repeats an edge); ties by
// lexicographic edge-name sequence.
inline std::optional<std::vector<EdgeId>> brute_force_route(const RoadNetwork& net, NodeId from, NodeId to,
                                                            const std::vector<bool>& closed) {
  std::optional<std::vector<EdgeId>> best;
  double best_len = std::numeric_limits<double>::infinity();
  std::vector<std::string> best_names;
  std::vector<EdgeId> path;
  std::vector<bool> used(net.edges().size(), false);

  std::function<void(NodeId, double)> dfs = [&](NodeId n, double len) {
    if (len > best_len + 1e-9) return;
    if (n == to) {
      std::vector<std::string> names;
      for (EdgeId e : path) names.push_back(net.edge(e).name);
      if (len < best_len - 1e-9 || names < best_names) {
        best_len = len;
        best_names = names;
        best = path;
      }
      return;
    }
    for (EdgeId e : net.out_edges(n)) {
      if (closed[static_cast<std::size_t>(e)]) continue;
      if (used[static_cast<std::size_t>(e)]) continue;
      if (!path.empty() && !net.turn_between(path.back(), e)) continue;
      used[static_cast<std::size_t>(e)] = true;
      path.push_back(e);
      dfs(net.edge(e).to, len + net.edge(e).length_m);
      path.pop_back();
      used[static_cast<std::size_t>(e)] = false;
    }
  };
  dfs(from, 0.0);
  return best;
}

}  // namespace tsc::testing
