#pragma once

#include <string>
#include <vector>

#include "tsc/harness/experiment.hpp"

namespace tsc {

inline const std::vector<std::string> kIndicators{"return", "wait", "queue", "speed"};

struct BandSeries {
  std::vector<double> x, mean, lo, hi;
};

/// Per-episode mean across seeds with the min and max as the band.
BandSeries aggregate(const std::vector<RunRecord>& records, const std::string& indicator);

std::string band_chart_svg(const std::string& title, const std::string& y_label, const BandSeries& s);
/// Two per-minute curves; the window [start, end) minutes is marked by dashed lines.
std::string flow_chart_svg(const std::string& title, const std::vector<double>& baseline,
                           const std::vector<double>& blocked, double window_start_min, double window_end_min);

/// Writes <outdir>/<indicator>.svg per requested indicator and returns the paths.
std::vector<std::string> emit_plots(const std::vector<RunRecord>& records, const std::string& outdir,
                                    const std::vector<std::string>& indicators = kIndicators);
/// Writes <outdir>/flow_<edge>.svg per edge (signed counts) and returns the paths.
std::vector<std::string> emit_flow_plots(const FlowCensus& census, const std::string& outdir,
                                         const std::vector<std::string>& edges);

}  // namespace tsc
