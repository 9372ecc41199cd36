#include "tsc/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tsc {

namespace {

constexpr double kW = 720, kH = 420, kLeft = 80, kRight = 20, kTop = 40, kBottom = 50;

double pick(const RunRecord& r, const std::string& indicator) {
  if (indicator == "return") return r.ret;
  if (indicator == "wait") return r.wait;
  if (indicator == "queue") return r.queue;
  if (indicator == "speed") return r.speed;
  throw std::invalid_argument("unknown indicator '" + indicator + "'");
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    const double pad = std::max(1.0, std::abs(y0) * 0.05);
    y0 -= pad;
    y1 += pad;
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  return {x0, x1, y0, y1};
}

void header(std::ostringstream& out, const std::string& title, const std::string& x_label, const std::string& y_label,
            const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << kH / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label)
      << "</text>\n";
  out << "<g stroke=\"#999\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
      << "\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom << "\"/>\n";
  out << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
    out << "<text x=\"" << f.px(x) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  }
}

std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ostringstream p;
  for (std::size_t i = 0; i < xs.size(); ++i) p << (i ? " " : "") << f.px(xs[i]) << ',' << f.py(ys[i]);
  return p.str();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << body;
}

}  // namespace

BandSeries aggregate(const std::vector<RunRecord>& records, const std::string& indicator) {
  std::map<int, std::vector<double>> by_episode;
  for (const auto& r : records) by_episode[r.episode].push_back(pick(r, indicator));
  BandSeries s;
  for (const auto& [ep, vals] : by_episode) {
    s.x.push_back(ep);
    double sum = 0.0;
    for (double v : vals) sum += v;
    s.mean.push_back(sum / static_cast<double>(vals.size()));
    s.lo.push_back(*std::min_element(vals.begin(), vals.end()));
    s.hi.push_back(*std::max_element(vals.begin(), vals.end()));
  }
  return s;
}

std::string band_chart_svg(const std::string& title, const std::string& y_label, const BandSeries& s) {
  if (s.x.empty()) throw std::invalid_argument("no data to plot");
  const Frame f = make_frame(s.x.front(), s.x.back(), *std::min_element(s.lo.begin(), s.lo.end()),
                             *std::max_element(s.hi.begin(), s.hi.end()));
  std::ostringstream out;
  header(out, title, "episode", y_label, f);
  std::vector<double> bx(s.x), by(s.hi);
  bx.insert(bx.end(), s.x.rbegin(), s.x.rend());
  by.insert(by.end(), s.lo.rbegin(), s.lo.rend());
  out << "<polygon points=\"" << polyline(f, bx, by) << "\" fill=\"#4a78c2\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  out << "<polyline points=\"" << polyline(f, s.x, s.mean) << "\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>\n";
  out << "</svg>\n";
  return out.str();
}

std::string flow_chart_svg(const std::string& title, const std::vector<double>& baseline,
                           const std::vector<double>& blocked, double window_start_min, double window_end_min) {
  const std::size_t n = std::max(baseline.size(), blocked.size());
  if (n == 0) throw std::invalid_argument("no data to plot");
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i);
  double lo = 0.0, hi = 0.0;
  for (double v : baseline) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : blocked) lo = std::min(lo, v), hi = std::max(hi, v);
  const Frame f = make_frame(0.0, static_cast<double>(n - 1), lo, hi);
  std::ostringstream out;
  header(out, title, "minute", "vehicles entering per minute", f);
  for (double m : {window_start_min, window_end_min}) {
    out << "<line x1=\"" << f.px(m) << "\" y1=\"" << kTop << "\" x2=\"" << f.px(m) << "\" y2=\"" << kH - kBottom
        << "\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\"/>\n";
  }
  auto curve = [&](const std::vector<double>& ys, const char* color) {
    std::vector<double> padded(ys);
    padded.resize(n, 0.0);
    out << "<polyline points=\"" << polyline(f, xs, padded) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
  };
  curve(baseline, "#7f8c8d");
  curve(blocked, "#1f4e9c");
  out << "<text x=\"" << kW - kRight - 150 << "\" y=\"" << kTop + 12 << "\" fill=\"#7f8c8d\">baseline</text>\n";
  out << "<text x=\"" << kW - kRight - 150 << "\" y=\"" << kTop + 28 << "\" fill=\"#1f4e9c\">blocked</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> emit_plots(const std::vector<RunRecord>& records, const std::string& outdir,
                                    const std::vector<std::string>& indicators) {
  if (records.empty()) throw std::invalid_argument("emit_plots: no records");
  std::filesystem::create_directories(outdir);
  std::vector<std::string> files;
  for (const auto& ind : indicators) {
    const auto path = (std::filesystem::path(outdir) / (ind + ".svg")).string();
    write_file(path, band_chart_svg(ind + " per episode (mean, min-max over seeds)", ind, aggregate(records, ind)));
    files.push_back(path);
  }
  return files;
}

std::vector<std::string> emit_flow_plots(const FlowCensus& census, const std::string& outdir,
                                         const std::vector<std::string>& edges) {
  std::filesystem::create_directories(outdir);
  double start = 0.0, end = 0.0;
  if (!census.blocks.empty()) {
    start = census.blocks.front().start_s / 60.0;
    end = census.blocks.front().end_s / 60.0;
  }
  std::vector<std::string> files;
  for (const auto& name : edges) {
    auto it = std::find(census.edges.begin(), census.edges.end(), name);
    if (it == census.edges.end()) throw std::invalid_argument("census has no edge '" + name + "'");
    const auto e = static_cast<std::size_t>(it - census.edges.begin());
    std::vector<double> base, blocked;
    for (int v : census.baseline[e]) base.push_back(census.sign[e] * v);
    for (int v : census.blocked[e]) blocked.push_back(census.sign[e] * v);
    const auto path = (std::filesystem::path(outdir) / ("flow_" + name + ".svg")).string();
    write_file(path, flow_chart_svg("flow on " + name, base, blocked, start, end));
    files.push_back(path);
  }
  return files;
}

}  // namespace tsc
