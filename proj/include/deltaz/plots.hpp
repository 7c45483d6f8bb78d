#pragma once

// Self-contained SVG plots. Output bytes depend only on the input values.

#include "deltaz/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace deltaz {

namespace svg {

inline std::string f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

/// Linear map of a data range onto a pixel range.
struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

inline void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double w = std::max(1e-6, std::abs(lo) * 1e-3);
    lo -= w;
    hi += w;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h) {
    o_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
       << " " << h << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12) {
    o_ << "<text x=\"" << f3(x) << "\" y=\"" << f3(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
       << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke, double width = 1.0) {
    o_ << "<line x1=\"" << f3(x1) << "\" y1=\"" << f3(y1) << "\" x2=\"" << f3(x2) << "\" y2=\"" << f3(y2)
       << "\" stroke=\"" << stroke << "\" stroke-width=\"" << f3(width) << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke, double width = 1.5) {
    o_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << f3(width) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) o_ << (i ? " " : "") << f3(pts[i].first) << "," << f3(pts[i].second);
    o_ << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const char* fill, double opacity) {
    o_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << f3(opacity) << "\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) o_ << (i ? " " : "") << f3(pts[i].first) << "," << f3(pts[i].second);
    o_ << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const char* fill, double opacity) {
    o_ << "<rect x=\"" << f3(x) << "\" y=\"" << f3(y) << "\" width=\"" << f3(w) << "\" height=\"" << f3(h)
       << "\" fill=\"" << fill << "\" fill-opacity=\"" << f3(opacity) << "\"/>\n";
  }

  void frame(const Axis& x, const Axis& y, const std::string& title, const std::string& xlabel,
             const std::string& ylabel) {
    line(x.px_lo, y.px_lo, x.px_hi, y.px_lo, "black");
    line(x.px_lo, y.px_lo, x.px_lo, y.px_hi, "black");
    for (int k = 0; k <= 4; ++k) {
      const double xv = x.lo + (x.hi - x.lo) * k / 4.0;
      const double yv = y.lo + (y.hi - y.lo) * k / 4.0;
      line(x(xv), y.px_lo, x(xv), y.px_lo + 4, "black");
      text(x(xv), y.px_lo + 18, f3(xv), "middle", 10);
      line(x.px_lo - 4, y(yv), x.px_lo, y(yv), "black");
      text(x.px_lo - 6, y(yv) + 4, f3(yv), "end", 10);
    }
    text(0.5 * w_, 20, title, "middle", 14);
    text(0.5 * (x.px_lo + x.px_hi), h_ - 8, xlabel);
    o_ << "<text x=\"14\" y=\"" << f3(0.5 * (y.px_lo + y.px_hi)) << "\" font-family=\"sans-serif\" font-size=\"12\" "
       << "text-anchor=\"middle\" transform=\"rotate(-90 14 " << f3(0.5 * (y.px_lo + y.px_hi)) << ")\">" << ylabel
       << "</text>\n";
  }

  std::string finish() {
    o_ << "</svg>\n";
    return o_.str();
  }

 private:
  int w_, h_;
  std::ostringstream o_;
};

}  // namespace svg

inline constexpr const char* kParamNames[kSkillDim] = {"rho1", "theta1", "rho2", "theta2"};

/// Mean +- std envelope of one normalized parameter across policy updates.
inline std::string plot_parameter(const LearningCurve& curve, int param) {
  svg::Canvas c(640, 400);
  const auto& pts = curve.points;
  double ylo = 1e300, yhi = -1e300;
  for (const auto& p : pts) {
    ylo = std::min(ylo, p.mean[param] - p.std[param]);
    yhi = std::max(yhi, p.mean[param] + p.std[param]);
  }
  svg::pad_range(ylo, yhi);
  double xlo = 0.0, xhi = pts.empty() ? 1.0 : static_cast<double>(pts.back().update);
  if (!(xhi > xlo)) xhi = xlo + 1.0;
  const svg::Axis x{xlo, xhi, 70.0, 610.0};
  const svg::Axis y{ylo, yhi, 350.0, 40.0};
  c.frame(x, y,
          std::string("robot ") + std::to_string(curve.robot) + " run " + std::to_string(curve.run) + ": " +
              kParamNames[param] + " (mean +/- std)",
          "policy update", "normalized value");

  if (pts.size() == 1) {
    const auto& p = pts.front();
    c.rect(x(p.update) - 6, y(p.mean[param] + p.std[param]), 12,
           y(p.mean[param] - p.std[param]) - y(p.mean[param] + p.std[param]), svg::color(0), 0.3);
    c.line(x(p.update) - 6, y(p.mean[param]), x(p.update) + 6, y(p.mean[param]), svg::color(0), 2.0);
    return c.finish();
  }
  std::vector<std::pair<double, double>> band, mean;
  for (const auto& p : pts) band.emplace_back(x(p.update), y(p.mean[param] + p.std[param]));
  for (auto it = pts.rbegin(); it != pts.rend(); ++it)
    band.emplace_back(x(it->update), y(it->mean[param] - it->std[param]));
  for (const auto& p : pts) mean.emplace_back(x(p.update), y(p.mean[param]));
  c.polygon(band, svg::color(0), 0.3);
  c.polyline(mean, svg::color(0), 2.0);
  return c.finish();
}

/// Per-robot Gaussian of final-batch rewards across runs, with +-2 SE bars.
inline std::string plot_rewards(const BenchSummary& s) {
  svg::Canvas c(640, 400);
  auto width = [](const RobotSummary& r) {
    return r.final_reward_sd > 0.0 ? r.final_reward_sd : std::max(1e-6, 1e-4 * std::abs(r.final_reward_mean));
  };
  double xlo = 1e300, xhi = -1e300;
  for (const auto& r : s.robots) {
    xlo = std::min(xlo, r.final_reward_mean - 4.0 * width(r));
    xhi = std::max(xhi, r.final_reward_mean + 4.0 * width(r));
  }
  if (s.robots.empty()) xlo = 0.0, xhi = 1.0;
  svg::pad_range(xlo, xhi);
  double peak = 0.0;
  for (const auto& r : s.robots) peak = std::max(peak, 1.0 / (width(r) * std::sqrt(2.0 * std::numbers::pi)));
  if (!(peak > 0.0)) peak = 1.0;
  const svg::Axis x{xlo, xhi, 70.0, 610.0};
  const svg::Axis y{0.0, 1.1 * peak, 350.0, 40.0};
  c.frame(x, y, "final-batch reward across runs, per robot", "mean final-batch reward", "density");

  constexpr int kSamples = 201;
  for (std::size_t i = 0; i < s.robots.size(); ++i) {
    const auto& r = s.robots[i];
    const double sd = width(r);
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < kSamples; ++k) {
      const double v = xlo + (xhi - xlo) * k / (kSamples - 1);
      const double z = (v - r.final_reward_mean) / sd;
      pts.emplace_back(x(v), y(std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi))));
    }
    c.polyline(pts, svg::color(i), 2.0);
    const double bar_y = 60.0 + 14.0 * static_cast<double>(i);
    c.line(x(r.final_reward_mean - 2.0 * r.final_reward_se), bar_y, x(r.final_reward_mean + 2.0 * r.final_reward_se),
           bar_y, svg::color(i), 2.0);
    c.text(612, bar_y + 4, "robot " + std::to_string(r.robot), "start", 10);
  }
  return c.finish();
}

/// Writes param{1..4}.svg for the first curve and rewards.svg into out_dir.
inline void emit_plots(const std::vector<LearningCurve>& curves, const BenchSummary& summary,
                       const std::filesystem::path& out_dir) {
  if (curves.empty()) throw std::invalid_argument("emit_plots: no curves");
  std::filesystem::create_directories(out_dir);
  const auto first = std::find_if(curves.begin(), curves.end(), [](const LearningCurve& c) { return !c.points.empty(); });
  if (first == curves.end()) throw std::invalid_argument("emit_plots: all curves are empty");
  for (int p = 0; p < kSkillDim; ++p)
    write_text(out_dir / ("param" + std::to_string(p + 1) + ".svg"), plot_parameter(*first, p));
  write_text(out_dir / "rewards.svg", plot_rewards(summary));
}

struct BenchmarkResult {
  std::vector<LearningCurve> curves;
  BenchSummary summary;
  bool all_ok = true;  // no run failed
};

/// Runs every (robot, run) pair and writes config.ini, curves/*.csv,
/// summary.csv and the SVG plots into out_dir.
inline BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                     unsigned workers = worker_count()) {
  BenchmarkResult res;
  res.curves = run_all(cfg, workers);
  res.summary = summarize(res.curves, cfg.robots.size());
  for (const auto& c : res.curves) res.all_ok = res.all_ok && c.status != RunStatus::Failed;

  std::filesystem::create_directories(out_dir / "curves");
  write_text(out_dir / "config.ini", write_config(cfg));
  for (const auto& c : res.curves) write_text(out_dir / "curves" / curve_filename(c.robot, c.run), curve_csv(c));
  write_text(out_dir / "summary.csv", summary_csv(res.summary));
  emit_plots(res.curves, res.summary, out_dir);
  return res;
}

}  // namespace deltaz
