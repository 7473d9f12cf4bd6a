#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resglass/common.hpp"

namespace resglass {

// Minimal deterministic SVG plotter: axes, ticks, polylines, bars, legend.
// No timestamps or external references; identical inputs give identical bytes.
class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_line(std::string label, std::vector<double> xs, std::vector<double> ys) {
    add_series(std::move(label), std::move(xs), std::move(ys), false);
  }

  void add_bars(std::string label, std::vector<double> xs, std::vector<double> ys) {
    add_series(std::move(label), std::move(xs), std::move(ys), true);
  }

  std::string render() const {
    require(!series_.empty(), "Plot: nothing to draw");
    double xlo = kInf, xhi = -kInf, ylo = kInf, yhi = -kInf;
    for (const auto& s : series_) {
      for (double x : s.xs) {
        xlo = std::min(xlo, x);
        xhi = std::max(xhi, x);
      }
      for (double y : s.ys) {
        ylo = std::min(ylo, y);
        yhi = std::max(yhi, y);
      }
    }
    bool any_bars = false;
    for (const auto& s : series_) any_bars = any_bars || s.bars;
    if (any_bars) ylo = std::min(ylo, 0.0);
    pad_range(xlo, xhi);
    pad_range(ylo, yhi);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"white\"/>\n";

    auto px = [&](double x) {
      return kLeft + (x - xlo) / (xhi - xlo) * (kRight - kLeft);
    };
    auto py = [&](double y) {
      return kBottom - (y - ylo) / (yhi - ylo) * (kBottom - kTop);
    };

    for (double t : ticks(xlo, xhi)) {
      const double X = px(t);
      svg += line(X, kTop, X, kBottom, "#e0e0e0", 1.0);
      svg += text(X, kBottom + 18, tick_label(t), "middle", 12);
    }
    for (double t : ticks(ylo, yhi)) {
      const double Y = py(t);
      svg += line(kLeft, Y, kRight, Y, "#e0e0e0", 1.0);
      svg += text(kLeft - 8, Y + 4, tick_label(t), "end", 12);
    }

    for (std::size_t i = 0; i < series_.size(); ++i) {
      const auto& s = series_[i];
      const std::string color = kPalette[i % kPalette.size()];
      if (s.bars) {
        const double w = bar_width(s.xs) * (kRight - kLeft) / (xhi - xlo);
        for (std::size_t k = 0; k < s.xs.size(); ++k) {
          const double X = px(s.xs[k]);
          const double Y0 = py(0.0), Y1 = py(s.ys[k]);
          svg += rect(X - w / 2, std::min(Y0, Y1), w, std::abs(Y0 - Y1), color);
        }
      } else {
        std::string pts;
        for (std::size_t k = 0; k < s.xs.size(); ++k) {
          if (k) pts += ' ';
          pts += coord(px(s.xs[k])) + ',' + coord(py(s.ys[k]));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      }
    }

    svg += line(kLeft, kBottom, kRight, kBottom, "#000000", 1.5);
    svg += line(kLeft, kTop, kLeft, kBottom, "#000000", 1.5);
    svg += text((kLeft + kRight) / 2, 24, title_, "middle", 15);
    svg += text((kLeft + kRight) / 2, 474, xlabel_, "middle", 13);
    svg += "<text x=\"16\" y=\"" + coord((kTop + kBottom) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 16 " + coord((kTop + kBottom) / 2) + ")\">" +
           escape(ylabel_) + "</text>\n";

    if (series_.size() > 1) {
      double ly = kTop + 10;
      for (std::size_t i = 0; i < series_.size(); ++i) {
        const std::string color = kPalette[i % kPalette.size()];
        svg += line(kRight - 110, ly, kRight - 86, ly, color, 2.5);
        svg += text(kRight - 80, ly + 4, series_[i].label, "start", 11);
        ly += 16;
      }
    }
    svg += "</svg>\n";
    return svg;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw param_error("Plot: cannot open " + path.string());
    f << render();
  }

 private:
  struct Series {
    std::string label;
    std::vector<double> xs, ys;
    bool bars = false;
  };

  static constexpr double kLeft = 64, kRight = 704, kTop = 36, kBottom = 432;
  static inline const std::vector<std::string> kPalette = {
      "#1f6eb4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  void add_series(std::string label, std::vector<double> xs, std::vector<double> ys,
                  bool bars) {
    require(xs.size() == ys.size() && !xs.empty(), "Plot: series size mismatch");
    for (double v : xs) require(std::isfinite(v), "Plot: non-finite x value");
    for (double v : ys) require(std::isfinite(v), "Plot: non-finite y value");
    series_.push_back({std::move(label), std::move(xs), std::move(ys), bars});
  }

  static void pad_range(double& lo, double& hi) {
    if (lo == hi) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }

  // Round tick step to the {1, 2, 5} decade grid, targeting about six ticks.
  static std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    const double step = mag * (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0);
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
      out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    return out;
  }

  static double bar_width(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.8;
    double dmin = kInf;
    for (std::size_t i = 1; i < xs.size(); ++i)
      dmin = std::min(dmin, std::abs(xs[i] - xs[i - 1]));
    return 0.8 * dmin;
  }

  static std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }

  static std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&') out += "&amp;";
      else if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else out += c;
    }
    return out;
  }

  static std::string line(double x1, double y1, double x2, double y2,
                          const std::string& color, double width) {
    return "<line x1=\"" + coord(x1) + "\" y1=\"" + coord(y1) + "\" x2=\"" + coord(x2) +
           "\" y2=\"" + coord(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
           coord(width) + "\"/>\n";
  }

  static std::string rect(double x, double y, double w, double h,
                          const std::string& color) {
    return "<rect x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" width=\"" + coord(w) +
           "\" height=\"" + coord(h) + "\" fill=\"" + color + "\"/>\n";
  }

  std::string text(double x, double y, const std::string& s, const std::string& anchor,
                   int size) const {
    return "<text x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" text-anchor=\"" + anchor +
           "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) + "\">" +
           escape(s) + "</text>\n";
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

}  // namespace resglass
