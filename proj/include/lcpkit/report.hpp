#pragma once

// Output writers: CSV with a seed/config-hash comment line, JSON check reports and
// small hand-drawn SVG line charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace lcpkit {

inline constexpr const char* kVersion = "0.1.0";

struct RunStamp {
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Shortest round-trip text for a double; fixed so repeated runs match byte
// for byte.
inline std::string fmt(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) {
      break;
    }
  }
  return buf;
}

inline std::string fmt(bool b) { return b ? "true" : "false"; }

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const RunStamp& prov, const std::vector<std::string>& header)
      : out_(path), width_(header.size()) {
    if (!out_) {
      throw std::runtime_error("cannot write " + path);
    }
    out_ << "# lcpkit " << kVersion << " seed=" << prov.seed << " config_hash=" << prov.config_hash
         << '\n';
    write(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
      throw std::logic_error("CsvWriter: row width does not match the header");
    }
    write(cells);
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i ? "," : "") << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t width_;
};

// {"check": name, "pass": bool, "values": {...}}
inline nlohmann::json check_entry(const std::string& name, bool pass, nlohmann::json values) {
  return {{"check", name}, {"pass", pass}, {"values", std::move(values)}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << j.dump(2) << '\n';
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Polyline chart with labelled axes; log_x uses a log10 horizontal scale.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<Series>& series, bool log_x = false) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 55;
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_x && !(s.x[i] > 0))) {
        continue;
      }
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x1 >= x0)) {
    x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  }
  y0 = std::min(y0, 0.0);
  if (x1 == x0) {
    x0 -= 0.5, x1 += 0.5;
  }
  if (y1 == y0) {
    y1 = y0 + 1.0;
  }
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = L + (W - L - R) * k / 4.0;
    const double sy = H - B - (H - T - B) * k / 4.0;
    out << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
        << fmt(std::round((log_x ? std::pow(10.0, fx) : fx) * 1e4) / 1e4) << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
        << fmt(std::round(fy * 1e4) / 1e4) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 6];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.y[i]) && (!log_x || s.x[i] > 0)) {
        out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      }
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << c << "\">"
        << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace lcpkit
