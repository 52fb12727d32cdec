#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcsec/runner/report.hpp"

namespace smcsec::runner {

enum class EmitFormat { csv, svg };

inline EmitFormat parse_emit_format(const std::string& s) {
  if (s == "csv") return EmitFormat::csv;
  if (s == "svg") return EmitFormat::svg;
  throw std::invalid_argument("unknown emit format '" + s + "' (expected csv or svg)");
}

inline constexpr const char* kCsvHeader = "x,lo,hi,confidence,n_samples";

/// File stem for a series: anything outside [A-Za-z0-9._-] becomes '_'.
inline std::string series_file_stem(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '.' ||
                    ch == '_' || ch == '-';
    if (!ok) ch = '_';
  }
  return out;
}

inline std::string csv_row(const ReportRow& row) {
  return format_number(row.x) + "," + format_number(row.lo) + "," + format_number(row.hi) + "," +
         format_number(row.confidence) + "," + std::to_string(row.n_samples);
}

inline std::string series_csv(const ReportSeries& s) {
  std::string out = std::string(kCsvHeader) + "\r\n";
  for (const auto& row : s.rows) out += csv_row(row) + "\r\n";
  return out;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Extent {
  double lo;
  double hi;
};

inline Extent pad(Extent e) {
  if (e.hi - e.lo < 1e-12) return {e.lo - 0.5, e.hi + 0.5};
  const double margin = 0.05 * (e.hi - e.lo);
  return {e.lo - margin, e.hi + margin};
}

}  // namespace detail

/// Interval plot: one shaded segment per row spanning [lo, hi]. Window
/// bins also get a pair of dashed lines at the window boundaries.
inline std::string series_svg(const ReportSeries& s) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  detail::Extent xs{0.0, 1.0};
  detail::Extent ys{0.0, 1.0};
  if (!s.rows.empty()) {
    xs = {s.rows.front().x, s.rows.front().x};
    ys = {s.rows.front().lo, s.rows.front().hi};
    for (const auto& r : s.rows) {
      double left = r.x;
      double right = r.x;
      if (r.window && r.window->mode == smc::WindowFilter::Mode::window) {
        left = r.x - r.window->half_width;
        right = r.x + r.window->half_width;
      }
      xs = {std::min(xs.lo, left), std::max(xs.hi, right)};
      ys = {std::min(ys.lo, r.lo), std::max(ys.hi, r.hi)};
    }
  }
  const bool unit = s.kind == "proportion" || s.kind == "tunnel" || s.kind == "confidence_curve";
  if (unit) ys = {0.0, 1.0};
  xs = detail::pad(xs);
  if (!unit) ys = detail::pad(ys);

  const auto px = [&](double x) { return kLeft + (x - xs.lo) / (xs.hi - xs.lo) * plot_w; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - ys.lo) / (ys.hi - ys.lo)) * plot_h; };

  // Segment width: the tightest spacing between neighbouring x values.
  double spacing = xs.hi - xs.lo;
  for (std::size_t i = 1; i < s.rows.size(); ++i) {
    const double d = std::abs(s.rows[i].x - s.rows[i - 1].x);
    if (d > 0) spacing = std::min(spacing, d);
  }
  const double seg_w = std::max(2.0, 0.6 * spacing / (xs.hi - xs.lo) * plot_w);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<title>" << detail::xml_escape(s.name) << "</title>\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
      << detail::xml_escape(s.name + " (" + s.y + ")") << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = ys.lo + (ys.hi - ys.lo) * k / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(y) + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << format_number(std::round(y * 1000) / 1000)
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << detail::xml_escape(s.x_metric)
      << "</text>\n";

  for (const auto& r : s.rows) {
    const double top = py(r.hi);
    const double height = std::max(1.0, py(r.lo) - top);
    out << "<rect class=\"bin\" x=\"" << px(r.x) - seg_w / 2 << "\" y=\"" << top << "\" width=\"" << seg_w
        << "\" height=\"" << height << "\" fill=\"steelblue\" fill-opacity=\"0.45\" stroke=\"steelblue\""
        << " data-x=\"" << format_number(r.x) << "\" data-lo=\"" << format_number(r.lo) << "\" data-hi=\""
        << format_number(r.hi) << "\" data-confidence=\"" << format_number(r.confidence) << "\" data-n=\""
        << r.n_samples << "\"><title>" << detail::xml_escape(r.label) << "</title></rect>\n";
    if (r.window && r.window->mode == smc::WindowFilter::Mode::window) {
      for (double edge : {r.x - r.window->half_width, r.x + r.window->half_width}) {
        out << "<line class=\"window\" x1=\"" << px(edge) << "\" y1=\"" << kTop << "\" x2=\"" << px(edge)
            << "\" y2=\"" << kTop + plot_h << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
      }
    }
    out << "<text x=\"" << px(r.x) << "\" y=\"" << kTop + plot_h + 14
        << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">" << format_number(r.x)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Writes one file per series into `dir`; returns the paths written.
inline std::vector<std::filesystem::path> emit(const AnalysisReport& report, EmitFormat format,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& s : report.series) {
    const auto path = dir / (series_file_stem(s.name) + (format == EmitFormat::csv ? ".csv" : ".svg"));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << (format == EmitFormat::csv ? series_csv(s) : series_svg(s));
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace smcsec::runner
