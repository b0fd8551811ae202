#include "plot.hpp"

#include "cournot/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

namespace cournot::detail {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 130.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};
// Polylines are thinned to at most this many points.
constexpr std::size_t kMaxPoints = 2000;

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::vector<double>& times,
                     const std::vector<Series>& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    const double pad = std::max(1e-6, std::abs(lo) * 0.05);
    lo -= pad;
    hi += pad;
  }
  const double t0 = times.empty() ? 0.0 : times.front();
  const double t1 = times.empty() ? 1.0 : std::max(times.back(), t0 + 1e-12);
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * plot_w; };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double t = t0 + (t1 - t0) * k / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    out << "<text x=\"" << px(t) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 6 << "\" text-anchor=\"middle\">t [s]</text>\n";

  const std::size_t stride = std::max<std::size_t>(1, times.size() / kMaxPoints);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % kColors.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < times.size(); i += stride) {
      out << px(times[i]) << ',' << py(series[s].values[i]) << ' ';
    }
    if (!times.empty()) out << px(times.back()) << ',' << py(series[s].values.back());
    out << "\"/>\n";
    const double ly = kTop + 14.0 + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 30
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly << "\">" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace cournot::detail
