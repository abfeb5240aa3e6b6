#include "renfdi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "renfdi/errors.hpp"

namespace renfdi::svg {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
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

}  // namespace

std::string line_chart(const std::string& title, const Eigen::VectorXd& t,
                       const std::vector<Series>& series, int width, int height) {
  const double left = 60, right = 20, top = 30, bottom = 40;
  const double pw = width - left - right, ph = height - top - bottom;
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series) {
    if (s.values.size() != t.size()) throw UsageError("series length does not match time axis");
    if (s.values.size()) {
      lo = std::min(lo, s.values.minCoeff());
      hi = std::max(hi, s.values.maxCoeff());
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double t0 = t.size() ? t(0) : 0.0;
  const double t1 = t.size() > 1 ? t(t.size() - 1) : t0 + 1.0;
  auto sx = [&](double x) { return left + (x - t0) / (t1 - t0) * pw; };
  auto sy = [&](double y) { return top + (hi - y) / (hi - lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (lo < 0.0 && hi > 0.0) {
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt(sy(0.0))
       << "\" y2=\"" << fmt(sy(0.0)) << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    const double x = t0 + (t1 - t0) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << fmt(sy(y) + 4)
       << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
    os << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << top + ph + 16
       << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 6
     << "\" text-anchor=\"middle\">time [s]</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << series[s].color << "\" stroke-width=\"1.5\" points=\"";
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      os << fmt(sx(t(k))) << ',' << fmt(sy(series[s].values(k))) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14 + 14.0 * static_cast<double>(s);
    os << "<line x1=\"" << left + 10 << "\" x2=\"" << left + 30 << "\" y1=\"" << ly - 4
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << series[s].color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + 36 << "\" y=\"" << ly << "\">" << escape(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> write_residual_plots(const std::filesystem::path& dir,
                                                        const dataset::Scenario& scenario,
                                                        const Eigen::MatrixXd& residuals,
                                                        double filter_rate) {
  if (residuals.rows() != scenario.faults.rows() || residuals.cols() > scenario.faults.cols()) {
    throw UsageError("residual matrix does not match scenario " + scenario.id);
  }
  const Eigen::VectorXd t =
      Eigen::VectorXd::LinSpaced(residuals.rows(), 0.0, residuals.rows() - 1) / filter_rate;
  std::vector<std::filesystem::path> out;
  for (Eigen::Index i = 0; i < residuals.cols(); ++i) {
    const std::string n = std::to_string(i + 1);
    const auto path = dir / (scenario.id + "_filter_" + n + ".svg");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << line_chart(scenario.id + ": residual of filter " + n, t,
                     {{"fault f" + n, "#999999", scenario.faults.col(i)},
                      {"residual r" + n, "#1f77b4", residuals.col(i)}});
    out.push_back(path);
  }
  return out;
}

}  // namespace renfdi::svg
