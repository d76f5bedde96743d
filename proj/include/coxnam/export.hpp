#pragma once

// Text artefacts for an Explanation: a sectioned CSV and an SVG sheet of
// small multiples (one panel per feature, with a data-density strip).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "coxnam/errors.hpp"
#include "coxnam/explain.hpp"

namespace coxnam {

// Fixed-precision formatting so reruns produce identical bytes.
inline std::string format_number(double v, int digits = 10) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Layout:
//   [summary]       key,value rows
//   [coefficients]  feature,beta,alpha,one_minus_alpha,omega,linear_weight
//   [curves]        feature,x,contribution
// Coefficients that do not exist for the variant are written as NA.
inline void write_explanation_csv(std::ostream& os, const Explanation& ex) {
  const double na = std::nan("");
  auto opt = [&](const std::optional<double>& v) { return v ? *v : na; };
  os << "[summary]\n";
  os << "key,value\n";
  os << "variant," << to_string(ex.variant) << "\n";
  os << "mode," << to_string(ex.mode) << "\n";
  os << "lambda," << format_number(ex.reg.lambda) << "\n";
  os << "mu," << format_number(ex.reg.mu) << "\n";
  os << "epsilon," << format_number(ex.epsilon) << "\n";
  os << "features," << ex.feature_names.size() << "\n";
  os << "points," << ex.reference.size() << "\n";
  os << "epochs," << ex.trace.epochs << "\n";
  os << "initial_loss," << format_number(ex.trace.initial) << "\n";
  os << "final_loss," << format_number(ex.final_loss) << "\n";
  os << "bias," << format_number(ex.model.bias()) << "\n";
  os << "c_index_blackbox," << format_number(opt(ex.c_blackbox)) << "\n";
  os << "c_index_surrogate," << format_number(opt(ex.c_surrogate)) << "\n";
  if (!ex.center.empty()) {
    os << "center";
    for (double c : ex.center) os << ";" << format_number(c);
    os << "\n";
  }

  os << "[coefficients]\n";
  os << "feature,beta,alpha,one_minus_alpha,omega,linear_weight\n";
  for (std::size_t k = 0; k < ex.feature_names.size(); ++k) {
    const auto& c = ex.coefficients.at(k);
    const bool lasso = ex.variant == Variant::lasso;
    const bool shortcut = ex.variant == Variant::shortcut;
    os << csv_field(ex.feature_names[k]) << ","
       << format_number(lasso ? c.beta : na) << ","
       << format_number(shortcut ? c.alpha : na) << ","
       << format_number(shortcut ? c.one_minus_alpha() : na) << ","
       << format_number(shortcut ? c.omega : na) << ","
       << format_number(shortcut ? c.linear_weight() : na) << "\n";
  }

  os << "[curves]\n";
  os << "feature,x,contribution\n";
  for (const auto& curve : ex.curves) {
    const std::string name = csv_field(ex.feature_names.at(curve.feature));
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
      os << name << "," << format_number(curve.x[i]) << ","
         << format_number(curve.contribution[i]) << "\n";
    }
  }
}

inline void save_explanation_csv(const Explanation& ex, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write explanation CSV '" + path + "'");
  write_explanation_csv(out, ex);
}

// Histogram of values over [lo, hi] scaled so the fullest bin is 1.
inline std::vector<double> density_strip(std::span<const double> values,
                                         double lo, double hi,
                                         std::size_t bins) {
  std::vector<double> h(bins, 0.0);
  if (values.empty() || bins == 0) return h;
  const double width = hi - lo;
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      const double f = (v - lo) / width;
      b = static_cast<std::size_t>(std::clamp(f, 0.0, 1.0) *
                                   static_cast<double>(bins));
      b = std::min(b, bins - 1);
    }
    h[b] += 1.0;
  }
  const double top = *std::max_element(h.begin(), h.end());
  if (top > 0.0) {
    for (double& v : h) v /= top;
  }
  return h;
}

struct SvgOptions {
  int panel_width = 260;
  int panel_height = 200;
  int columns = 3;
  std::size_t density_bins = 30;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline void write_shapes_svg(std::ostream& os, const Explanation& ex,
                             const SvgOptions& opt = {}) {
  using detail::fmt2;
  const std::size_t m = ex.curves.size();
  const int cols = static_cast<int>(std::max<std::size_t>(
      1, std::min<std::size_t>(m, static_cast<std::size_t>(opt.columns))));
  const int rows = static_cast<int>((m + cols - 1) / cols);
  const int pw = opt.panel_width, ph = opt.panel_height;
  const int header = 28;
  const int width = cols * pw;
  const int height = header + std::max(rows, 1) * ph;

  // Shared y range so panels compare directly.
  double ylo = 0.0, yhi = 0.0;
  for (const auto& c : ex.curves) {
    for (double v : c.contribution) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (yhi - ylo < 1e-9) {
    ylo -= 0.5;
    yhi += 0.5;
  }
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"8\" y=\"18\" font-size=\"13\">shape functions ("
     << to_string(ex.mode) << ", " << to_string(ex.variant)
     << ", lambda=" << format_number(ex.reg.lambda, 4)
     << ", mu=" << format_number(ex.reg.mu, 4) << ")</text>\n";

  const double ml = 42, mr = 10, mt = 22, mb = 40;
  const double strip_h = 8;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& c = ex.curves[k];
    const int ox = static_cast<int>(k % cols) * pw;
    const int oy = header + static_cast<int>(k / cols) * ph;
    const double x0 = ox + ml, x1 = ox + pw - mr;
    const double y0 = oy + mt, y1 = oy + ph - mb;
    double xlo = c.x.empty() ? 0.0 : c.x.front();
    double xhi = c.x.empty() ? 1.0 : c.x.back();
    if (xhi - xlo < 1e-12) {
      xlo -= 0.5;
      xhi += 0.5;
    }
    auto sx = [&](double v) { return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0); };
    auto sy = [&](double v) { return y1 - (v - ylo) / (yhi - ylo) * (y1 - y0); };

    os << "<g>\n";
    os << "<text x=\"" << fmt2(x0) << "\" y=\"" << fmt2(oy + 15.0)
       << "\" font-size=\"12\">" << detail::xml_escape(ex.feature_names.at(k))
       << "</text>\n";
    os << "<rect x=\"" << fmt2(x0) << "\" y=\"" << fmt2(y0) << "\" width=\""
       << fmt2(x1 - x0) << "\" height=\"" << fmt2(y1 - y0)
       << "\" fill=\"none\" stroke=\"#999\"/>\n";
    if (ylo < 0.0 && yhi > 0.0) {
      os << "<line x1=\"" << fmt2(x0) << "\" y1=\"" << fmt2(sy(0.0))
         << "\" x2=\"" << fmt2(x1) << "\" y2=\"" << fmt2(sy(0.0))
         << "\" stroke=\"#ccc\" stroke-dasharray=\"3,3\"/>\n";
    }
    os << "<text x=\"" << fmt2(x0 - 4) << "\" y=\"" << fmt2(y0 + 8)
       << "\" font-size=\"9\" text-anchor=\"end\">" << format_number(yhi, 3)
       << "</text>\n";
    os << "<text x=\"" << fmt2(x0 - 4) << "\" y=\"" << fmt2(y1)
       << "\" font-size=\"9\" text-anchor=\"end\">" << format_number(ylo, 3)
       << "</text>\n";
    os << "<text x=\"" << fmt2(x0) << "\" y=\"" << fmt2(y1 + 12)
       << "\" font-size=\"9\">" << format_number(xlo, 3) << "</text>\n";
    os << "<text x=\"" << fmt2(x1) << "\" y=\"" << fmt2(y1 + 12)
       << "\" font-size=\"9\" text-anchor=\"end\">" << format_number(xhi, 3)
       << "</text>\n";

    if (ex.feature_kinds.at(k) == FeatureKind::category) {
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        os << "<circle cx=\"" << fmt2(sx(c.x[i])) << "\" cy=\""
           << fmt2(sy(c.contribution[i]))
           << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
      }
    } else if (!c.x.empty()) {
      os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
            "points=\"";
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        if (i) os << " ";
        os << fmt2(sx(c.x[i])) << "," << fmt2(sy(c.contribution[i]));
      }
      os << "\"/>\n";
    }

    std::vector<double> column;
    column.reserve(ex.reference.size());
    for (const auto& p : ex.reference) column.push_back(p.at(k));
    const auto dens = density_strip(column, xlo, xhi, opt.density_bins);
    const double sy0 = y1 + 18;
    const double bw = (x1 - x0) / static_cast<double>(opt.density_bins);
    for (std::size_t b = 0; b < dens.size(); ++b) {
      if (dens[b] <= 0.0) continue;
      os << "<rect x=\"" << fmt2(x0 + b * bw) << "\" y=\"" << fmt2(sy0)
         << "\" width=\"" << fmt2(bw) << "\" height=\"" << fmt2(strip_h)
         << "\" fill=\"#d62728\" fill-opacity=\"" << fmt2(dens[b]) << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
}

inline void save_shapes_svg(const Explanation& ex, const std::string& path,
                            const SvgOptions& opt = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write SVG '" + path + "'");
  write_shapes_svg(out, ex, opt);
}

}  // namespace coxnam
