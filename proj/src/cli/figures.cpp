#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "advspec/cli.hpp"

namespace advspec::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 40.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad(double frac) {
    if (!(hi >= lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double m = (hi - lo) * frac;
    lo -= m;
    hi += m;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::string path_of(const std::vector<double>& ys, const Range& xr, const Range& yr) {
  std::ostringstream p;
  p << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    p << (i == 0 ? "M" : " L") << xr.map(static_cast<double>(i), kMargin, kWidth - kMargin) << ','
      << yr.map(ys[i], kHeight - kMargin, kMargin);
  }
  return p.str();
}

std::string header(double w, double h, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
    << "<title>" << escape(title) << "</title>\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  return s.str();
}

}  // namespace

std::string spectra_svg(const std::vector<CurveGroup>& groups, const std::string& title) {
  Range xr, yr;
  for (const auto& g : groups) {
    xr.add(0.0);
    xr.add(static_cast<double>(g.mean.size() > 0 ? g.mean.size() - 1 : 0));
    for (std::size_t i = 0; i < g.mean.size(); ++i) {
      yr.add(g.mean[i] - g.std[i]);
      yr.add(g.mean[i] + g.std[i]);
    }
  }
  xr.pad(0.0);
  yr.pad(0.05);

  std::ostringstream s;
  s << header(kWidth, kHeight, title);
  s << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
    << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8
    << "\" text-anchor=\"middle\" font-size=\"11\">band</text>\n";
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    std::vector<double> lo(g.mean.size()), hi(g.mean.size());
    for (std::size_t i = 0; i < g.mean.size(); ++i) {
      lo[i] = g.mean[i] - g.std[i];
      hi[i] = g.mean[i] + g.std[i];
    }
    s << "<g class=\"curve\" data-label=\"" << escape(g.label) << "\" stroke=\"" << g.color
      << "\" fill=\"none\">\n"
      << "  <path class=\"mean\" d=\"" << path_of(g.mean, xr, yr) << "\" stroke-width=\"2\"/>\n"
      << "  <path class=\"std\" d=\"" << path_of(lo, xr, yr)
      << "\" stroke-dasharray=\"3,3\"/>\n"
      << "  <path class=\"std\" d=\"" << path_of(hi, xr, yr)
      << "\" stroke-dasharray=\"3,3\"/>\n"
      << "</g>\n";
    s << "<text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << kMargin + 14 * (k + 1)
      << "\" font-size=\"11\" fill=\"" << g.color << "\">" << escape(g.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string weights_svg(const Matrix& points, const SampleWeights& weights,
                        const std::optional<Line>& decision, const std::string& title) {
  if (points.cols != 2 || points.rows != weights.size()) {
    throw std::invalid_argument("weights_svg needs one 2-D point per weight");
  }
  const double side = kHeight;
  Range xr, yr;
  for (std::size_t i = 0; i < points.rows; ++i) {
    xr.add(points(i, 0));
    yr.add(points(i, 1));
  }
  xr.pad(0.05);
  yr.pad(0.05);
  const double wmax = weights.max();

  std::ostringstream s;
  s << header(side, side, title) << std::fixed << std::setprecision(3);
  if (decision) {
    // clip the line to the plotted box
    const Line l = *decision;
    std::vector<std::pair<double, double>> ends;
    if (std::abs(l.b) > 1e-12) {
      for (double x : {xr.lo, xr.hi}) {
        const double y = -(l.a * x + l.c) / l.b;
        if (y >= yr.lo && y <= yr.hi) ends.emplace_back(x, y);
      }
    }
    if (std::abs(l.a) > 1e-12) {
      for (double y : {yr.lo, yr.hi}) {
        const double x = -(l.b * y + l.c) / l.a;
        if (x >= xr.lo && x <= xr.hi) ends.emplace_back(x, y);
      }
    }
    if (ends.size() >= 2) {
      s << "<line class=\"decision\" x1=\"" << xr.map(ends[0].first, kMargin, side - kMargin)
        << "\" y1=\"" << yr.map(ends[0].second, side - kMargin, kMargin) << "\" x2=\""
        << xr.map(ends[1].first, kMargin, side - kMargin) << "\" y2=\""
        << yr.map(ends[1].second, side - kMargin, kMargin)
        << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
  }
  s << "<g class=\"points\" fill=\"steelblue\">\n";
  for (std::size_t i = 0; i < points.rows; ++i) {
    const double rel = wmax > 0.0 ? weights.p[i] / wmax : 0.0;
    s << "  <circle cx=\"" << xr.map(points(i, 0), kMargin, side - kMargin) << "\" cy=\""
      << yr.map(points(i, 1), side - kMargin, kMargin) << "\" r=\"" << kWeightRadius * rel
      << "\" fill-opacity=\"" << rel << "\"/>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

std::optional<Line> linear_decision_line(const Model& classifier) {
  const auto& layers = classifier.config().layers;
  if (classifier.input_shape() != Shape{2} || layers.size() != 2 ||
      layers[0].kind != LayerKind::dense || layers[0].units != 2 ||
      layers[1].kind != LayerKind::activation || layers[1].activation != Activation::softmax) {
    return std::nullopt;
  }
  auto w = classifier.parameters()[0].data();  // [2 in, 2 out]
  auto b = classifier.parameters()[1].data();
  // class 1 wins where (w[:,1] - w[:,0]) . x + (b1 - b0) >= 0
  Line l{w[1] - w[0], w[3] - w[2], b[1] - b[0]};
  const double n = std::hypot(l.a, l.b);
  if (n == 0.0) return std::nullopt;
  return Line{l.a / n, l.b / n, l.c / n};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw missing_artifact("missing " + path.string());
  return Json::parse(in);
}

}  // namespace advspec::cli
