#include "epi/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "epi/csv.hpp"
#include "epi/error.hpp"
#include "epi/io.hpp"

namespace epi {

PlotKind parse_plot_kind(std::string_view text) {
  if (text == "coefficient-path") return PlotKind::coefficient_path;
  if (text == "residual-qq") return PlotKind::residual_qq;
  if (text == "rootogram") return PlotKind::rootogram;
  if (text == "map-effect") return PlotKind::map_effect;
  if (text == "embedding-scatter") return PlotKind::embedding_scatter;
  throw Error("unknown plot kind '" + std::string(text) + "'");
}

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::coefficient_path: return "coefficient-path";
    case PlotKind::residual_qq: return "residual-qq";
    case PlotKind::rootogram: return "rootogram";
    case PlotKind::map_effect: return "map-effect";
    case PlotKind::embedding_scatter: return "embedding-scatter";
  }
  return "unknown";
}

namespace {

constexpr double kWidth = 640.0, kHeight = 480.0, kMargin = 48.0;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  std::string s(buf, res.ptr);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
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

struct Range {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  static Range of(double v) { return {v, v}; }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

// Linear map from data ranges to the plotting area, y pointing up.
struct Frame {
  Range x, y;
  double sx(double v) const { return kMargin + (v - x.lo) / (x.hi - x.lo) * (kWidth - 2 * kMargin); }
  double sy(double v) const { return kHeight - kMargin - (v - y.lo) / (y.hi - y.lo) * (kHeight - 2 * kMargin); }
};

void open(std::ostringstream& s, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
    << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\">\n";
  s << "<title>" << escape(title) << "</title>\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight) << "\" fill=\"white\"/>\n";
}

void axes(std::ostringstream& s, const Frame& f) {
  s << "<g stroke=\"black\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kHeight - kMargin) << "\" x2=\"" << fmt(kWidth - kMargin)
    << "\" y2=\"" << fmt(kHeight - kMargin) << "\"/>\n";
  s << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kMargin) << "\" x2=\"" << fmt(kMargin) << "\" y2=\""
    << fmt(kHeight - kMargin) << "\"/>\n";
  s << "</g>\n";
  // Axis extremes as plain text labels.
  s << "<g font-size=\"10\" fill=\"black\">\n";
  s << "<text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 14) << "\">" << fmt(f.x.lo) << "</text>\n";
  s << "<text x=\"" << fmt(kWidth - kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 14)
    << "\" text-anchor=\"end\">" << fmt(f.x.hi) << "</text>\n";
  s << "<text x=\"" << fmt(kMargin - 4) << "\" y=\"" << fmt(kHeight - kMargin) << "\" text-anchor=\"end\">"
    << fmt(f.y.lo) << "</text>\n";
  s << "<text x=\"" << fmt(kMargin - 4) << "\" y=\"" << fmt(kMargin + 4) << "\" text-anchor=\"end\">" << fmt(f.y.hi)
    << "</text>\n";
  s << "</g>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& attrs) {
  std::ostringstream s;
  s << "<polyline fill=\"none\" " << attrs << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s << (i ? " " : "") << fmt(pts[i].first) << ',' << fmt(pts[i].second);
  s << "\"/>\n";
  return s.str();
}

}  // namespace

std::string svg_coefficient_path(const std::vector<CoefficientBand>& bands, const std::string& title) {
  if (bands.empty()) throw Error("no coefficients to plot");
  Frame f{Range::of(bands.front().position), Range::of(0.0)};
  for (const auto& b : bands) {
    f.x.include(b.position);
    f.y.include(b.lower);
    f.y.include(b.upper);
  }
  f.x.pad();
  f.y.pad();
  std::ostringstream s;
  open(s, title);
  axes(s, f);
  // 95% band as a closed polygon, estimates on top.
  s << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < bands.size(); ++i)
    s << (i ? " " : "") << fmt(f.sx(bands[i].position)) << ',' << fmt(f.sy(bands[i].upper));
  for (std::size_t i = bands.size(); i-- > 0;) s << ' ' << fmt(f.sx(bands[i].position)) << ',' << fmt(f.sy(bands[i].lower));
  s << "\"/>\n";
  s << "<line x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(f.sy(0.0)) << "\" x2=\"" << fmt(kWidth - kMargin) << "\" y2=\""
    << fmt(f.sy(0.0)) << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
  std::vector<std::pair<double, double>> pts;
  for (const auto& b : bands) pts.emplace_back(f.sx(b.position), f.sy(b.estimate));
  s << polyline(pts, "stroke=\"#08519c\" stroke-width=\"2\"");
  for (const auto& b : bands)
    s << "<circle class=\"estimate\" cx=\"" << fmt(f.sx(b.position)) << "\" cy=\"" << fmt(f.sy(b.estimate))
      << "\" r=\"3\" fill=\"#08519c\"><title>" << escape(b.name) << "</title></circle>\n";
  s << "</svg>\n";
  return s.str();
}

std::string svg_residual_qq(const std::vector<QQPoint>& qq) {
  if (qq.empty()) throw Error("empty residual set");
  Frame f{Range::of(qq.front().theoretical), Range::of(qq.front().sample)};
  for (const auto& p : qq) {
    f.x.include(p.theoretical);
    f.y.include(p.sample);
  }
  f.x.pad();
  f.y.pad();
  std::ostringstream s;
  open(s, "Randomized quantile residuals");
  axes(s, f);
  const double lo = std::max(f.x.lo, f.y.lo), hi = std::min(f.x.hi, f.y.hi);
  if (lo < hi)
    s << "<line x1=\"" << fmt(f.sx(lo)) << "\" y1=\"" << fmt(f.sy(lo)) << "\" x2=\"" << fmt(f.sx(hi)) << "\" y2=\""
      << fmt(f.sy(hi)) << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& p : qq)
    s << "<circle cx=\"" << fmt(f.sx(p.theoretical)) << "\" cy=\"" << fmt(f.sy(p.sample)) << "\" r=\"2\" fill=\""
      << (p.outlier ? "red" : "black") << "\"/>\n";
  s << "</svg>\n";
  return s.str();
}

std::string svg_rootogram(const Rootogram& r) {
  if (r.observed.size() == 0) throw Error("empty rootogram");
  const Eigen::VectorXd so = r.sqrt_observed(), se = r.sqrt_expected();
  Frame f{Range{-0.5, static_cast<double>(r.observed.size()) - 0.5}, Range{0.0, std::max(so.maxCoeff(), se.maxCoeff())}};
  f.y.pad();
  f.y.lo = 0.0;
  std::ostringstream s;
  open(s, "Rootogram");
  axes(s, f);
  const double bar = 0.8 * (f.sx(1.0) - f.sx(0.0));
  for (Eigen::Index v = 0; v < so.size(); ++v) {
    const double top = f.sy(so(v));
    s << "<rect class=\"bar\" x=\"" << fmt(f.sx(static_cast<double>(v)) - bar / 2) << "\" y=\"" << fmt(top)
      << "\" width=\"" << fmt(bar) << "\" height=\"" << fmt(f.sy(0.0) - top) << "\" fill=\"grey\"/>\n";
  }
  std::vector<std::pair<double, double>> pts;
  for (Eigen::Index v = 0; v < se.size(); ++v) pts.emplace_back(f.sx(static_cast<double>(v)), f.sy(se(v)));
  s << polyline(pts, "class=\"expected\" stroke=\"red\" stroke-width=\"2\"");
  s << "</svg>\n";
  return s.str();
}

std::string svg_map_effect(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                           const std::vector<std::string>& labels) {
  if (coords.rows() == 0) throw Error("no districts to plot");
  if (coords.cols() != 2 || values.size() != coords.rows()) throw Error("map coordinates and values disagree");
  Frame f{Range::of(coords(0, 0)), Range::of(coords(0, 1))};
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    f.x.include(coords(i, 0));
    f.y.include(coords(i, 1));
  }
  f.x.pad();
  f.y.pad();
  const double scale = std::max(1e-300, values.cwiseAbs().maxCoeff());
  std::ostringstream s;
  open(s, "District effects");
  axes(s, f);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    // blue for negative, red for positive, white at zero
    const double t = std::clamp(values(i) / scale, -1.0, 1.0);
    const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
    const int r = t >= 0 ? 255 : fade, b = t >= 0 ? fade : 255;
    s << "<circle cx=\"" << fmt(f.sx(coords(i, 0))) << "\" cy=\"" << fmt(f.sy(coords(i, 1)))
      << "\" r=\"7\" stroke=\"black\" stroke-width=\"0.5\" fill=\"rgb(" << r << ',' << fade << ',' << b << ")\"><title>"
      << escape(i < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<std::size_t>(i)] : "") << ' '
      << fmt(values(i)) << "</title></circle>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_embedding_scatter(const Eigen::MatrixXd& points, const std::vector<std::string>& labels) {
  if (points.rows() == 0) throw Error("no points to plot");
  if (points.cols() != 2) throw Error("embedding scatter needs two dimensions");
  const Eigen::Vector2d lo = points.colwise().minCoeff(), hi = points.colwise().maxCoeff();
  const Eigen::Vector2d centre = 0.5 * (lo + hi);
  const double extent = std::max({hi(0) - lo(0), hi(1) - lo(1), 1e-12});
  const double scale = (std::min(kWidth, kHeight) - 2 * kMargin) / extent;
  std::ostringstream s;
  open(s, "Social embedding");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double x = kWidth / 2 + scale * (points(i, 0) - centre(0));
    const double y = kHeight / 2 - scale * (points(i, 1) - centre(1));
    s << "<circle class=\"point\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\"#08519c\"/>\n";
    if (i < static_cast<Eigen::Index>(labels.size()))
      s << "<text x=\"" << fmt(x + 4) << "\" y=\"" << fmt(y - 4) << "\" font-size=\"8\">"
        << escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

namespace {

std::string first_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void expect_header(const std::filesystem::path& path, const std::string& header, PlotKind kind) {
  if (first_line(path).rfind(header, 0) != 0)
    throw Error(path.string() + " is not a " + to_string(kind) + " artifact (expected header " + header + ")");
}

}  // namespace

std::vector<CoefficientBand> coefficient_bands(const std::filesystem::path& artifact, const std::string& prefix) {
  std::ifstream in(artifact);
  if (!in) throw Error("cannot open " + artifact.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    throw Error(artifact.string() + " is not a coefficient-path artifact (not JSON)");
  }
  const std::string kind = j.is_object() ? j.value("kind", "") : "";
  if (kind != "fit" && kind != "pooled")
    throw Error(artifact.string() + " is not a coefficient-path artifact (kind '" + kind + "')");
  std::vector<CoefficientBand> out;
  for (const auto& c : j.at("coefficients")) {
    const std::string name = c.at("name").get<std::string>();
    if (name.rfind(prefix, 0) != 0) continue;
    const double est = c.at("estimate").get<double>();
    const double se = c.at("se").is_null() ? std::numeric_limits<double>::infinity() : c.at("se").get<double>();
    if (!std::isfinite(se)) continue;
    CoefficientBand b{name, static_cast<double>(out.size() + 1), est, est - 1.959963984540054 * se,
                      est + 1.959963984540054 * se};
    std::size_t digits = name.size();
    while (digits > 0 && std::isdigit(static_cast<unsigned char>(name[digits - 1]))) --digits;
    if (digits < name.size()) b.position = parse_double(name.substr(digits));
    out.push_back(b);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
  return out;
}

std::string render_svg(const std::filesystem::path& artifact, PlotKind kind, const std::string& prefix) {
  switch (kind) {
    case PlotKind::coefficient_path: {
      const auto bands = coefficient_bands(artifact, prefix);
      if (bands.empty()) throw Error("no coefficients starting with '" + prefix + "' in " + artifact.string());
      return svg_coefficient_path(bands, prefix);
    }
    case PlotKind::residual_qq: {
      expect_header(artifact, "theoretical,sample,outlier", kind);
      std::ifstream in(artifact);
      return svg_residual_qq(read_qq(in));
    }
    case PlotKind::rootogram: {
      expect_header(artifact, "count,observed,expected", kind);
      std::ifstream in(artifact);
      return svg_rootogram(read_rootogram(in));
    }
    case PlotKind::map_effect: {
      expect_header(artifact, "district_id,lon,lat,value", kind);
      std::ifstream in(artifact);
      const auto table = read_district_values(in);
      return svg_map_effect(table.coordinates, table.values, table.ids);
    }
    case PlotKind::embedding_scatter: {
      expect_header(artifact, "district_id,dim1,dim2", kind);
      std::ifstream in(artifact);
      CsvReader reader(in);
      const auto ci = reader.column("district_id"), c1 = reader.column("dim1"), c2 = reader.column("dim2");
      std::vector<std::string> ids, f;
      std::vector<double> xs, ys;
      while (reader.next(f)) {
        ids.push_back(f[ci]);
        xs.push_back(parse_double(f[c1]));
        ys.push_back(parse_double(f[c2]));
      }
      Eigen::MatrixXd pts(static_cast<Eigen::Index>(ids.size()), 2);
      for (std::size_t i = 0; i < ids.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) << xs[i], ys[i];
      return svg_embedding_scatter(pts, ids);
    }
  }
  throw Error("unknown plot kind");
}

}  // namespace epi
