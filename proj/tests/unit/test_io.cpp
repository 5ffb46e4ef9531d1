#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "epi/error.hpp"
#include "epi/io.hpp"
#include "epi/svg.hpp"

using namespace epi;
namespace fs = std::filesystem;

namespace {

DistrictRegistry registry() {
  return DistrictRegistry({{"A", "S1", 0.0, 0.0}, {"B", "S1", 1.0, 0.0}, {"C", "S2", 0.5, 0.8}});
}

fs::path scratch(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "epi_unit_io";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << content;
  return p;
}

std::vector<std::pair<double, double>> circles(const std::string& svg, const std::string& cls) {
  const std::regex re("<circle class=\"" + cls + "\" cx=\"([-0-9.]+)\" cy=\"([-0-9.]+)\"");
  std::vector<std::pair<double, double>> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.emplace_back(std::stod((*it)[1]), std::stod((*it)[2]));
  return out;
}

FitResult small_fit() {
  FitResult f;
  f.names = {"week2", "gini:week2", "gini:week3", "ar1"};
  f.theta = Eigen::Vector4d(-9.0, 0.1, 0.2, 0.6);
  f.covariance = Eigen::Matrix4d::Identity() * 0.01;
  f.covariance(1, 2) = f.covariance(2, 1) = 0.002;
  f.se = f.covariance.diagonal().cwiseSqrt();
  f.smooth_labels = {"f_coord"};
  f.lambda = Eigen::VectorXd::Constant(1, 3.5);
  f.dispersion = 4.2;
  f.c = 0.37;
  f.c_se = 0.05;
  f.c_profiled = true;
  f.term_labels = {"week", "gini", "ar"};
  f.term_edf = {1.0, 2.0, 1.0};
  f.edf_total = 4.0;
  f.loglik = -123.25;
  f.reml = -130.5;
  f.converged = true;
  f.profile = {{0.2, -1.0}, {0.37, -0.5}};
  f.y = Eigen::Vector3d(0, 2, 5);
  f.mu = Eigen::Vector3d(0.5, 2.5, 4.0);
  return f;
}

}  // namespace

TEST_CASE("numbers are written in shortest round-trip form") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.0) == "-2");
  CHECK(format_number(1e-300) == "1e-300");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("mobility and embedding files round trip") {
  const auto reg = registry();
  std::vector<Eigen::MatrixXd> weeks(2, Eigen::MatrixXd::Zero(3, 3));
  weeks[0] << 0.5, 0.3, 0.2, 0.1, 0.5, 0.4, 1.0 / 3.0, 0.0, 0.5;
  weeks[1] = weeks[0].transpose();
  std::stringstream col;
  write_colocation(col, reg, weeks);
  const auto back = read_colocation(col, reg);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == weeks[0]);
  CHECK(back[1] == weeks[1]);

  Eigen::MatrixXd sci(3, 3);
  sci << 1, 2, 3, 2, 1, 4, 3, 4, 1;
  std::stringstream sio;
  write_connectedness(sio, reg, sci);
  const Eigen::MatrixXd sci_back = read_connectedness(sio, reg);
  CHECK(sci_back(0, 2) == 3.0);
  CHECK(sci_back(2, 0) == 3.0);
  std::istringstream once("src_district,dst_district,sci\nA,B,7\n");
  CHECK(read_connectedness(once, reg)(1, 0) == 7.0);

  FeatureSeries f{FeatureKind::gini, true, Eigen::MatrixXd(3, 2)};
  f.values << 0.1, -0.2, 1.0 / 7.0, 0.0, -1e-9, 3.5;
  std::stringstream fio;
  write_feature_series(fio, reg, f);
  CHECK(read_feature_series(fio, reg, FeatureKind::gini).values == f.values);

  Eigen::MatrixXd xy(3, 2);
  xy << 1, 2, 3, 4, 5, 6.25;
  std::stringstream cio;
  write_coordinates(cio, reg, xy);
  CHECK(read_coordinates(cio, reg) == xy);

  std::vector<DailyValue> daily{{0, parse_date("2020-03-03"), 0.25}, {2, parse_date("2020-03-04"), 0.75}};
  std::stringstream dio;
  write_staying_put(dio, reg, daily);
  const auto dback = read_staying_put(dio, reg);
  REQUIRE(dback.size() == 2);
  CHECK(dback[1].district == 2);
  CHECK(dback[1].value == 0.75);

  std::istringstream unknown("district_id,dim1,dim2\nZ,0,0\n");
  CHECK_THROWS_AS(read_coordinates(unknown, reg), Error);
}

TEST_CASE("fit artifacts round trip through JSON") {
  const FitResult f = small_fit();
  const auto j = to_json(f);
  CHECK(j["kind"] == "fit");
  CHECK(j["caic"].get<double>() == doctest::Approx(caic(f)));
  const FitResult g = fit_from_json(nlohmann::json::parse(j.dump()));
  CHECK(g.names == f.names);
  CHECK(g.theta == f.theta);
  CHECK(g.covariance == f.covariance);
  CHECK(g.c == f.c);
  CHECK(g.c_se == f.c_se);
  CHECK(g.dispersion == f.dispersion);
  CHECK(g.mu == f.mu);
  CHECK(g.lambda == f.lambda);
  CHECK(g.profile.size() == 2);

  FitResult inf = f;
  inf.c_se = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(fit_from_json(nlohmann::json::parse(to_json(inf, false).dump())).c_se));
}

TEST_CASE("diagnostic tables round trip") {
  Rootogram r{Eigen::Vector3d(5, 3, 1), Eigen::Vector3d(4.5, 3.25, 1.5)};
  std::stringstream rio;
  write_rootogram(rio, r);
  const Rootogram rb = read_rootogram(rio);
  CHECK(rb.observed == r.observed);
  CHECK(rb.expected == r.expected);

  const std::vector<QQPoint> qq{{-1.0, -1.5, false}, {0.0, 0.1, false}, {1.0, 2.5, true}};
  std::stringstream qio;
  write_qq(qio, qq);
  const auto qb = read_qq(qio);
  REQUIRE(qb.size() == 3);
  CHECK(qb[2].outlier);
  CHECK(qb[0].sample == -1.5);

  std::stringstream vio;
  write_district_values(vio, registry(), Eigen::Vector3d(0.1, -0.2, 0.3));
  const DistrictValues v = read_district_values(vio);
  CHECK(v.ids == std::vector<std::string>{"A", "B", "C"});
  CHECK(v.coordinates(2, 1) == 0.8);
  CHECK(v.values(1) == -0.2);
}

TEST_CASE("SVG documents are self-contained and structured") {
  const Rootogram r{Eigen::Vector3d(5, 3, 1), Eigen::Vector3d(4.5, 3.25, 1.5)};
  const std::string root = svg_rootogram(r);
  CHECK(root.rfind("<svg", 0) == 0);
  CHECK(root.find("</svg>") != std::string::npos);
  CHECK(root.find("<script") == std::string::npos);
  CHECK(root.find("href") == std::string::npos);
  std::size_t bars = 0;
  for (std::size_t p = root.find("class=\"bar\""); p != std::string::npos; p = root.find("class=\"bar\"", p + 1)) ++bars;
  CHECK(bars == 3);
  CHECK(root.find("class=\"expected\"") != std::string::npos);

  const std::string qq = svg_residual_qq({{-1.0, -1.5, false}, {1.0, 2.5, true}});
  CHECK(qq.find("</svg>") != std::string::npos);
  CHECK_THROWS_WITH_AS(svg_residual_qq({}), "empty residual set", Error);

  const std::string path = svg_coefficient_path({{"gini:week2", 2, 0.1, -0.1, 0.3}, {"gini:week3", 3, 0.2, 0.0, 0.4}}, "Gini");
  CHECK(circles(path, "estimate").size() == 2);

  // An equilateral triangle stays equilateral.
  Eigen::MatrixXd tri(3, 2);
  tri << 0.0, 0.0, 10.0, 0.0, 5.0, 5.0 * std::sqrt(3.0);
  const auto pts = circles(svg_embedding_scatter(tri, {"A", "B", "C"}), "point");
  REQUIRE(pts.size() == 3);
  const auto dist = [&](int a, int b) { return std::hypot(pts[a].first - pts[b].first, pts[a].second - pts[b].second); };
  CHECK(dist(0, 1) == doctest::Approx(dist(1, 2)).epsilon(1e-3));
  CHECK(dist(0, 1) == doctest::Approx(dist(0, 2)).epsilon(1e-3));
  for (const auto& [x, y] : pts) {
    CHECK(x >= 0.0);
    CHECK(x <= 640.0);
    CHECK(y >= 0.0);
    CHECK(y <= 480.0);
  }
}

TEST_CASE("plots are rendered from artifacts of the matching kind") {
  const fs::path fit = scratch("fit.json", to_json(small_fit()).dump());
  const auto bands = coefficient_bands(fit, "gini:");
  REQUIRE(bands.size() == 2);
  CHECK(bands[1].position == 3.0);
  CHECK(bands[1].lower == doctest::Approx(0.2 - 1.959964 * 0.1).epsilon(1e-5));
  CHECK(render_svg(fit, PlotKind::coefficient_path).find("</svg>") != std::string::npos);
  CHECK_THROWS_AS(render_svg(fit, PlotKind::coefficient_path, "staying_put:"), Error);

  std::ostringstream qq;
  write_qq(qq, {{-1.0, -1.5, false}, {1.0, 2.5, true}});
  const fs::path qq_file = scratch("qq.csv", qq.str());
  CHECK(render_svg(qq_file, PlotKind::residual_qq).find("</svg>") != std::string::npos);
  CHECK_THROWS_WITH_AS(render_svg(qq_file, PlotKind::rootogram), doctest::Contains("not a rootogram artifact"), Error);
  CHECK_THROWS_AS(render_svg(qq_file, PlotKind::embedding_scatter), Error);
  CHECK_THROWS_AS(render_svg(scratch("empty_qq.csv", "theoretical,sample,outlier\n"), PlotKind::residual_qq), Error);
  CHECK(parse_plot_kind("map-effect") == PlotKind::map_effect);
  CHECK(to_string(PlotKind::residual_qq) == "residual-qq");
  CHECK_THROWS_AS(parse_plot_kind("pie"), Error);
}
