#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epi/diagnostics.hpp"

namespace epi {

enum class PlotKind { coefficient_path, residual_qq, rootogram, map_effect, embedding_scatter };

PlotKind parse_plot_kind(std::string_view text);
std::string to_string(PlotKind kind);

struct CoefficientBand {
  std::string name;
  double position = 0.0;  // horizontal coordinate, e.g. the week number
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Self-contained SVG documents (no fonts, scripts or external references).
std::string svg_coefficient_path(const std::vector<CoefficientBand>& bands, const std::string& title);
std::string svg_residual_qq(const std::vector<QQPoint>& qq);
std::string svg_rootogram(const Rootogram& rootogram);
// coords: n x 2 (lon, lat); fill colour diverges around zero.
std::string svg_map_effect(const Eigen::MatrixXd& coords, const Eigen::VectorXd& values,
                           const std::vector<std::string>& labels);
// One scale for both axes so that distances are preserved.
std::string svg_embedding_scatter(const Eigen::MatrixXd& points, const std::vector<std::string>& labels);

// Coefficients whose name starts with `prefix`, with 95% bands, from a fit or pooled JSON artifact.
// The position is the trailing integer of the name, or the rank when there is none.
std::vector<CoefficientBand> coefficient_bands(const std::filesystem::path& artifact, const std::string& prefix);

// Reads the artifact, checks that it matches the plot kind and renders it. Throws epi::Error on a
// mismatched or empty artifact.
std::string render_svg(const std::filesystem::path& artifact, PlotKind kind, const std::string& prefix = "gini:");

}  // namespace epi
