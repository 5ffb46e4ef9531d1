#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "epi/mobility.hpp"
#include "epi/panel.hpp"
#include "epi/penalized.hpp"

namespace epi {

// Which terms enter the infection model. Defaults give the full specification.
struct FrameOptions {
  bool gini = true;
  bool staying_put = true;
  bool coord_smooth = true;
  bool social_smooth = true;
  bool district_effect = true;       // a_i
  bool last_week_effect = true;      // b_i, only on rows of the final week
  bool autoregressive = true;
  int thinplate_rank = 30;
};

struct FrameRow {
  std::size_t district = 0;
  int group = 0;
  int week = 0;  // 1-based calendar week of the response
};

// Design inputs that do not depend on the panel.
struct FrameCovariates {
  const FeatureSeries* gini = nullptr;         // standardized, covers weeks 1..T-1
  const FeatureSeries* staying_put = nullptr;  // standardized, covers weeks 1..T-1
  Eigen::MatrixXd geography;                   // n x 2
  Eigen::MatrixXd social;                      // n x 2 embedding coordinates
};

// Regression frame for weeks 2..T conditional on week 1. The autoregressive column
// log(lagged rate + c) is filled on request so that c can be profiled.
class ModelFrame {
 public:
  ModelFrame(const SurveillancePanel& panel, const PopulationTable& population, const FrameCovariates& covariates,
             const FrameOptions& options = {});

  Eigen::Index rows() const { return y_.size(); }
  const Eigen::VectorXd& response() const { return y_; }
  const Eigen::VectorXd& lagged_rate() const { return lagged_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  const std::vector<FrameRow>& keys() const { return keys_; }
  const FrameOptions& options() const { return options_; }
  std::size_t districts() const { return districts_; }
  int weeks() const { return weeks_; }

  // Full design at offset constant c.
  PenalizedDesign design(double c) const;
  static std::string ar_name() { return "ar1"; }

 private:
  FrameOptions options_;
  std::size_t districts_ = 0;
  int weeks_ = 0;
  Eigen::VectorXd y_;
  Eigen::VectorXd lagged_;
  Eigen::VectorXd offset_;
  std::vector<FrameRow> keys_;
  PenalizedDesign base_;
  Eigen::Index ar_column_ = -1;
  std::vector<int> ar_positions_;  // index into the value array of each row's AR entry
};

// Coefficient names of the group effects.
inline constexpr const char* kMaleName = "male";
inline constexpr const char* kAgeName = "age36_59";
inline constexpr const char* kAgeMaleName = "age36_59:male";

}  // namespace epi
