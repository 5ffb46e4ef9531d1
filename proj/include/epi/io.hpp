#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "epi/delay.hpp"
#include "epi/diagnostics.hpp"
#include "epi/embedding.hpp"
#include "epi/mobility.hpp"
#include "epi/model_fit.hpp"
#include "epi/panel.hpp"
#include "epi/pooling.hpp"

namespace epi {

// week,src_district,dst_district,probability with 1-based weeks; absent pairs are zero.
std::vector<Eigen::MatrixXd> read_colocation(std::istream& in, const DistrictRegistry& registry);
void write_colocation(std::ostream& out, const DistrictRegistry& registry, const std::vector<Eigen::MatrixXd>& weeks);

// date,district_id,fraction
std::vector<DailyValue> read_staying_put(std::istream& in, const DistrictRegistry& registry);
void write_staying_put(std::ostream& out, const DistrictRegistry& registry, const std::vector<DailyValue>& daily);

// src_district,dst_district,sci. Pairs given once are mirrored; the diagonal is ignored.
Eigen::MatrixXd read_connectedness(std::istream& in, const DistrictRegistry& registry);
void write_connectedness(std::ostream& out, const DistrictRegistry& registry, const Eigen::MatrixXd& sci);

// district_id,week,value
FeatureSeries read_feature_series(std::istream& in, const DistrictRegistry& registry, FeatureKind kind);
void write_feature_series(std::ostream& out, const DistrictRegistry& registry, const FeatureSeries& series);

// district_id,dim1,dim2
Eigen::MatrixXd read_coordinates(std::istream& in, const DistrictRegistry& registry);
void write_coordinates(std::ostream& out, const DistrictRegistry& registry, const Eigen::MatrixXd& coords);

nlohmann::json to_json(const FitResult& fit, bool include_fitted = true);
FitResult fit_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PooledEstimate& pooled);
nlohmann::json to_json(const DelayModel& model);

// count,observed,expected,sqrt_observed,sqrt_expected
void write_rootogram(std::ostream& out, const Rootogram& r);
Rootogram read_rootogram(std::istream& in);
// theoretical,sample,outlier
void write_qq(std::ostream& out, const std::vector<QQPoint>& qq);
std::vector<QQPoint> read_qq(std::istream& in);

// district_id,lon,lat,value: one value per district, e.g. estimated district effects.
struct DistrictValues {
  std::vector<std::string> ids;
  Eigen::MatrixXd coordinates;  // n x 2
  Eigen::VectorXd values;
};
void write_district_values(std::ostream& out, const DistrictRegistry& registry, const Eigen::VectorXd& values);
DistrictValues read_district_values(std::istream& in);

// Shortest round-trip number formatting shared by all CSV writers, locale free.
std::string format_number(double v);

}  // namespace epi
