#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "epi/dates.hpp"

namespace epi {

enum class AgeBand { age15_35 = 0, age36_59 = 1 };
enum class Gender { female = 0, male = 1 };

// Age/gender stratum. The reference level is (15-35, female).
struct GroupKey {
  AgeBand age = AgeBand::age15_35;
  Gender gender = Gender::female;

  static constexpr int count = 4;

  int index() const { return static_cast<int>(age) * 2 + static_cast<int>(gender); }
  static GroupKey from_index(int index) {
    return {static_cast<AgeBand>(index / 2), static_cast<Gender>(index % 2)};
  }
  bool operator==(const GroupKey&) const = default;
};

AgeBand parse_age_band(std::string_view text);
Gender parse_gender(std::string_view text);
std::string to_string(AgeBand age);
std::string to_string(Gender gender);

struct District {
  std::string id;
  std::string state_id;
  double lon = 0.0;
  double lat = 0.0;
};

class DistrictRegistry {
 public:
  DistrictRegistry() = default;
  explicit DistrictRegistry(std::vector<District> districts);

  std::size_t size() const { return districts_.size(); }
  const District& operator[](std::size_t i) const { return districts_[i]; }
  const std::vector<District>& districts() const { return districts_; }

  std::optional<std::size_t> find(const std::string& id) const;
  // Throws epi::Error naming the id when unknown.
  std::size_t index_of(const std::string& id) const;

  // Sorted distinct state ids and the state index of each district.
  const std::vector<std::string>& states() const { return states_; }
  int state_index(std::size_t district) const { return district_state_[district]; }

  // n x 2 matrix of (lon, lat).
  Eigen::MatrixXd coordinates() const;

 private:
  std::vector<District> districts_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<std::string> states_;
  std::vector<int> district_state_;
};

// Population per (district, group); rows follow the registry, columns GroupKey::index().
struct PopulationTable {
  Eigen::MatrixXd persons;

  double operator()(std::size_t district, GroupKey g) const { return persons(district, g.index()); }
};

struct CaseRecord {
  std::string case_id;
  std::string district_id;
  std::string state_id;
  GroupKey group;
  Date report_date;
  std::optional<Date> onset_date;
  bool weekend = false;  // report_date falls on Saturday or Sunday

  CaseRecord() = default;
  CaseRecord(std::string case_id, std::string district_id, std::string state_id, GroupKey group, Date report,
             std::optional<Date> onset)
      : case_id(std::move(case_id)),
        district_id(std::move(district_id)),
        state_id(std::move(state_id)),
        group(group),
        report_date(report),
        onset_date(onset),
        weekend(is_weekend(report)) {}
};

// Counts and rates per cell. Row index = district * GroupKey::count + group, column = week (0-based;
// column 0 is the first calendar week).
struct SurveillancePanel {
  WeekCalendar calendar;
  std::size_t districts = 0;
  Eigen::MatrixXd counts;
  Eigen::MatrixXd rates;  // per 10,000 persons; empty until compute_rates

  static std::size_t cell(std::size_t district, int group) {
    return district * GroupKey::count + static_cast<std::size_t>(group);
  }
  int weeks() const { return static_cast<int>(counts.cols()); }
  double count(std::size_t district, GroupKey g, int week) const { return counts(cell(district, g.index()), week); }
  double rate(std::size_t district, GroupKey g, int week) const { return rates(cell(district, g.index()), week); }
};

struct AggregationLog {
  std::size_t used = 0;
  std::size_t dropped_before_window = 0;
  std::size_t dropped_after_window = 0;
};

// Line list: header case_id,district_id,state_id,age_band,gender,report_date,onset_date.
// Unknown districts are rejected with the offending ids when a registry is given.
std::vector<CaseRecord> parse_line_list(std::istream& in, const DistrictRegistry* registry = nullptr);
void write_line_list(std::ostream& out, const std::vector<CaseRecord>& records, std::optional<int> imputation = {});

DistrictRegistry parse_registry(std::istream& in);
void write_registry(std::ostream& out, const DistrictRegistry& registry);
PopulationTable parse_population(std::istream& in, const DistrictRegistry& registry);
void write_population(std::ostream& out, const DistrictRegistry& registry, const PopulationTable& population);

// Counts cases per (district, group, onset week). Every record must carry an onset date.
SurveillancePanel aggregate_panel(const std::vector<CaseRecord>& records, const DistrictRegistry& registry,
                                  const WeekCalendar& calendar, AggregationLog* log = nullptr);

// rate = 10,000 * count / population.
void compute_rates(SurveillancePanel& panel, const PopulationTable& population);

}  // namespace epi
