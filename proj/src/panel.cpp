#include "epi/panel.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "epi/csv.hpp"
#include "epi/error.hpp"

namespace epi {

AgeBand parse_age_band(std::string_view text) {
  if (text == "15-35" || text == "15–35") return AgeBand::age15_35;
  if (text == "36-59" || text == "36–59") return AgeBand::age36_59;
  throw Error("unknown age band '" + std::string(text) + "'");
}

Gender parse_gender(std::string_view text) {
  if (text == "female") return Gender::female;
  if (text == "male") return Gender::male;
  throw Error("unknown gender '" + std::string(text) + "'");
}

std::string to_string(AgeBand age) { return age == AgeBand::age15_35 ? "15-35" : "36-59"; }
std::string to_string(Gender gender) { return gender == Gender::female ? "female" : "male"; }

DistrictRegistry::DistrictRegistry(std::vector<District> districts) : districts_(std::move(districts)) {
  if (districts_.size() <= 2) throw Error("registry needs more than two districts");
  std::set<std::string> states;
  for (std::size_t i = 0; i < districts_.size(); ++i) {
    if (!lookup_.emplace(districts_[i].id, i).second) throw Error("duplicate district id '" + districts_[i].id + "'");
    states.insert(districts_[i].state_id);
  }
  states_.assign(states.begin(), states.end());
  district_state_.reserve(districts_.size());
  for (const auto& d : districts_) {
    const auto it = std::lower_bound(states_.begin(), states_.end(), d.state_id);
    district_state_.push_back(static_cast<int>(it - states_.begin()));
  }
}

std::optional<std::size_t> DistrictRegistry::find(const std::string& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t DistrictRegistry::index_of(const std::string& id) const {
  if (auto i = find(id)) return *i;
  throw Error("unknown district '" + id + "'");
}

Eigen::MatrixXd DistrictRegistry::coordinates() const {
  Eigen::MatrixXd xy(districts_.size(), 2);
  for (std::size_t i = 0; i < districts_.size(); ++i) {
    xy(i, 0) = districts_[i].lon;
    xy(i, 1) = districts_[i].lat;
  }
  return xy;
}

std::vector<CaseRecord> parse_line_list(std::istream& in, const DistrictRegistry* registry) {
  CsvReader csv(in);
  const auto c_id = csv.column("case_id");
  const auto c_district = csv.column("district_id");
  const auto c_state = csv.column("state_id");
  const auto c_age = csv.column("age_band");
  const auto c_gender = csv.column("gender");
  const auto c_report = csv.column("report_date");
  const auto c_onset = csv.column("onset_date");

  std::vector<CaseRecord> records;
  std::vector<std::string> unknown;
  std::vector<std::string> f;
  while (csv.next(f)) {
    try {
      const GroupKey group{parse_age_band(f[c_age]), parse_gender(f[c_gender])};
      const Date report = parse_date(f[c_report]);
      std::optional<Date> onset;
      if (!f[c_onset].empty()) {
        onset = parse_date(f[c_onset]);
        if (*onset > report) throw Error("onset date after report date");
      }
      if (registry && !registry->find(f[c_district])) unknown.push_back(f[c_district]);
      records.emplace_back(f[c_id], f[c_district], f[c_state], group, report, onset);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(csv.line(), e.what());
    }
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    std::string msg = "unknown district id(s):";
    for (const auto& id : unknown) msg += " " + id;
    throw Error(msg);
  }
  return records;
}

void write_line_list(std::ostream& out, const std::vector<CaseRecord>& records, std::optional<int> imputation) {
  out << "case_id,district_id,state_id,age_band,gender,report_date,onset_date";
  if (imputation) out << ",k";
  out << '\n';
  for (const auto& r : records) {
    out << r.case_id << ',' << r.district_id << ',' << r.state_id << ',' << to_string(r.group.age) << ','
        << to_string(r.group.gender) << ',' << format_date(r.report_date) << ','
        << (r.onset_date ? format_date(*r.onset_date) : std::string{});
    if (imputation) out << ',' << *imputation;
    out << '\n';
  }
}

DistrictRegistry parse_registry(std::istream& in) {
  CsvReader csv(in);
  const auto c_id = csv.column("district_id");
  const auto c_state = csv.column("state_id");
  const auto c_lon = csv.column("lon");
  const auto c_lat = csv.column("lat");
  std::vector<District> districts;
  std::vector<std::string> f;
  while (csv.next(f)) {
    try {
      districts.push_back({f[c_id], f[c_state], parse_double(f[c_lon]), parse_double(f[c_lat])});
    } catch (const Error& e) {
      throw ParseError(csv.line(), e.what());
    }
  }
  return DistrictRegistry(std::move(districts));
}

void write_registry(std::ostream& out, const DistrictRegistry& registry) {
  out.precision(17);
  out << "district_id,state_id,lon,lat\n";
  for (const auto& d : registry.districts()) out << d.id << ',' << d.state_id << ',' << d.lon << ',' << d.lat << '\n';
}

PopulationTable parse_population(std::istream& in, const DistrictRegistry& registry) {
  CsvReader csv(in);
  const auto c_id = csv.column("district_id");
  const auto c_age = csv.column("age_band");
  const auto c_gender = csv.column("gender");
  const auto c_pop = csv.column("population");
  PopulationTable table{Eigen::MatrixXd::Constant(registry.size(), GroupKey::count, -1.0)};
  std::vector<std::string> f;
  while (csv.next(f)) {
    try {
      const auto i = registry.index_of(f[c_id]);
      const GroupKey g{parse_age_band(f[c_age]), parse_gender(f[c_gender])};
      const double persons = parse_double(f[c_pop]);
      if (!(persons > 0.0)) throw Error("population must be positive");
      table.persons(i, g.index()) = persons;
    } catch (const Error& e) {
      throw ParseError(csv.line(), e.what());
    }
  }
  for (std::size_t i = 0; i < registry.size(); ++i)
    for (int g = 0; g < GroupKey::count; ++g)
      if (table.persons(i, g) < 0.0)
        throw Error("population missing for district " + registry[i].id + " group " +
                    to_string(GroupKey::from_index(g).age) + "/" + to_string(GroupKey::from_index(g).gender));
  return table;
}

void write_population(std::ostream& out, const DistrictRegistry& registry, const PopulationTable& population) {
  out.precision(17);
  out << "district_id,age_band,gender,population\n";
  for (std::size_t i = 0; i < registry.size(); ++i)
    for (int g = 0; g < GroupKey::count; ++g) {
      const auto key = GroupKey::from_index(g);
      out << registry[i].id << ',' << to_string(key.age) << ',' << to_string(key.gender) << ','
          << population.persons(i, g) << '\n';
    }
}

SurveillancePanel aggregate_panel(const std::vector<CaseRecord>& records, const DistrictRegistry& registry,
                                  const WeekCalendar& calendar, AggregationLog* log) {
  if (calendar.weeks < 1) throw Error("week calendar must cover at least one week");
  SurveillancePanel panel;
  panel.calendar = calendar;
  panel.districts = registry.size();
  panel.counts = Eigen::MatrixXd::Zero(registry.size() * GroupKey::count, calendar.weeks);
  AggregationLog local;
  for (const auto& r : records) {
    if (!r.onset_date) throw Error("case " + r.case_id + " has no onset date; impute before aggregating");
    const int week = calendar.week_of(*r.onset_date);
    if (week < 1) {
      ++local.dropped_before_window;
      continue;
    }
    if (week > calendar.weeks) {
      ++local.dropped_after_window;
      continue;
    }
    const auto i = registry.index_of(r.district_id);
    panel.counts(SurveillancePanel::cell(i, r.group.index()), week - 1) += 1.0;
    ++local.used;
  }
  if (log) *log = local;
  return panel;
}

void compute_rates(SurveillancePanel& panel, const PopulationTable& population) {
  if (population.persons.rows() != static_cast<Eigen::Index>(panel.districts) ||
      population.persons.cols() != GroupKey::count)
    throw Error("population table does not cover the panel");
  panel.rates.resize(panel.counts.rows(), panel.counts.cols());
  for (std::size_t i = 0; i < panel.districts; ++i)
    for (int g = 0; g < GroupKey::count; ++g) {
      const double persons = population.persons(i, g);
      if (!(persons > 0.0)) throw Error("population must be positive");
      const auto row = SurveillancePanel::cell(i, g);
      panel.rates.row(row) = (panel.counts.row(row) * 10000.0) / persons;
    }
}

}  // namespace epi
