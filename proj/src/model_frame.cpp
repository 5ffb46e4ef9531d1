#include "epi/model_frame.hpp"

#include <cmath>

#include "epi/basis.hpp"
#include "epi/error.hpp"

namespace epi {

namespace {

void check_feature(const FeatureSeries* series, const char* what, std::size_t n, int weeks) {
  if (!series) throw Error(std::string(what) + " feature series is missing");
  if (static_cast<std::size_t>(series->values.rows()) != n)
    throw Error(std::string(what) + " feature has " + std::to_string(series->values.rows()) + " districts, expected " +
                std::to_string(n));
  if (series->values.cols() < weeks - 1)
    throw Error(std::string(what) + " feature covers " + std::to_string(series->values.cols()) +
                " weeks but weeks 1.." + std::to_string(weeks - 1) + " are needed");
  for (Eigen::Index w = 0; w < weeks - 1; ++w)
    for (Eigen::Index i = 0; i < series->values.rows(); ++i)
      if (!std::isfinite(series->values(i, w)))
        throw Error(std::string(what) + " feature missing for district " + std::to_string(i) + " in week " +
                    std::to_string(w + 1));
}

// Adds a district-level block replicated onto the frame rows.
void add_district_block(DesignBuilder& builder, const std::vector<FrameRow>& keys, const BasisBlock& block,
                        const std::string& label, bool last_week_only, int last_week) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t r = 0; r < keys.size(); ++r) {
    if (last_week_only && keys[r].week != last_week) continue;
    const auto d = static_cast<Eigen::Index>(keys[r].district);
    for (Eigen::Index c = 0; c < block.cols(); ++c)
      if (block.design(d, c) != 0.0) entries.emplace_back(static_cast<int>(r), static_cast<int>(c), block.design(d, c));
  }
  std::vector<std::string> names;
  for (Eigen::Index c = 0; c < block.cols(); ++c) names.push_back(label + "." + std::to_string(c + 1));
  builder.add_sparse(label, block.cols(), entries, names, block.penalty, block.null_space_dim);
}

}  // namespace

ModelFrame::ModelFrame(const SurveillancePanel& panel, const PopulationTable& population,
                       const FrameCovariates& covariates, const FrameOptions& options)
    : options_(options), districts_(panel.districts), weeks_(panel.weeks()) {
  const std::size_t n = districts_;
  const int T = weeks_;
  if (T < 2) throw Error("the model frame needs at least two weeks");
  if (panel.rates.size() != panel.counts.size()) throw Error("panel rates have not been computed");
  if (static_cast<std::size_t>(population.persons.rows()) != n) throw Error("population table does not match the panel");
  if (options.gini) check_feature(covariates.gini, "gini", n, T);
  if (options.staying_put) check_feature(covariates.staying_put, "staying_put", n, T);
  if (options.coord_smooth && static_cast<std::size_t>(covariates.geography.rows()) != n)
    throw Error("geographic coordinates do not cover every district");
  if (options.social_smooth && static_cast<std::size_t>(covariates.social.rows()) != n)
    throw Error("social embedding does not cover every district");

  const Eigen::Index rows = static_cast<Eigen::Index>(n) * GroupKey::count * (T - 1);
  y_.resize(rows);
  lagged_.resize(rows);
  offset_.resize(rows);
  keys_.reserve(static_cast<std::size_t>(rows));
  for (int week = 2; week <= T; ++week)
    for (std::size_t i = 0; i < n; ++i)
      for (int g = 0; g < GroupKey::count; ++g) {
        const auto r = static_cast<Eigen::Index>(keys_.size());
        const auto cell = static_cast<Eigen::Index>(SurveillancePanel::cell(i, g));
        y_(r) = panel.counts(cell, week - 1);
        lagged_(r) = panel.rates(cell, week - 2);
        const double pop = population.persons(static_cast<Eigen::Index>(i), g);
        if (!(pop > 0.0)) throw Error("population must be positive for district " + std::to_string(i));
        offset_(r) = std::log(pop);
        keys_.push_back({i, g, week});
      }

  DesignBuilder builder(rows);
  {
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<std::string> names;
    for (int week = 2; week <= T; ++week) names.push_back("week" + std::to_string(week));
    for (std::size_t r = 0; r < keys_.size(); ++r) entries.emplace_back(static_cast<int>(r), keys_[r].week - 2, 1.0);
    builder.add_sparse("week", T - 1, entries, names);
  }
  {
    std::vector<Eigen::Triplet<double>> entries;
    for (std::size_t r = 0; r < keys_.size(); ++r) {
      const GroupKey g = GroupKey::from_index(keys_[r].group);
      const bool male = g.gender == Gender::male;
      const bool older = g.age == AgeBand::age36_59;
      if (male) entries.emplace_back(static_cast<int>(r), 0, 1.0);
      if (older) entries.emplace_back(static_cast<int>(r), 1, 1.0);
      if (male && older) entries.emplace_back(static_cast<int>(r), 2, 1.0);
    }
    builder.add_sparse("group", 3, entries, {kMaleName, kAgeName, kAgeMaleName});
  }
  auto add_feature = [&](const FeatureSeries& series, const std::string& label) {
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<std::string> names;
    for (int week = 2; week <= T; ++week) names.push_back(label + ":week" + std::to_string(week));
    for (std::size_t r = 0; r < keys_.size(); ++r) {
      const double v = series.values(static_cast<Eigen::Index>(keys_[r].district), keys_[r].week - 2);
      if (v != 0.0) entries.emplace_back(static_cast<int>(r), keys_[r].week - 2, v);
    }
    builder.add_sparse(label, T - 1, entries, names);
  };
  if (options.gini) add_feature(*covariates.gini, "gini");
  if (options.staying_put) add_feature(*covariates.staying_put, "staying_put");
  if (options.autoregressive) {
    ar_column_ = builder.cols();
    std::vector<Eigen::Triplet<double>> entries;
    // Placeholder values; design(c) overwrites them. Explicit entries keep the sparsity pattern fixed.
    for (std::size_t r = 0; r < keys_.size(); ++r) entries.emplace_back(static_cast<int>(r), 0, 1.0);
    builder.add_sparse("ar", 1, entries, {ar_name()});
  }
  if (options.coord_smooth) {
    SmoothSpec spec{SmoothKind::thinplate, options.thinplate_rank};
    add_district_block(builder, keys_, thinplate_block(covariates.geography, spec, "f_coord"), "f_coord", false, T);
  }
  if (options.social_smooth) {
    SmoothSpec spec{SmoothKind::thinplate, options.thinplate_rank};
    add_district_block(builder, keys_, thinplate_block(covariates.social, spec, "f_soc"), "f_soc", false, T);
  }
  std::vector<int> levels(n);
  for (std::size_t i = 0; i < n; ++i) levels[i] = static_cast<int>(i);
  if (options.district_effect)
    add_district_block(builder, keys_, ridge_block(levels, static_cast<int>(n), "a"), "a", false, T);
  if (options.last_week_effect)
    add_district_block(builder, keys_, ridge_block(levels, static_cast<int>(n), "b"), "b", true, T);

  base_ = builder.build(offset_);
  if (ar_column_ >= 0) {
    ar_positions_.resize(keys_.size());
    for (Eigen::Index r = 0; r < base_.X.outerSize(); ++r) {
      int found = -1;
      for (int k = base_.X.outerIndexPtr()[r]; k < base_.X.outerIndexPtr()[r + 1]; ++k)
        if (base_.X.innerIndexPtr()[k] == ar_column_) found = k;
      if (found < 0) throw Error("internal: autoregressive entry missing from the design");
      ar_positions_[static_cast<std::size_t>(r)] = found;
    }
  }
}

PenalizedDesign ModelFrame::design(double c) const {
  PenalizedDesign d = base_;
  if (ar_column_ < 0) return d;
  if (!(c > 0.0)) throw Error("autoregressive offset constant must be positive");
  double* values = d.X.valuePtr();
  for (std::size_t r = 0; r < ar_positions_.size(); ++r)
    values[ar_positions_[r]] = std::log(lagged_(static_cast<Eigen::Index>(r)) + c);
  return d;
}

}  // namespace epi
