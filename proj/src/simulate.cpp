#include "epi/simulate.hpp"

#include <cmath>
#include <cstdio>

#include "epi/delay.hpp"
#include "epi/error.hpp"

namespace epi {

namespace {

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

Eigen::VectorXd centred(Eigen::VectorXd v) { return (v.array() - v.mean()).matrix(); }

}  // namespace

SimulatedData simulate_panel(const SimulationConfig& config) {
  const std::size_t n = config.districts;
  const int T = config.weeks;
  if (n < 3) throw Error("simulation needs at least three districts");
  if (T < 2) throw Error("simulation needs at least two weeks");
  if (config.states < 1) throw Error("simulation needs at least one state");
  if (!(config.population_min > 0.0) || config.population_max < config.population_min)
    throw Error("invalid population range");
  SimulationTruth truth = config.truth;
  if (!(truth.c > 0.0 && truth.c <= 1.0)) throw Error("true c must lie in (0, 1]");

  SimulatedData out;
  out.config = config;
  const auto N = static_cast<Eigen::Index>(n);

  // Districts, states and populations.
  std::mt19937_64 rng = substream(config.seed, 1);
  std::uniform_real_distribution<double> lon(6.0, 15.0), lat(47.5, 55.0), unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<District> districts;
  for (std::size_t i = 0; i < n; ++i) {
    District d;
    d.id = padded("D", i + 1, 3);
    d.lon = lon(rng);
    d.lat = lat(rng);
    const int s = std::min(config.states - 1, static_cast<int>((d.lon - 6.0) / 9.0 * config.states));
    d.state_id = padded("S", static_cast<std::size_t>(s + 1), 2);
    districts.push_back(d);
  }
  out.registry = DistrictRegistry(districts);
  out.population.persons.resize(N, GroupKey::count);
  const double log_lo = std::log(config.population_min), log_hi = std::log(config.population_max);
  for (Eigen::Index i = 0; i < N; ++i)
    for (int g = 0; g < GroupKey::count; ++g)
      out.population.persons(i, g) = std::round(std::exp(log_lo + unit(rng) * (log_hi - log_lo)));
  out.calendar = WeekCalendar{config.anchor, T};
  const Eigen::MatrixXd geo = out.registry.coordinates();

  // Weekly co-location and Gini indices.
  std::mt19937_64 feat = substream(config.seed, 2);
  Eigen::MatrixXd geo_dist(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) geo_dist(i, j) = (geo.row(i) - geo.row(j)).norm();
  const Eigen::VectorXd mass = out.population.persons.rowwise().sum();
  Eigen::VectorXd log_scale(N);
  for (Eigen::Index i = 0; i < N; ++i) log_scale(i) = std::log(2.0) + 0.3 * normal(feat);
  FeatureSeries gini_raw{FeatureKind::gini, false, Eigen::MatrixXd(N, T)};
  for (int t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < N; ++i) log_scale(i) += 0.15 * normal(feat);
    Eigen::MatrixXd p(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index j = 0; j < N; ++j) p(i, j) = i == j ? 0.0 : mass(j) * std::exp(-geo_dist(i, j) / std::exp(log_scale(i)));
      const double total = p.row(i).sum();
      p.row(i) /= total;
      p(i, i) = 0.5;  // own-district mass; ignored by the index
    }
    gini_raw.values.col(t) = gini_indices(p);
    out.colocation.push_back(std::move(p));
  }
  out.gini = weekly_standardize(gini_raw);

  // Daily staying-put fractions.
  Eigen::VectorXd base(N), drift(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    base(i) = -1.0 + 0.3 * normal(feat);
    drift(i) = 0.0;
  }
  double common = 0.0;
  for (int t = 0; t < T; ++t) {
    common += 0.1 * normal(feat);
    for (Eigen::Index i = 0; i < N; ++i) drift(i) += 0.1 * normal(feat);
    for (int day = 0; day < 7; ++day) {
      const Date date = out.calendar.week_start(t + 1) + std::chrono::days{day};
      for (Eigen::Index i = 0; i < N; ++i) {
        const double z = base(i) + common + drift(i) + 0.05 * normal(feat);
        out.staying_put_daily.push_back({static_cast<std::size_t>(i), date, 1.0 / (1.0 + std::exp(-z))});
      }
    }
  }
  out.staying_put = weekly_standardize(weekly_average(out.staying_put_daily, n, out.calendar, FeatureKind::staying_put));

  // Social connectedness from latent friendship coordinates, then the embedding.
  std::vector<Eigen::Vector2d> state_shift(static_cast<std::size_t>(config.states));
  for (auto& s : state_shift) s = Eigen::Vector2d(normal(feat), normal(feat));
  Eigen::MatrixXd social(N, 2);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int s = out.registry.state_index(static_cast<std::size_t>(i));
    social.row(i) = geo.row(i) + state_shift[static_cast<std::size_t>(s)].transpose() +
                    0.3 * Eigen::RowVector2d(normal(feat), normal(feat));
  }
  out.connectedness.resize(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j)
      out.connectedness(i, j) = i == j ? 1.0 : 1.0 / ((social.row(i) - social.row(j)).norm() + 0.05);
  out.embedding = embed_connectedness(out.connectedness, geo);

  // Effects.
  std::mt19937_64 eff = substream(config.seed, 3);
  const double level = std::log(config.base_rate / 1e4);
  if (config.derive_week_effects) {
    truth.week_effect.resize(T);
    truth.week_effect(0) = level;
    for (int t = 1; t < T; ++t)
      truth.week_effect(t) = level - truth.ar * std::log(config.base_rate + truth.c) + config.week_effect_sd * normal(eff);
    truth.gini_effect.resize(T - 1);
    truth.staying_put_effect.resize(T - 1);
    for (int t = 0; t < T - 1; ++t) {
      truth.gini_effect(t) = config.gini_effect * (1.0 + 0.3 * std::sin(0.7 * t));
      truth.staying_put_effect(t) = config.staying_put_effect * (1.0 + 0.3 * std::cos(0.5 * t));
    }
  }
  if (truth.week_effect.size() != T || truth.gini_effect.size() != T - 1 || truth.staying_put_effect.size() != T - 1)
    throw Error("true week and feature effects must cover the simulated weeks");
  out.a.resize(N);
  out.b.resize(N);
  out.delay_district.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    out.a(i) = truth.tau_a * normal(eff);
    out.b(i) = truth.tau_b * normal(eff);
    out.delay_district(i) = truth.delay_district_sd * normal(eff);
  }
  Eigen::VectorXd fc(N), fs(N);
  const Eigen::MatrixXd& emb = out.embedding.coordinates;
  const Eigen::Vector2d emb_mean = emb.colwise().mean();
  for (Eigen::Index i = 0; i < N; ++i) {
    fc(i) = truth.coord_amplitude * std::sin(0.6 * geo(i, 0)) * std::cos(0.8 * geo(i, 1));
    fs(i) = truth.social_amplitude * std::sin(0.5 * (emb(i, 0) - emb_mean(0)) + 0.3 * (emb(i, 1) - emb_mean(1)));
  }
  out.f_coord = centred(fc);
  out.f_soc = centred(fs);
  out.config.truth = truth;

  // Counts week by week.
  std::mt19937_64 draws = substream(config.seed, 4);
  const Eigen::Index cells = N * GroupKey::count;
  out.panel.calendar = out.calendar;
  out.panel.districts = n;
  out.panel.counts = Eigen::MatrixXd::Zero(cells, T);
  out.panel.rates = Eigen::MatrixXd::Zero(cells, T);
  out.nu_endemic = Eigen::MatrixXd::Zero(cells, T);
  out.nu_epidemic = Eigen::MatrixXd::Zero(cells, T);
  for (int t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < N; ++i)
      for (int g = 0; g < GroupKey::count; ++g) {
        const auto cell = static_cast<Eigen::Index>(SurveillancePanel::cell(static_cast<std::size_t>(i), g));
        const GroupKey key = GroupKey::from_index(g);
        const bool male = key.gender == Gender::male, older = key.age == AgeBand::age36_59;
        const double pop = out.population.persons(i, g);
        double nu = truth.week_effect(t) + (male ? truth.male : 0.0) + (older ? truth.age : 0.0) +
                    (male && older ? truth.age_male : 0.0) + out.f_coord(i) + out.f_soc(i) + out.a(i) + std::log(pop);
        double epi = 0.0;
        if (t > 0) {
          nu += truth.gini_effect(t - 1) * out.gini.values(i, t - 1) +
                truth.staying_put_effect(t - 1) * out.staying_put.values(i, t - 1);
          if (t == T - 1) nu += out.b(i);
          epi = truth.ar * std::log(out.panel.rates(cell, t - 1) + truth.c);
        }
        out.nu_endemic(cell, t) = nu;
        out.nu_epidemic(cell, t) = epi;
        const double mu = std::exp(nu + epi);
        if (!(mu <= 1e9)) throw Error("simulated mean exceeds 1e9; use smaller coefficients or base rate");
        const double y = draw_negative_binomial(mu, 1.0 / truth.dispersion, draws);
        out.panel.counts(cell, t) = y;
        out.panel.rates(cell, t) = (y * 10000.0) / pop;
      }
  return out;
}

std::vector<CaseRecord> simulate_line_list(const SimulatedData& data, std::uint64_t seed) {
  std::mt19937_64 rng = substream(seed, 11);
  std::uniform_int_distribution<int> weekday(0, 6);
  const SimulationTruth& truth = data.config.truth;
  std::vector<CaseRecord> out;
  std::size_t next = 1;
  const int T = data.panel.weeks();
  for (int t = 0; t < T; ++t)
    for (std::size_t i = 0; i < data.panel.districts; ++i)
      for (int g = 0; g < GroupKey::count; ++g) {
        const GroupKey key = GroupKey::from_index(g);
        const bool male = key.gender == Gender::male, older = key.age == AgeBand::age36_59;
        const double log_mu = std::log(truth.delay_mean) + (male ? truth.delay_group(0) : 0.0) +
                              (older ? truth.delay_group(1) : 0.0) + (male && older ? truth.delay_group(2) : 0.0) +
                              data.delay_district(static_cast<Eigen::Index>(i));
        const auto y = static_cast<long long>(data.panel.counts(static_cast<Eigen::Index>(SurveillancePanel::cell(i, g)), t));
        for (long long c = 0; c < y; ++c) {
          const Date onset = data.calendar.week_start(t + 1) + std::chrono::days{weekday(rng)};
          const int delay = draw_negative_binomial(std::exp(log_mu), truth.delay_sigma, rng) + truth.delay_shift;
          const District& d = data.registry[i];
          out.emplace_back(padded("C", next++, 7), d.id, d.state_id, key, onset + std::chrono::days{std::max(0, delay)},
                           onset);
        }
      }
  return out;
}

std::vector<CaseRecord> apply_missingness(const std::vector<CaseRecord>& cases, double fraction, std::uint64_t seed,
                                          double mar_strength) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("missing fraction must lie in [0, 1)");
  std::vector<CaseRecord> out = cases;
  if (fraction == 0.0) return out;
  std::mt19937_64 rng = substream(seed, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double mean_z = 0.0;
  if (mar_strength != 0.0) {
    for (const auto& c : cases) mean_z += (c.weekend ? 1.0 : 0.0) + (c.group.age == AgeBand::age36_59 ? 1.0 : 0.0);
    mean_z /= std::max<std::size_t>(1, cases.size());
  }
  const double base_logit = std::log(fraction / (1.0 - fraction));
  for (auto& c : out) {
    double p = fraction;
    if (mar_strength != 0.0) {
      const double z = (c.weekend ? 1.0 : 0.0) + (c.group.age == AgeBand::age36_59 ? 1.0 : 0.0) - mean_z;
      p = 1.0 / (1.0 + std::exp(-(base_logit + mar_strength * z)));
    }
    if (unit(rng) < p) c.onset_date.reset();
  }
  return out;
}

}  // namespace epi
