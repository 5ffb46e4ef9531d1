#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "epi/dates.hpp"
#include "epi/embedding.hpp"
#include "epi/mobility.hpp"
#include "epi/panel.hpp"

namespace epi {

struct SimulationTruth {
  // Infection model. week_effect(t) for calendar weeks 1..T; gini/staying-put effects apply to the
  // week of the response and multiply the previous week's standardized feature.
  Eigen::VectorXd week_effect;
  double male = -0.03;
  double age = -0.031;
  double age_male = -0.071;
  Eigen::VectorXd gini_effect;         // weeks 2..T (length T - 1)
  Eigen::VectorXd staying_put_effect;  // weeks 2..T (length T - 1)
  double ar = 0.623;
  double c = 0.5;
  double dispersion = 5.0;  // NB size phi
  double tau_a = 0.2;       // sd of a_i
  double tau_b = 0.2;       // sd of b_i
  double coord_amplitude = 0.2;
  double social_amplitude = 0.15;

  // Delay model: log mu = log(delay_mean) + group effects + district effect, sigma constant per group.
  double delay_mean = 5.0;
  Eigen::Vector3d delay_group{0.05, 0.10, -0.05};  // male, age36_59, age36_59:male
  double delay_district_sd = 0.1;
  double delay_sigma = 0.3;
  int delay_shift = 0;  // added to every delay (misspecification experiments)
};

struct SimulationConfig {
  std::size_t districts = 50;
  int weeks = 16;
  int states = 5;
  Date anchor = parse_date("2020-03-03");
  double population_min = 10000.0;  // per group
  double population_max = 60000.0;
  double base_rate = 1.0;  // target weekly cases per 10,000 persons
  double week_effect_sd = 0.15;
  double gini_effect = 0.15;
  double staying_put_effect = -0.1;
  std::uint64_t seed = 1;
  SimulationTruth truth;
  bool derive_week_effects = true;  // set truth.week_effect / feature effects from the fields above
};

struct SimulatedData {
  SimulationConfig config;
  DistrictRegistry registry;
  PopulationTable population;
  WeekCalendar calendar;
  std::vector<Eigen::MatrixXd> colocation;   // one n x n matrix per week
  std::vector<DailyValue> staying_put_daily;
  Eigen::MatrixXd connectedness;             // n x n
  FeatureSeries gini;                        // standardized
  FeatureSeries staying_put;                 // standardized
  SocialEmbedding embedding;
  SurveillancePanel panel;                   // by true onset week, rates computed
  // Drawn and derived truth.
  Eigen::VectorXd a, b;
  Eigen::VectorXd f_coord, f_soc;            // per district, centred
  Eigen::MatrixXd nu_endemic;                // cells x weeks (includes the population offset)
  Eigen::MatrixXd nu_epidemic;               // cells x weeks (zero in week 1)
  Eigen::VectorXd delay_district;
};

// Sequential generation of the full synthetic study. Throws when a mean exceeds 1e9.
SimulatedData simulate_panel(const SimulationConfig& config);

// Line list behind the panel: onsets uniform within the onset week, delays from the NB delay model,
// report = onset + delay. Every onset is present.
std::vector<CaseRecord> simulate_line_list(const SimulatedData& data, std::uint64_t seed);

// Blanks each onset independently. With mar_strength > 0 the log-odds of blanking rise with
// weekend reports and the older age band (missing at random given observed covariates).
std::vector<CaseRecord> apply_missingness(const std::vector<CaseRecord>& cases, double fraction, std::uint64_t seed,
                                          double mar_strength = 0.0);

}  // namespace epi
