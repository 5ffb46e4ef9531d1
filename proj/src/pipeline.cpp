#include "epi/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "epi/delay.hpp"
#include "epi/diagnostics.hpp"
#include "epi/embedding.hpp"
#include "epi/error.hpp"
#include "epi/io.hpp"
#include "epi/mobility.hpp"
#include "epi/model_fit.hpp"
#include "epi/svg.hpp"

namespace epi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Artifact layout below the output directory.
const fs::path kGini = "features/gini.csv";
const fs::path kStayingPut = "features/staying_put.csv";
const fs::path kEmbedding = "embedding/coordinates.csv";
const fs::path kEmbeddingSummary = "embedding/embedding.json";
const fs::path kDelayModel = "impute/delay_model.json";
const fs::path kPooled = "pool/pooled.json";
const fs::path kDistrictEffects = "pool/district_effects.csv";
const fs::path kQQ = "diagnose/qq.csv";
const fs::path kRootogram = "diagnose/rootogram.csv";
const fs::path kDiagnostics = "diagnose/diagnostics.json";

fs::path imputation_path(int k) { return fs::path("impute") / ("cases_" + std::to_string(k) + ".csv"); }
fs::path fit_path(int k) { return fs::path("fit") / ("fit_" + std::to_string(k) + ".json"); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config entry '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const fs::path p = get_or<std::string>(j, key, "");
  return p.is_absolute() ? p : base / p;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  PipelineConfig c;
  c.base_dir = base_dir;
  const json data = j.value("data", json::object());
  c.registry = resolve(base_dir, data, "registry");
  c.population = resolve(base_dir, data, "population");
  c.line_list = resolve(base_dir, data, "line_list");
  c.colocation = resolve(base_dir, data, "colocation");
  c.staying_put = resolve(base_dir, data, "staying_put");
  c.connectedness = resolve(base_dir, data, "connectedness");

  const json calendar = j.value("calendar", json::object());
  if (calendar.contains("anchor")) c.anchor = parse_date(get_or<std::string>(calendar, "anchor", ""));
  c.weeks = get_or(calendar, "weeks", 0);

  const json imputation = j.value("imputation", json::object());
  c.imputations = get_or(imputation, "K", kDefaultImputations);
  c.delay_trend_k = get_or(imputation, "trend_k", 20);
  if (c.imputations < 2) throw Error("imputation.K must be at least 2");

  const json model = j.value("model", json::object());
  c.family = parse_family(get_or<std::string>(model, "family", "negative_binomial"));
  c.profile_c = get_or(model, "profile_c", true);
  c.fixed_c = get_or(model, "fixed_c", 0.5);
  const std::string pooling = get_or<std::string>(model, "offset_pooling", "pooled");
  if (pooling == "pooled") c.offset_pooling = OffsetPooling::pooled;
  else if (pooling == "fixed") c.offset_pooling = OffsetPooling::fixed;
  else throw Error("model.offset_pooling must be 'pooled' or 'fixed'");
  c.frame.thinplate_rank = get_or(model, "thinplate_rank", c.frame.thinplate_rank);
  const json terms = model.value("terms", json::object());
  c.frame.gini = get_or(terms, "gini", c.frame.gini);
  c.frame.staying_put = get_or(terms, "staying_put", c.frame.staying_put);
  c.frame.coord_smooth = get_or(terms, "coord_smooth", c.frame.coord_smooth);
  c.frame.social_smooth = get_or(terms, "social_smooth", c.frame.social_smooth);
  c.frame.district_effect = get_or(terms, "district_effect", c.frame.district_effect);
  c.frame.last_week_effect = get_or(terms, "last_week_effect", c.frame.last_week_effect);
  c.frame.autoregressive = get_or(terms, "autoregressive", c.frame.autoregressive);

  const json diagnostics = j.value("diagnostics", json::object());
  c.rootogram_max = get_or(diagnostics, "rootogram_max", -1);

  c.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.workers = std::max(1, get_or(j, "workers", 1));
  if (j.contains("output")) c.output = resolve(base_dir, j, "output");

  const json sim = j.value("simulate", json::object());
  SimulationConfig& s = c.simulate.config;
  s.districts = get_or<std::size_t>(sim, "districts", s.districts);
  s.weeks = get_or(sim, "weeks", s.weeks);
  s.states = get_or(sim, "states", s.states);
  if (sim.contains("anchor")) s.anchor = parse_date(get_or<std::string>(sim, "anchor", ""));
  s.population_min = get_or(sim, "population_min", s.population_min);
  s.population_max = get_or(sim, "population_max", s.population_max);
  s.base_rate = get_or(sim, "base_rate", s.base_rate);
  s.gini_effect = get_or(sim, "gini_effect", s.gini_effect);
  s.staying_put_effect = get_or(sim, "staying_put_effect", s.staying_put_effect);
  s.truth.ar = get_or(sim, "ar", s.truth.ar);
  s.truth.c = get_or(sim, "c", s.truth.c);
  s.truth.dispersion = get_or(sim, "dispersion", s.truth.dispersion);
  c.simulate.missing_fraction = get_or(sim, "missing_fraction", c.simulate.missing_fraction);
  c.simulate.mar_strength = get_or(sim, "mar_strength", c.simulate.mar_strength);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config file " + file.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, file.parent_path().empty() ? fs::path(".") : file.parent_path());
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 unavailable");
  }
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"features", "embed",    "impute",   "fit",  "pool",
                                              "diagnose", "simulate", "pipeline", "plot"};
  return names;
}

namespace {

struct Context {
  PipelineConfig config;
  std::optional<fs::path> config_file;
  fs::path out;
  std::string stage;
};

std::ifstream open_input(const fs::path& path) {
  if (path.empty()) throw Error("input path not configured");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing input file: " + path.string());
  return in;
}

std::string display_path(const fs::path& path, const fs::path& base) {
  const fs::path rel = path.lexically_normal().lexically_relative(base.lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return path.lexically_normal().generic_string();
}

// Writes through a temporary file so that a failing stage never leaves a truncated artifact.
class Artifact {
 public:
  Artifact(const Context& ctx, const fs::path& rel) : rel_(rel), path_(ctx.out / rel) {
    fs::create_directories(path_.parent_path());
    tmp_ = path_;
    tmp_ += ".tmp";
    stream_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw Error("cannot write " + path_.string());
  }
  std::ostream& stream() { return stream_; }
  fs::path commit() {
    stream_.close();
    if (!stream_) throw Error("write failed for " + path_.string());
    fs::rename(tmp_, path_);
    return rel_;
  }

 private:
  fs::path rel_, path_, tmp_;
  std::ofstream stream_;
};

fs::path write_json(const Context& ctx, const fs::path& rel, const json& j) {
  Artifact a(ctx, rel);
  a.stream() << j.dump(2) << '\n';
  return a.commit();
}

fs::path write_text(const Context& ctx, const fs::path& rel, const std::string& text) {
  Artifact a(ctx, rel);
  a.stream() << text;
  return a.commit();
}

// Inputs are hashed; no timestamps so that reruns are byte-identical.
void write_manifest(const Context& ctx, const json& parameters, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  json in = json::array(), out = json::array();
  for (const auto& p : inputs) in.push_back({{"path", display_path(p, ctx.config.base_dir)}, {"sha256", sha256_file(p)}});
  for (const auto& p : outputs) out.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(ctx.out / p)}});
  json m{{"stage", ctx.stage}, {"version", kVersion}, {"parameters", parameters}, {"inputs", in}, {"outputs", out}};
  write_json(ctx, fs::path("manifests") / (ctx.stage + ".json"), m);
}

WeekCalendar calendar_of(const PipelineConfig& c) {
  if (c.weeks < 2) throw Error("calendar.weeks must be at least 2");
  return {c.anchor, c.weeks};
}

DistrictRegistry load_registry(const PipelineConfig& c) {
  auto in = open_input(c.registry);
  return parse_registry(in);
}

PopulationTable load_population(const PipelineConfig& c, const DistrictRegistry& registry) {
  auto in = open_input(c.population);
  return parse_population(in, registry);
}

// ---- stages ----

void stage_features(const Context& ctx) {
  const auto& c = ctx.config;
  const DistrictRegistry registry = load_registry(c);
  const WeekCalendar calendar = calendar_of(c);

  std::vector<Eigen::MatrixXd> colocation;
  {
    auto in = open_input(c.colocation);
    colocation = read_colocation(in, registry);
  }
  if (static_cast<int>(colocation.size()) < calendar.weeks - 1)
    throw Error("co-location covers " + std::to_string(colocation.size()) + " weeks, need at least " +
                std::to_string(calendar.weeks - 1));
  FeatureSeries gini{FeatureKind::gini, false,
                     Eigen::MatrixXd(static_cast<Eigen::Index>(registry.size()), static_cast<Eigen::Index>(colocation.size()))};
  for (std::size_t w = 0; w < colocation.size(); ++w) gini.values.col(static_cast<Eigen::Index>(w)) = gini_indices(colocation[w]);
  gini = weekly_standardize(gini);

  std::vector<DailyValue> daily;
  {
    auto in = open_input(c.staying_put);
    daily = read_staying_put(in, registry);
  }
  // The model uses week t-1 features for weeks 2..T.
  const WeekCalendar lagged{calendar.anchor, calendar.weeks - 1};
  const FeatureSeries staying = weekly_standardize(weekly_average(daily, registry.size(), lagged, FeatureKind::staying_put));

  std::vector<fs::path> outputs;
  {
    Artifact a(ctx, kGini);
    write_feature_series(a.stream(), registry, gini);
    outputs.push_back(a.commit());
  }
  {
    Artifact a(ctx, kStayingPut);
    write_feature_series(a.stream(), registry, staying);
    outputs.push_back(a.commit());
  }
  write_manifest(ctx, {{"anchor", format_date(c.anchor)}, {"weeks", c.weeks}, {"standardized", true}},
                 {c.registry, c.colocation, c.staying_put}, outputs);
}

void stage_embed(const Context& ctx) {
  const auto& c = ctx.config;
  const DistrictRegistry registry = load_registry(c);
  Eigen::MatrixXd sci;
  {
    auto in = open_input(c.connectedness);
    sci = read_connectedness(in, registry);
  }
  const SocialEmbedding emb = embed_connectedness(sci, registry.coordinates());
  std::vector<fs::path> outputs;
  {
    Artifact a(ctx, kEmbedding);
    write_coordinates(a.stream(), registry, emb.coordinates);
    outputs.push_back(a.commit());
  }
  json rotation = json::array();
  for (int r = 0; r < 2; ++r) rotation.push_back({emb.transform.rotation(r, 0), emb.transform.rotation(r, 1)});
  json summary{{"kind", "embedding"},
               {"additive_constant", emb.distances.additive_constant},
               {"eigenvalues", {emb.mds.eigenvalues(0), emb.mds.eigenvalues(1)}},
               {"stress", emb.mds.stress},
               {"dilation", emb.transform.dilation},
               {"rotation", rotation},
               {"translation", {emb.transform.translation(0), emb.transform.translation(1)}},
               {"procrustes_residual", emb.transform.residual}};
  outputs.push_back(write_json(ctx, kEmbeddingSummary, summary));
  write_manifest(ctx, {{"dimensions", 2}}, {c.registry, c.connectedness}, outputs);
}

void stage_impute(const Context& ctx) {
  const auto& c = ctx.config;
  const DistrictRegistry registry = load_registry(c);
  const PopulationTable population = load_population(c, registry);
  const WeekCalendar calendar = calendar_of(c);
  std::vector<CaseRecord> cases;
  {
    auto in = open_input(c.line_list);
    cases = parse_line_list(in, &registry);
  }
  std::vector<CaseRecord> complete;
  for (const auto& r : cases)
    if (r.onset_date) complete.push_back(r);
  DelayOptions options;
  options.trend.basis_size = c.delay_trend_k;
  const DelayModel model = fit_delay_model(complete, options);
  const auto imputed = build_imputations(cases, model, c.imputations, c.seed, registry, population, calendar);

  std::vector<fs::path> outputs;
  json delay = to_json(model);
  delay["complete_cases"] = complete.size();
  delay["missing_onsets"] = cases.size() - complete.size();
  outputs.push_back(write_json(ctx, kDelayModel, delay));
  for (const auto& d : imputed) {
    Artifact a(ctx, imputation_path(d.k));
    write_line_list(a.stream(), d.cases, d.k);
    outputs.push_back(a.commit());
  }
  write_manifest(ctx,
                 {{"K", c.imputations}, {"seed", c.seed}, {"trend_k", c.delay_trend_k},
                  {"anchor", format_date(c.anchor)}, {"weeks", c.weeks}},
                 {c.registry, c.population, c.line_list}, outputs);
}

json model_parameters(const PipelineConfig& c) {
  const auto& f = c.frame;
  return {{"family", to_string(c.family)},
          {"profile_c", c.profile_c},
          {"fixed_c", c.fixed_c},
          {"thinplate_rank", f.thinplate_rank},
          {"terms",
           {{"gini", f.gini},
            {"staying_put", f.staying_put},
            {"coord_smooth", f.coord_smooth},
            {"social_smooth", f.social_smooth},
            {"district_effect", f.district_effect},
            {"last_week_effect", f.last_week_effect},
            {"autoregressive", f.autoregressive}}}};
}

void stage_fit(const Context& ctx) {
  const auto& c = ctx.config;
  const DistrictRegistry registry = load_registry(c);
  const PopulationTable population = load_population(c, registry);
  const WeekCalendar calendar = calendar_of(c);
  FeatureSeries gini, staying;
  Eigen::MatrixXd social;
  {
    auto in = open_input(ctx.out / kGini);
    gini = read_feature_series(in, registry, FeatureKind::gini);
  }
  {
    auto in = open_input(ctx.out / kStayingPut);
    staying = read_feature_series(in, registry, FeatureKind::staying_put);
  }
  {
    auto in = open_input(ctx.out / kEmbedding);
    social = read_coordinates(in, registry);
  }
  FrameCovariates covariates{&gini, &staying, registry.coordinates(), social};

  std::vector<SurveillancePanel> panels;
  std::vector<fs::path> inputs{c.registry, c.population, ctx.out / kGini, ctx.out / kStayingPut, ctx.out / kEmbedding};
  for (int k = 1; k <= c.imputations; ++k) {
    const fs::path path = ctx.out / imputation_path(k);
    auto in = open_input(path);
    const auto cases = parse_line_list(in, &registry);
    SurveillancePanel panel = aggregate_panel(cases, registry, calendar);
    compute_rates(panel, population);
    panels.push_back(std::move(panel));
    inputs.push_back(path);
  }

  FitOptions options;
  options.family = c.family;
  options.profile = c.profile_c;
  options.fixed_c = c.fixed_c;

  // Imputations are independent; each worker takes the next index. Results do not depend on the
  // number of workers.
  std::vector<std::optional<FitResult>> fits(panels.size());
  std::vector<std::exception_ptr> errors(panels.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < panels.size(); k = next++) {
      try {
        const ModelFrame frame(panels[k], population, covariates, c.frame);
        fits[k] = fit_model([&frame](double cc) { return frame.design(cc); }, frame.response(), options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(c.workers, static_cast<int>(panels.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw Error("imputation " + std::to_string(k + 1) + ": " + e.what());
    }
  }

  std::vector<fs::path> outputs;
  for (std::size_t k = 0; k < fits.size(); ++k) {
    json j = to_json(*fits[k]);
    j["imputation"] = k + 1;
    outputs.push_back(write_json(ctx, fit_path(static_cast<int>(k) + 1), j));
  }
  write_manifest(ctx, model_parameters(c), inputs, outputs);
}

std::vector<FitResult> load_fits(const Context& ctx, std::vector<fs::path>& inputs) {
  std::vector<FitResult> fits;
  for (int k = 1; k <= ctx.config.imputations; ++k) {
    const fs::path path = ctx.out / fit_path(k);
    auto in = open_input(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception&) {
      throw Error(path.string() + " is not valid JSON");
    }
    fits.push_back(fit_from_json(j));
    inputs.push_back(path);
  }
  return fits;
}

void stage_pool(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<fs::path> inputs;
  const auto fits = load_fits(ctx, inputs);
  const PooledEstimate pooled = pool_fits(fits, c.offset_pooling);
  json j = to_json(pooled);
  j["offset_pooling"] = c.offset_pooling == OffsetPooling::pooled ? "pooled" : "fixed";
  json caics = json::array();
  for (const auto& f : fits) caics.push_back(caic(f));
  j["caic"] = caics;
  std::vector<fs::path> outputs{write_json(ctx, kPooled, j)};

  if (c.frame.district_effect) {
    const DistrictRegistry registry = load_registry(c);
    inputs.push_back(c.registry);
    Eigen::VectorXd effects(static_cast<Eigen::Index>(registry.size()));
    for (std::size_t i = 0; i < registry.size(); ++i)
      effects(static_cast<Eigen::Index>(i)) = pooled.estimate(pooled.index_of("a." + std::to_string(i + 1)));
    Artifact a(ctx, kDistrictEffects);
    write_district_values(a.stream(), registry, effects);
    outputs.push_back(a.commit());
  }
  write_manifest(ctx, {{"K", c.imputations}, {"offset_pooling", j["offset_pooling"]}}, inputs, outputs);
}

void stage_diagnose(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<fs::path> inputs;
  const auto fits = load_fits(ctx, inputs);
  std::vector<Rootogram> roots;
  std::vector<std::vector<QQPoint>> qqs;
  json per = json::array();
  int max_count = c.rootogram_max;
  if (max_count < 0)
    for (const auto& f : fits) max_count = std::max(max_count, static_cast<int>(f.y.maxCoeff()));
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const FitResult& f = fits[k];
    if (f.y.size() == 0) throw Error("fit " + std::to_string(k + 1) + " carries no fitted values");
    const ResidualSet res = rq_residuals(f, c.seed, static_cast<int>(k));
    const KsResult ks = ks_test_normal(res.residuals);
    const PredictedObserved po = predicted_vs_observed(f);
    roots.push_back(rootogram(f, max_count));
    qqs.push_back(normal_qq(res.residuals));
    per.push_back({{"imputation", k + 1}, {"ks_statistic", ks.statistic}, {"ks_p_value", ks.p_value},
                   {"log_correlation", po.correlation}});
  }
  const Rootogram avg_root = average_rootograms(roots);
  const auto avg_qq = average_qq(qqs);
  std::size_t outliers = 0;
  for (const auto& p : avg_qq) outliers += p.outlier ? 1 : 0;

  std::vector<fs::path> outputs;
  {
    Artifact a(ctx, kQQ);
    write_qq(a.stream(), avg_qq);
    outputs.push_back(a.commit());
  }
  {
    Artifact a(ctx, kRootogram);
    write_rootogram(a.stream(), avg_root);
    outputs.push_back(a.commit());
  }
  json summary{{"kind", "diagnostics"}, {"imputations", per}, {"outliers", outliers}, {"observations", avg_qq.size()}};
  outputs.push_back(write_json(ctx, kDiagnostics, summary));
  write_manifest(ctx, {{"seed", c.seed}, {"rootogram_max", max_count}, {"outlier_threshold", 1.0}}, inputs, outputs);
}

json truth_json(const SimulatedData& data) {
  const auto& t = data.config.truth;
  json coefs = json::object();
  coefs[kMaleName] = t.male;
  coefs[kAgeName] = t.age;
  coefs[kAgeMaleName] = t.age_male;
  coefs[ModelFrame::ar_name()] = t.ar;
  for (Eigen::Index w = 1; w < t.week_effect.size(); ++w) coefs["week" + std::to_string(w + 1)] = t.week_effect(w);
  for (Eigen::Index w = 0; w < t.gini_effect.size(); ++w) coefs["gini:week" + std::to_string(w + 2)] = t.gini_effect(w);
  for (Eigen::Index w = 0; w < t.staying_put_effect.size(); ++w)
    coefs["staying_put:week" + std::to_string(w + 2)] = t.staying_put_effect(w);
  return {{"kind", "truth"},
          {"seed", data.config.seed},
          {"coefficients", coefs},
          {"c", t.c},
          {"dispersion", t.dispersion},
          {"tau_a", t.tau_a},
          {"tau_b", t.tau_b},
          {"week1_effect", t.week_effect(0)}};
}

void stage_simulate(const Context& ctx) {
  SimulationConfig cfg = ctx.config.simulate.config;
  cfg.seed = ctx.config.seed;
  const SimulatedData data = simulate_panel(cfg);
  const auto full = simulate_line_list(data, cfg.seed);
  const auto cases = apply_missingness(full, ctx.config.simulate.missing_fraction, cfg.seed,
                                       ctx.config.simulate.mar_strength);

  std::vector<fs::path> outputs;
  auto emit = [&](const fs::path& rel, auto&& writer) {
    Artifact a(ctx, rel);
    writer(a.stream());
    outputs.push_back(a.commit());
  };
  emit("districts.csv", [&](std::ostream& o) { write_registry(o, data.registry); });
  emit("population.csv", [&](std::ostream& o) { write_population(o, data.registry, data.population); });
  emit("cases.csv", [&](std::ostream& o) { write_line_list(o, cases); });
  emit("colocation.csv", [&](std::ostream& o) { write_colocation(o, data.registry, data.colocation); });
  emit("staying_put.csv", [&](std::ostream& o) { write_staying_put(o, data.registry, data.staying_put_daily); });
  emit("connectedness.csv", [&](std::ostream& o) { write_connectedness(o, data.registry, data.connectedness); });
  outputs.push_back(write_json(ctx, "truth.json", truth_json(data)));

  // A config that runs the pipeline on the simulated files; outputs go next to it.
  const auto& c = ctx.config;
  json config{{"data",
               {{"registry", "districts.csv"},
                {"population", "population.csv"},
                {"line_list", "cases.csv"},
                {"colocation", "colocation.csv"},
                {"staying_put", "staying_put.csv"},
                {"connectedness", "connectedness.csv"}}},
              {"calendar", {{"anchor", format_date(cfg.anchor)}, {"weeks", cfg.weeks}}},
              {"imputation", {{"K", c.imputations}, {"trend_k", c.delay_trend_k}}},
              {"model", model_parameters(c)},
              {"seed", c.seed},
              {"workers", c.workers},
              {"output", "results"}};
  config["model"]["offset_pooling"] = c.offset_pooling == OffsetPooling::pooled ? "pooled" : "fixed";
  outputs.push_back(write_json(ctx, "config.json", config));

  std::vector<fs::path> inputs;
  if (ctx.config_file) inputs.push_back(*ctx.config_file);
  json params{{"seed", cfg.seed},
              {"districts", cfg.districts},
              {"weeks", cfg.weeks},
              {"states", cfg.states},
              {"base_rate", cfg.base_rate},
              {"missing_fraction", c.simulate.missing_fraction},
              {"mar_strength", c.simulate.mar_strength},
              {"cases", cases.size()}};
  write_manifest(ctx, params, inputs, outputs);
}

void render_plot(const Context& ctx, const fs::path& artifact, PlotKind kind, const std::string& prefix,
                 const fs::path& rel, std::vector<fs::path>& outputs) {
  outputs.push_back(write_text(ctx, rel, render_svg(artifact, kind, prefix)));
}

void stage_plots(const Context& ctx) {
  std::vector<fs::path> outputs;
  std::vector<fs::path> inputs{ctx.out / kPooled, ctx.out / kQQ, ctx.out / kRootogram, ctx.out / kEmbedding};
  if (ctx.config.frame.gini)
    render_plot(ctx, ctx.out / kPooled, PlotKind::coefficient_path, "gini:", "plots/coefficient_path_gini.svg", outputs);
  if (ctx.config.frame.staying_put)
    render_plot(ctx, ctx.out / kPooled, PlotKind::coefficient_path, "staying_put:",
                "plots/coefficient_path_staying_put.svg", outputs);
  render_plot(ctx, ctx.out / kQQ, PlotKind::residual_qq, "", "plots/residual_qq.svg", outputs);
  render_plot(ctx, ctx.out / kRootogram, PlotKind::rootogram, "", "plots/rootogram.svg", outputs);
  if (ctx.config.frame.district_effect) {
    inputs.push_back(ctx.out / kDistrictEffects);
    render_plot(ctx, ctx.out / kDistrictEffects, PlotKind::map_effect, "", "plots/map_effect.svg", outputs);
  }
  render_plot(ctx, ctx.out / kEmbedding, PlotKind::embedding_scatter, "", "plots/embedding_scatter.svg", outputs);
  write_manifest(ctx, json::object(), inputs, outputs);
}

fs::path output_dir(const RunOptions& options, const PipelineConfig& config) {
  if (options.out) return *options.out;
  if (const char* env = std::getenv("EPIMODEL_OUT"); env && *env) return env;
  return config.output;
}

template <typename F>
void run_stage(Context& ctx, const std::string& stage, F&& body) {
  ctx.stage = stage;
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

void run_subcommand(const std::string& name, const RunOptions& options) {
  if (std::find(subcommand_names().begin(), subcommand_names().end(), name) == subcommand_names().end())
    throw StageError(name, "unknown subcommand '" + name + "'");
  Context ctx;
  run_stage(ctx, name, [&] {
    if (options.config) {
      ctx.config = PipelineConfig::load(*options.config);
      ctx.config_file = *options.config;
    } else if (name != "simulate" && name != "plot") {
      throw Error("--config is required for '" + name + "'");
    } else {
      ctx.config.base_dir = fs::current_path();
    }
    if (options.seed) ctx.config.seed = *options.seed;
    if (options.workers) ctx.config.workers = std::max(1, *options.workers);
    ctx.out = output_dir(options, ctx.config);
    fs::create_directories(ctx.out);
  });

  if (name == "features") return run_stage(ctx, name, [&] { stage_features(ctx); });
  if (name == "embed") return run_stage(ctx, name, [&] { stage_embed(ctx); });
  if (name == "impute") return run_stage(ctx, name, [&] { stage_impute(ctx); });
  if (name == "fit") return run_stage(ctx, name, [&] { stage_fit(ctx); });
  if (name == "pool") return run_stage(ctx, name, [&] { stage_pool(ctx); });
  if (name == "diagnose") return run_stage(ctx, name, [&] { stage_diagnose(ctx); });
  if (name == "simulate") return run_stage(ctx, name, [&] { stage_simulate(ctx); });
  if (name == "plot") {
    return run_stage(ctx, name, [&] {
      if (!options.artifact) throw Error("--artifact is required for 'plot'");
      const PlotKind kind = parse_plot_kind(options.kind);
      const fs::path rel = fs::path("plots") / (options.artifact->stem().string() + "_" + to_string(kind) + ".svg");
      write_text(ctx, rel, render_svg(*options.artifact, kind, options.prefix));
    });
  }
  // pipeline: every stage in order, each reading the previous stages' artifacts from disk.
  run_stage(ctx, "features", [&] { stage_features(ctx); });
  run_stage(ctx, "embed", [&] { stage_embed(ctx); });
  run_stage(ctx, "impute", [&] { stage_impute(ctx); });
  run_stage(ctx, "fit", [&] { stage_fit(ctx); });
  run_stage(ctx, "pool", [&] { stage_pool(ctx); });
  run_stage(ctx, "diagnose", [&] { stage_diagnose(ctx); });
  run_stage(ctx, "plots", [&] { stage_plots(ctx); });
}

}  // namespace epi
