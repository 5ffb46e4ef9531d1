#include "epi/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "epi/csv.hpp"
#include "epi/error.hpp"

namespace epi {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::size_t district_at(const DistrictRegistry& registry, const std::string& id, std::size_t line) {
  const auto i = registry.find(id);
  if (!i) throw ParseError(line, "unknown district '" + id + "'");
  return *i;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_inf(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::vector<Eigen::MatrixXd> read_colocation(std::istream& in, const DistrictRegistry& registry) {
  CsvReader reader(in);
  const auto cw = reader.column("week"), cs = reader.column("src_district"), cd = reader.column("dst_district"),
             cp = reader.column("probability");
  const auto n = static_cast<Eigen::Index>(registry.size());
  std::vector<Eigen::MatrixXd> weeks;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const long long w = parse_integer(f[cw]);
    if (w < 1) throw ParseError(reader.line(), "week must be at least 1");
    const double p = parse_double(f[cp]);
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParseError(reader.line(), "probability must be finite and nonnegative");
    while (static_cast<long long>(weeks.size()) < w) weeks.push_back(Eigen::MatrixXd::Zero(n, n));
    const auto i = static_cast<Eigen::Index>(district_at(registry, f[cs], reader.line()));
    const auto j = static_cast<Eigen::Index>(district_at(registry, f[cd], reader.line()));
    weeks[static_cast<std::size_t>(w - 1)](i, j) = p;
  }
  return weeks;
}

void write_colocation(std::ostream& out, const DistrictRegistry& registry, const std::vector<Eigen::MatrixXd>& weeks) {
  out << "week,src_district,dst_district,probability\n";
  for (std::size_t w = 0; w < weeks.size(); ++w)
    for (Eigen::Index i = 0; i < weeks[w].rows(); ++i)
      for (Eigen::Index j = 0; j < weeks[w].cols(); ++j)
        if (weeks[w](i, j) != 0.0)
          out << w + 1 << ',' << registry[static_cast<std::size_t>(i)].id << ',' << registry[static_cast<std::size_t>(j)].id
              << ',' << format_number(weeks[w](i, j)) << '\n';
}

std::vector<DailyValue> read_staying_put(std::istream& in, const DistrictRegistry& registry) {
  CsvReader reader(in);
  const auto cdate = reader.column("date"), cd = reader.column("district_id"), cf = reader.column("fraction");
  std::vector<DailyValue> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    DailyValue v;
    try {
      v.day = parse_date(f[cdate]);
    } catch (const Error& e) {
      throw ParseError(reader.line(), e.what());
    }
    v.district = district_at(registry, f[cd], reader.line());
    v.value = parse_double(f[cf]);
    out.push_back(v);
  }
  return out;
}

void write_staying_put(std::ostream& out, const DistrictRegistry& registry, const std::vector<DailyValue>& daily) {
  out << "date,district_id,fraction\n";
  for (const auto& v : daily)
    out << format_date(v.day) << ',' << registry[v.district].id << ',' << format_number(v.value) << '\n';
}

Eigen::MatrixXd read_connectedness(std::istream& in, const DistrictRegistry& registry) {
  CsvReader reader(in);
  const auto cs = reader.column("src_district"), cd = reader.column("dst_district"), cv = reader.column("sci");
  const auto n = static_cast<Eigen::Index>(registry.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto i = static_cast<Eigen::Index>(district_at(registry, f[cs], reader.line()));
    const auto j = static_cast<Eigen::Index>(district_at(registry, f[cd], reader.line()));
    const double v = parse_double(f[cv]);
    m(i, j) = v;
    if (m(j, i) == 0.0) m(j, i) = v;
  }
  return m;
}

void write_connectedness(std::ostream& out, const DistrictRegistry& registry, const Eigen::MatrixXd& sci) {
  out << "src_district,dst_district,sci\n";
  for (Eigen::Index i = 0; i < sci.rows(); ++i)
    for (Eigen::Index j = i + 1; j < sci.cols(); ++j)
      out << registry[static_cast<std::size_t>(i)].id << ',' << registry[static_cast<std::size_t>(j)].id << ','
          << format_number(sci(i, j)) << '\n';
}

FeatureSeries read_feature_series(std::istream& in, const DistrictRegistry& registry, FeatureKind kind) {
  CsvReader reader(in);
  const auto cd = reader.column("district_id"), cw = reader.column("week"), cv = reader.column("value");
  std::vector<std::tuple<std::size_t, long long, double>> entries;
  long long weeks = 0;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const long long w = parse_integer(f[cw]);
    if (w < 1) throw ParseError(reader.line(), "week must be at least 1");
    entries.emplace_back(district_at(registry, f[cd], reader.line()), w, parse_double(f[cv]));
    weeks = std::max(weeks, w);
  }
  FeatureSeries s;
  s.kind = kind;
  s.standardized = true;
  s.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(registry.size()), static_cast<Eigen::Index>(weeks),
                                       std::numeric_limits<double>::quiet_NaN());
  for (const auto& [d, w, v] : entries) s.values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(w - 1)) = v;
  return s;
}

void write_feature_series(std::ostream& out, const DistrictRegistry& registry, const FeatureSeries& series) {
  out << "district_id,week,value\n";
  for (Eigen::Index w = 0; w < series.values.cols(); ++w)
    for (Eigen::Index i = 0; i < series.values.rows(); ++i)
      out << registry[static_cast<std::size_t>(i)].id << ',' << w + 1 << ',' << format_number(series.values(i, w)) << '\n';
}

Eigen::MatrixXd read_coordinates(std::istream& in, const DistrictRegistry& registry) {
  CsvReader reader(in);
  const auto cd = reader.column("district_id"), c1 = reader.column("dim1"), c2 = reader.column("dim2");
  const auto n = static_cast<Eigen::Index>(registry.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, 2, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto i = static_cast<Eigen::Index>(district_at(registry, f[cd], reader.line()));
    m(i, 0) = parse_double(f[c1]);
    m(i, 1) = parse_double(f[c2]);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(m(i, 0))) throw Error("coordinates missing for district " + registry[static_cast<std::size_t>(i)].id);
  return m;
}

void write_coordinates(std::ostream& out, const DistrictRegistry& registry, const Eigen::MatrixXd& coords) {
  out << "district_id,dim1,dim2\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    out << registry[static_cast<std::size_t>(i)].id << ',' << format_number(coords(i, 0)) << ','
        << format_number(coords(i, 1)) << '\n';
}

json to_json(const FitResult& fit, bool include_fitted) {
  json j;
  j["kind"] = "fit";
  j["family"] = to_string(fit.family);
  json coefs = json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    coefs.push_back({{"name", fit.names[i]}, {"estimate", fit.theta(k)}, {"se", number(fit.se(k))}});
  }
  j["coefficients"] = std::move(coefs);
  j["covariance"] = matrix_json(fit.covariance);
  json smooth = json::array();
  for (std::size_t i = 0; i < fit.smooth_labels.size(); ++i)
    smooth.push_back({{"term", fit.smooth_labels[i]}, {"lambda", fit.lambda(static_cast<Eigen::Index>(i))}});
  j["smoothing"] = std::move(smooth);
  j["dispersion"] = fit.dispersion;
  j["c"] = {{"estimate", fit.c}, {"se", number(fit.c_se)}, {"profiled", fit.c_profiled}};
  json edf = json::array();
  for (std::size_t i = 0; i < fit.term_labels.size(); ++i)
    edf.push_back({{"term", fit.term_labels[i]}, {"edf", fit.term_edf[i]}});
  j["edf"] = std::move(edf);
  j["edf_total"] = fit.edf_total;
  j["loglik"] = fit.loglik;
  j["reml"] = fit.reml;
  j["caic"] = caic(fit);
  j["converged"] = fit.converged;
  json profile = json::array();
  for (const auto& p : fit.profile) profile.push_back({{"c", p.c}, {"value", p.value}});
  j["profile"] = std::move(profile);
  if (include_fitted) j["fitted"] = {{"y", vector_json(fit.y)}, {"mu", vector_json(fit.mu)}};
  return j;
}

FitResult fit_from_json(const json& j) {
  if (j.value("kind", "") != "fit") throw Error("artifact is not a fit result");
  FitResult fit;
  fit.family = parse_family(j.at("family").get<std::string>());
  const auto& coefs = j.at("coefficients");
  fit.theta.resize(static_cast<Eigen::Index>(coefs.size()));
  fit.se.resize(fit.theta.size());
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    fit.names.push_back(coefs[i].at("name").get<std::string>());
    fit.theta(static_cast<Eigen::Index>(i)) = coefs[i].at("estimate").get<double>();
    fit.se(static_cast<Eigen::Index>(i)) = number_or_inf(coefs[i].at("se"));
  }
  fit.covariance = matrix_from(j.at("covariance"));
  const auto& smooth = j.at("smoothing");
  fit.lambda.resize(static_cast<Eigen::Index>(smooth.size()));
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    fit.smooth_labels.push_back(smooth[i].at("term").get<std::string>());
    fit.lambda(static_cast<Eigen::Index>(i)) = smooth[i].at("lambda").get<double>();
  }
  fit.dispersion = j.at("dispersion").get<double>();
  fit.c = j.at("c").at("estimate").get<double>();
  fit.c_se = number_or_inf(j.at("c").at("se"));
  fit.c_profiled = j.at("c").at("profiled").get<bool>();
  for (const auto& e : j.at("edf")) {
    fit.term_labels.push_back(e.at("term").get<std::string>());
    fit.term_edf.push_back(e.at("edf").get<double>());
  }
  fit.edf_total = j.at("edf_total").get<double>();
  fit.loglik = j.at("loglik").get<double>();
  fit.reml = j.at("reml").get<double>();
  fit.converged = j.at("converged").get<bool>();
  for (const auto& p : j.at("profile")) fit.profile.push_back({p.at("c").get<double>(), p.at("value").get<double>()});
  if (j.contains("fitted")) {
    fit.y = vector_from(j["fitted"].at("y"));
    fit.mu = vector_from(j["fitted"].at("mu"));
  }
  return fit;
}

json to_json(const PooledEstimate& pooled) {
  json j;
  j["kind"] = "pooled";
  j["imputations"] = pooled.K;
  json coefs = json::array();
  for (std::size_t i = 0; i < pooled.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    coefs.push_back({{"name", pooled.names[i]},
                     {"estimate", pooled.estimate(k)},
                     {"se", pooled.se(k)},
                     {"within", pooled.within(k, k)},
                     {"between", pooled.between(k, k)}});
  }
  j["coefficients"] = std::move(coefs);
  return j;
}

json to_json(const DelayModel& model) {
  json j;
  j["kind"] = "delay_model";
  j["loglik"] = model.loglik();
  j["cycles"] = model.cycles();
  json mu = json::array(), sigma = json::array();
  for (std::size_t i = 0; i < model.names().size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    mu.push_back({{"name", model.names()[i]},
                  {"estimate", model.theta_mu()(k)},
                  {"se", number(std::sqrt(std::max(0.0, model.covariance_mu()(k, k))))}});
    sigma.push_back({{"name", model.names()[i]},
                     {"estimate", model.theta_sigma()(k)},
                     {"se", number(std::sqrt(std::max(0.0, model.covariance_sigma()(k, k))))}});
  }
  j["mu"] = std::move(mu);
  j["sigma"] = std::move(sigma);
  j["lambda_mu"] = vector_json(model.lambda_mu());
  j["lambda_sigma"] = vector_json(model.lambda_sigma());
  return j;
}

void write_rootogram(std::ostream& out, const Rootogram& r) {
  out << "count,observed,expected,sqrt_observed,sqrt_expected\n";
  for (Eigen::Index v = 0; v < r.observed.size(); ++v)
    out << v << ',' << format_number(r.observed(v)) << ',' << format_number(r.expected(v)) << ','
        << format_number(std::sqrt(r.observed(v))) << ',' << format_number(std::sqrt(r.expected(v))) << '\n';
}

Rootogram read_rootogram(std::istream& in) {
  CsvReader reader(in);
  const auto cc = reader.column("count"), co = reader.column("observed"), ce = reader.column("expected");
  std::map<long long, std::pair<double, double>> rows;
  std::vector<std::string> f;
  while (reader.next(f)) rows[parse_integer(f[cc])] = {parse_double(f[co]), parse_double(f[ce])};
  Rootogram r;
  const Eigen::Index len = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.rbegin()->first + 1);
  r.observed = Eigen::VectorXd::Zero(len);
  r.expected = Eigen::VectorXd::Zero(len);
  for (const auto& [v, oe] : rows) {
    if (v < 0) throw Error("negative count in rootogram");
    r.observed(static_cast<Eigen::Index>(v)) = oe.first;
    r.expected(static_cast<Eigen::Index>(v)) = oe.second;
  }
  return r;
}

void write_qq(std::ostream& out, const std::vector<QQPoint>& qq) {
  out << "theoretical,sample,outlier\n";
  for (const auto& p : qq) out << format_number(p.theoretical) << ',' << format_number(p.sample) << ',' << (p.outlier ? 1 : 0) << '\n';
}

std::vector<QQPoint> read_qq(std::istream& in) {
  CsvReader reader(in);
  const auto ct = reader.column("theoretical"), cs = reader.column("sample"), co = reader.column("outlier");
  std::vector<QQPoint> out;
  std::vector<std::string> f;
  while (reader.next(f)) out.push_back({parse_double(f[ct]), parse_double(f[cs]), parse_integer(f[co]) != 0});
  return out;
}

void write_district_values(std::ostream& out, const DistrictRegistry& registry, const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != registry.size()) throw Error("one value per district expected");
  out << "district_id,lon,lat,value\n";
  for (std::size_t i = 0; i < registry.size(); ++i)
    out << registry[i].id << ',' << format_number(registry[i].lon) << ',' << format_number(registry[i].lat) << ','
        << format_number(values(static_cast<Eigen::Index>(i))) << '\n';
}

DistrictValues read_district_values(std::istream& in) {
  CsvReader reader(in);
  const auto ci = reader.column("district_id"), cx = reader.column("lon"), cy = reader.column("lat"),
             cv = reader.column("value");
  std::vector<std::string> f;
  std::vector<double> xs, ys, vs;
  DistrictValues out;
  while (reader.next(f)) {
    out.ids.push_back(f[ci]);
    xs.push_back(parse_double(f[cx]));
    ys.push_back(parse_double(f[cy]));
    vs.push_back(parse_double(f[cv]));
  }
  const auto n = static_cast<Eigen::Index>(out.ids.size());
  out.coordinates.resize(n, 2);
  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.coordinates.row(i) << xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(i)];
    out.values(i) = vs[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace epi
