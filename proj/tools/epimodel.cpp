#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <map>

#include "epi/pipeline.hpp"

namespace {

const std::map<std::string, std::string> kDescriptions{
    {"features", "weekly Gini index and staying-put series"},
    {"embed", "social embedding of the connectedness index"},
    {"impute", "delay model and K imputed case panels"},
    {"fit", "one model fit per imputed panel"},
    {"pool", "Rubin pooling across imputations"},
    {"diagnose", "residuals, rootogram and QQ data"},
    {"simulate", "synthetic study with a ready-to-run config"},
    {"pipeline", "every stage from features to plots"},
    {"plot", "SVG for one artifact"},
};

int fail(const std::string& stage, const std::string& message, int code = 1) {
  // One JSON object per line so that callers can parse failures.
  std::cerr << nlohmann::json{{"error", {{"stage", stage}, {"message", message}}}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Endemic-epidemic count models with mobility covariates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "epimodel 0.1.0");

  epi::RunOptions options;
  std::string config, out, artifact;
  std::uint64_t seed = 0;
  int workers = 1;

  for (const auto& name : epi::subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides EPIMODEL_OUT and the config)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--workers", workers, "concurrent imputation fits")->check(CLI::PositiveNumber);
    if (name == "plot") {
      sub->add_option("--artifact", artifact, "artifact to draw")->required();
      sub->add_option("--kind", options.kind, "coefficient-path, residual-qq, rootogram, map-effect or embedding-scatter")
          ->required();
      sub->add_option("--prefix", options.prefix, "coefficient name prefix for coefficient-path");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("cli", e.what(), e.get_exit_code() ? e.get_exit_code() : 2);
  }

  const CLI::App* sub = app.get_subcommands().front();
  auto given = [sub](const char* flag) {
    const CLI::Option* o = sub->get_option_no_throw(flag);
    return o != nullptr && o->count() > 0;
  };
  if (given("--config")) options.config = config;
  if (given("--out")) options.out = out;
  if (given("--seed")) options.seed = seed;
  if (given("--workers")) options.workers = workers;
  if (given("--artifact")) options.artifact = artifact;

  try {
    epi::run_subcommand(sub->get_name(), options);
  } catch (const epi::StageError& e) {
    return fail(e.stage(), e.what());
  } catch (const std::exception& e) {
    return fail(sub->get_name(), e.what());
  }
  return 0;
}
