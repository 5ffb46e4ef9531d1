#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "epi/dates.hpp"
#include "epi/delay.hpp"
#include "epi/error.hpp"
#include "epi/likelihood.hpp"
#include "epi/model_frame.hpp"
#include "epi/pooling.hpp"
#include "epi/simulate.hpp"

namespace epi {

// Failure of one stage; the CLI prints it as a single JSON line.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message) : Error(message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct SimulateSettings {
  SimulationConfig config;
  double missing_fraction = 0.3;
  double mar_strength = 0.5;
};

// Parsed configuration file. Relative paths are resolved against the directory of the file.
struct PipelineConfig {
  std::filesystem::path base_dir;
  std::filesystem::path registry, population, line_list, colocation, staying_put, connectedness;
  Date anchor = parse_date("2020-03-03");
  int weeks = 0;
  int imputations = kDefaultImputations;
  int delay_trend_k = 20;
  FamilyKind family = FamilyKind::negative_binomial;
  FrameOptions frame;
  bool profile_c = true;
  double fixed_c = 0.5;
  OffsetPooling offset_pooling = OffsetPooling::pooled;
  int rootogram_max = -1;
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path output = "out";
  SimulateSettings simulate;

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& file);
};

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  // plot only
  std::optional<std::filesystem::path> artifact;
  std::string kind;
  std::string prefix = "gini:";
};

const std::vector<std::string>& subcommand_names();

// Runs one subcommand. Output directory precedence: --out, then EPIMODEL_OUT, then the config's
// "output" entry. Throws StageError naming the failing stage.
void run_subcommand(const std::string& name, const RunOptions& options);

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace epi
