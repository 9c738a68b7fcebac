#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ust3d/parallel.hpp"

namespace ust3d {

enum class Experiment {
  kVerifyOracle,
  kVerifyBijection,
  kDharCheck,
  kAlpha,
  kBeta,
  kPastTails,
  kZeroTreeTails,
  kAvalancheTails,
  kFirstWaveRatio,
};

std::string to_string(Experiment e);
std::optional<Experiment> experiment_from_string(const std::string& s);
const std::vector<std::string>& experiment_names();

inline constexpr const char* kOutputDirEnv = "UST3D_OUTPUT_DIR";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitValidationFailure = 3,
  kExitResourceLimit = 4,
};

/// Everything needed to reproduce a run. Zero / empty fields mean "use the
/// experiment default", which is resolved at run time and recorded in the
/// manifest.
struct RunConfig {
  Experiment experiment = Experiment::kVerifyOracle;
  int dimension = 3;
  std::int32_t box_radius = 0;
  std::vector<std::int64_t> thresholds;
  std::int64_t reps = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir;
  double fit_min = 0.0;
  double fit_max = 0.0;
  double max_seconds = 0.0;  ///< wall-clock budget, 0 = none

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Invalid configuration; `line`/`column` are 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Strict YAML mapping: unknown keys are errors, `experiment` is required.
RunConfig config_from_yaml(const std::string& text);
RunConfig config_from_file(const std::filesystem::path& path);
std::string config_to_yaml(const RunConfig& c);

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);

/// Throws ConfigError on positive-reps, ascending-thresholds and similar
/// precondition failures.
void validate(const RunConfig& c);

/// Output directory: config value, else $UST3D_OUTPUT_DIR, else
/// "ust3d-runs/<experiment>-<seed>".
std::filesystem::path resolve_output_dir(const RunConfig& c);

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::filesystem::path output_dir;
  nlohmann::json report;
};

/// Runs one experiment and writes manifest.json, curve CSVs, fits.json and
/// plot.gp (as applicable) into the output directory. Config errors produce
/// no artifacts. A run stopped by `control` is written with status
/// "incomplete".
RunResult run(const RunConfig& config, const RunControl& control = {});

/// Command-line entry point.
int cli_main(int argc, char** argv);

}  // namespace ust3d
