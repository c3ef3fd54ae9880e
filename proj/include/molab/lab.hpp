#pragma once

// Experiment runner: flat `key = value` configs, schema validation, and
// reproducible result files (results.csv, summary.json, manifest.json).

#include "molab/io.hpp"
#include "molab/system_model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace molab {

inline constexpr const char *kArtifactVersion = "0.1.0";

const std::vector<std::string> &experiment_names();

struct ExperimentConfig {
  std::string experiment;
  /// Effective entries in file order; the system is always inline (nucleus,
  /// electrons, reference_mass) so a manifest alone reproduces the run.
  std::vector<KeyValueLine> entries;
  std::uint64_t seed = 42;
  int threads = 1;
  std::optional<std::string> output;
  std::filesystem::path source;

  /// Last value of a key, if present.
  std::optional<std::string> get(const std::string &key) const;
  MolecularSystem system() const;
  /// Config text equivalent to `entries`.
  std::string text() const;
};

/// Schema check without running. Empty means runnable; `parsed` receives the
/// config when it is. Relative `system` paths resolve against `base_dir`.
std::vector<std::string> validate_config_text(const std::string &text, const std::filesystem::path &base_dir,
                                              ExperimentConfig *parsed = nullptr);

/// Reads a config file or a manifest.json written by a previous run. An
/// unreadable file yields a single fatal diagnostic.
std::vector<std::string> validate_config_file(const std::filesystem::path &path, ExperimentConfig *parsed = nullptr);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::filesystem::path> out;
};

/// Output directory: --out, else the config's `output` (relative to the root),
/// else <root>/<config stem>. The root is $LAB_OUT or ./lab_out.
std::filesystem::path resolve_output_dir(const ExperimentConfig &config, const RunOverrides &overrides);

struct ExperimentReport {
  std::string experiment;
  std::string results_csv;
  std::string summary_json;
  std::map<std::string, std::string> extra_files; // name -> contents
  double wall_time = 0.0;
  std::filesystem::path output_dir;
};

/// Runs the experiment and writes results.csv, summary.json, any extra files
/// and manifest.json into `output_dir`.
ExperimentReport run_experiment(const ExperimentConfig &config, const std::filesystem::path &output_dir);

/// Exit codes of the command-line runner.
enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitInvalidConfig = 2, kExitSolver = 3, kExitIo = 4 };

} // namespace molab
