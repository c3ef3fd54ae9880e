// lab <run|validate> <config> [--seed N] [--out DIR] [--threads N]

#include "molab/error.hpp"
#include "molab/lab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

using namespace molab;

namespace {

// An unreadable config is an I/O failure rather than an invalid one.
bool readable(const std::string &path) {
  try {
    (void)read_text_file(path);
    return true;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << "\n";
    return false;
  }
}

int report(const std::vector<std::string> &diagnostics) {
  for (const auto &d : diagnostics) std::cerr << "error: " << d << "\n";
  return diagnostics.empty() ? kExitOk : kExitInvalidConfig;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"molab experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;

  auto *run = app.add_subcommand("run", "Run an experiment config or rerun a manifest.json");
  run->add_option("config", config_path, "Config file or manifest.json")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out, "Output directory (default: $LAB_OUT/<config stem>)");
  run->add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto *validate = app.add_subcommand("validate", "Check a config against the experiment schema");
  validate->add_option("config", validate_path, "Config file or manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  const std::string &path = *validate ? validate_path : config_path;
  if (!readable(path)) return kExitIo;

  if (*validate) {
    ExperimentConfig config;
    const int code = report(validate_config_file(validate_path, &config));
    if (code == kExitOk) std::cout << "ok: " << config.experiment << "\n";
    return code;
  }

  ExperimentConfig config;
  if (const int code = report(validate_config_file(config_path, &config)); code != kExitOk) return code;
  RunOverrides ov;
  ov.seed = seed;
  ov.threads = threads;
  if (out) ov.out = *out;
  if (seed) config.seed = *seed;
  if (threads) config.threads = *threads;

  try {
    const auto dir = resolve_output_dir(config, ov);
    const auto rep = run_experiment(config, dir);
    std::cout << rep.experiment << ": wrote " << rep.output_dir.string() << " in " << rep.wall_time << " s\n";
    const auto summary = nlohmann::ordered_json::parse(rep.summary_json);
    for (const auto &[key, value] : summary.items())
      if (value.is_primitive()) std::cout << "  " << key << " = " << value.dump() << "\n";
    return kExitOk;
  } catch (const InvalidInput &e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const NonSelfAdjointRisk &e) {
    std::cerr << "non-self-adjoint risk: " << e.what() << "\n";
    return kExitSolver;
  } catch (const SolverError &e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
