#pragma once

// Driver layer behind the `gramstab` executable: JSON run configurations and
// the four subcommands. Every command writes its files into an output
// directory and returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gramstab/closedloop.hpp"
#include "gramstab/error.hpp"

namespace gramstab::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kNotObservable = 2,
  kIllConditioned = 3,
  kDecayViolated = 4,
  kVerificationFailed = 5,
};

int exit_code_for(ErrorKind kind);

struct RunConfig {
  SystemModel system;
  StabilizerConfig stabilizer;  ///< omega, T, quadrature and guards
  std::optional<double> horizon;  ///< simulation length; defaults to 10 / omega
  StepMode integrator = StepMode::kRk4;
  std::optional<Vector> x0;     ///< defaults to the first basis vector
  Tolerances tolerances;
  std::vector<double> omegas;   ///< sweep values, sorted ascending
  std::uint64_t seed = 0;
  int draws = 10;
  int decay_states = 20;
  int decay_samples = 1000;
};

/// Parses a configuration document. Relative matrix file paths resolve
/// against `base_dir`. Throws Error(kConfig) on any schema violation.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  /// Replaces C by 0 before verification; exercises the failure path.
  bool zero_c = false;
};

/// gramian.json: lambda, C, M, L and the diagnostics c1, c2, cond_lambda.
int cmd_gramian(const RunConfig& cfg, const CommandOptions& opts);

/// trajectory.csv: t, x_1..x_n, omega_norm, bound; summary.json.
int cmd_stabilize(const RunConfig& cfg, const CommandOptions& opts);

/// report.json: residuals, tolerances, passed, failed, seed.
int cmd_verify(const RunConfig& cfg, const CommandOptions& opts);

/// sweep.csv: omega, T_omega, cond_lambda, c1, c2, riccati_residual,
/// fitted_rate, decay_margin, one row per omega in ascending order.
int cmd_sweep(const RunConfig& cfg, const CommandOptions& opts);

/// Loads the configuration, dispatches to the named command and converts
/// library errors into exit codes. `seed` overrides the configured seed.
int run(const std::string& command, const std::filesystem::path& config_path,
        const CommandOptions& opts, std::optional<std::uint64_t> seed);

}  // namespace gramstab::cli
