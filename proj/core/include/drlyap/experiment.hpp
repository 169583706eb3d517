#pragma once

// End-to-end experiment pipelines driven by a JSON config: baseline and DR
// training, certification and closed-loop comparison.

#include <drlyap/simulate.hpp>
#include <drlyap/training.hpp>
#include <drlyap/verify.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace drlyap {

enum class WarmStart { None, Nominal, Baseline };

struct ExperimentConfig {
  std::string name = "experiment";
  std::string system = "pendulum";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  std::filesystem::path base_dir = ".";  // relative file references resolve here

  TrainConfig train;
  int baseline_epochs = 2000;
  int warm_start_epochs = 2000;
  WarmStart warm_start = WarmStart::Nominal;

  // Uncertainty samples: explicit file, or N draws from the distribution.
  std::optional<std::filesystem::path> samples_file;
  std::optional<std::uint64_t> uncertainty_seed;  // defaults to seed + 1
  UncertaintyDistribution distribution;
  std::optional<double> support_bound;

  Vec xi_test;
  int n_inits = 10;
  Box init_region;  // original coordinates
  std::optional<std::uint64_t> test_seed;  // defaults to seed + 2
  RolloutOptions rollout;
  std::vector<Vec> probe_states;  // original coordinates, checked for V monotonicity

  VerifyOptions verify;

  std::uint64_t resolved_uncertainty_seed() const;
  std::uint64_t resolved_test_seed() const;

  nlohmann::json to_json() const;
  /// Parses a config; a "preset" key starts from that preset and the
  /// remaining keys override it. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = ".");
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// "pendulum-dr" or "mountain-car-dr".
ExperimentConfig experiment_preset(const std::string& name);
std::vector<std::string> preset_names();

/// FNV-1a 64-bit hash of the canonical config JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Builds the ambiguity set: loads samples_file or draws N samples.
AmbiguitySpec build_ambiguity(const ExperimentConfig& config, const UncertainSystem& sys);

struct TrainedPairs {
  LyapunovPair baseline;
  LyapunovPair dr;
  TrainResult baseline_run;
  std::optional<TrainResult> warm_run;
  TrainResult dr_run;
  AmbiguitySpec spec;
};

/// Stages: baseline (nominal loss on the sample-mean system), optional
/// nominal warm start, then the configured DR loss.
TrainedPairs train_pairs(const ExperimentConfig& config);

struct MonotonicityStats {
  std::size_t steps_outside = 0;    // steps starting outside the delta-ball
  std::size_t nonincreasing = 0;
  double max_increase = 0.0;
  double V_max = 0.0;

  double fraction() const {
    return steps_outside == 0 ? 1.0
                              : static_cast<double>(nonincreasing) / steps_outside;
  }
};

MonotonicityStats monotonicity(const Trajectory& traj, double delta);

/// Checks of a single repro run: separation, monotonicity and chance.
struct ReproOutcome {
  ExperimentSummary summary;
  CertificateReport report;
  std::vector<Trajectory> probes;
  std::vector<MonotonicityStats> probe_stats;
  TrainedPairs pairs;
  std::vector<std::filesystem::path> outputs;  // relative to output_dir
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(ExperimentConfig& config, const RunOverrides& overrides);

/// Full pipeline in memory plus file outputs under config.output_dir.
ReproOutcome run_repro(const ExperimentConfig& config, bool write_files = true);

/// Summary JSON (deterministic: no timings).
nlohmann::json summary_to_json(const ExperimentSummary& summary);

// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

int cmd_train(const std::filesystem::path& config_path, const RunOverrides& overrides,
              std::ostream& out, std::ostream& err);
int cmd_verify(const std::filesystem::path& pair_header, const std::filesystem::path& config_path,
               const RunOverrides& overrides, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::filesystem::path& baseline_header,
                 const std::filesystem::path& dr_header, const std::filesystem::path& config_path,
                 const RunOverrides& overrides, std::ostream& out, std::ostream& err);
/// `experiment` is a preset name or a config path.
int cmd_repro(const std::string& experiment, const RunOverrides& overrides, std::ostream& out,
              std::ostream& err);

}  // namespace drlyap
