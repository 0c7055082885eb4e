#pragma once

// Batch experiments: JSON configuration, assumption checks, seeded runs with
// geometric checkpoints, the diagnostic suite, and CSV/JSON artifacts.

#include "sadi/games.hpp"
#include "sadi/iterate_engine.hpp"
#include "sadi/occupation.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sadi {

/// Malformed configuration: missing fields, wrong types, unknown names.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading or writing artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DiagnosticsToggles {
  bool closed_residual = true;
  bool oscillation = true;
  bool velocity_moment = true;
  bool residence = true;
  bool essential_accumulation = true;
  bool centroid_gap = true;
  bool circulation = true;

  double q = 2.0;
  double cell_size = 0.02;
  double threshold = 0.05;
  int bank_degree = 2;
  int bank_bumps = 3;
  std::uint64_t bank_seed = 7;
  int probe_count = 11;
  std::vector<Vector> probes;  // explicit probes override probe_count
};

struct ExperimentConfig {
  enum class Problem { sgd, shb, fictitious_play, custom_map };

  std::string name = "experiment";
  Problem problem = Problem::sgd;
  std::string function = "abs";  // sgd / shb
  std::string map_name;          // custom_map
  Eigen::Index dimension = 1;
  Vector x0;                     // sgd / custom_map: x0; shb: q0; fictitious play: ξ0
  Vector p0;                     // shb only
  double c = 1.0;                // shb only
  std::optional<Game> game;      // fictitious play only
  std::string game_name;
  std::vector<Vector> nash;      // known equilibria for the distance field

  StepSchedule schedule = StepSchedule::power(1.0, 0.6);  // ε_i, or α_i for shb
  StepSchedule beta_schedule = StepSchedule::power(1.0, 0.6);
  NoiseModel noise = NoiseModel::none();
  DeltaSchedule delta = DeltaSchedule::zero();
  SelectionRule rule = SelectionRule::random_hull;

  std::int64_t N = 10000;
  double guard_R = 1e3;
  std::vector<std::uint64_t> seeds{1};
  std::int64_t checkpoint_base = 1000;
  bool strict_boundedness = false;
  bool allow_nonconforming = false;
  DiagnosticsToggles diagnostics;
  std::string output_dir = "out";

  nlohmann::json source;  // the parsed document, echoed into artifacts
};

/// Parses the document. Throws ConfigError on schema problems.
[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& doc);

/// Assumption and structural checks on a parsed config; each entry names the
/// violated assumption. Empty means every declared assumption holds.
[[nodiscard]] std::vector<std::string> validate_config(const ExperimentConfig& config);
/// Parse errors are reported as violations instead of thrown.
[[nodiscard]] std::vector<std::string> validate_config(const nlohmann::json& doc);

/// N_0·2^k for k ≥ 0 while ≤ N, then N itself.
[[nodiscard]] std::vector<std::int64_t> checkpoint_schedule(std::int64_t N0, std::int64_t N);

/// Everything needed to recompute checkpoint diagnostics from a stored measure.
struct DiagnosticContext {
  DiagnosticsToggles toggles;
  TestFunctionBank bank;
  std::optional<SetValuedMap> H;
  std::function<Vector(const Vector&)> circulation_field;  // empty: not reported
  std::vector<Vector> probes;
};

[[nodiscard]] DiagnosticContext make_context(const ExperimentConfig& config, const Vector& box_lo,
                                             const Vector& box_hi, const Vector& final_state);

struct CheckpointDiagnostics {
  std::int64_t iteration = 0;
  double total_weight = 0.0;
  std::map<std::string, double> closed_residuals;
  double max_abs_closed_residual = 0.0;
  std::map<std::string, OscillationStatistic> oscillation;
  std::optional<double> velocity_moment;
  std::vector<std::pair<CellKey, double>> residence;  // cells with τ ≥ threshold
  std::optional<double> bandwidth;
  std::optional<double> centroid_gap;
  std::optional<double> circulation;

  [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] CheckpointDiagnostics compute_checkpoint_diagnostics(const OccupationMeasure& mu,
                                                                   std::int64_t iteration,
                                                                   const DiagnosticContext& context);

struct RunReport {
  std::uint64_t seed = 0;
  RunStatus status;
  std::int64_t steps = 0;
  std::vector<CheckpointDiagnostics> checkpoints;
  std::vector<AccumulationCell> accumulation_cells;
  /// Per checkpoint and bank function: interpolated residual and interpolation bound.
  nlohmann::json trajectory_checks;
  Vector final_state;
  std::optional<double> nash_distance_inf;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct DiagnosticsReport {
  std::string name;
  std::string config_hash;
  std::vector<RunReport> runs;
  [[nodiscard]] double bounded_fraction() const;
  [[nodiscard]] bool any_escaped() const;
};

struct RunRequest {
  std::optional<std::filesystem::path> output_dir;     // overrides config
  std::optional<std::vector<std::uint64_t>> seeds;     // overrides config
  int jobs = 1;
};

/// Runs every seed (concurrently with `jobs` workers) and writes
/// <out>/<name>/<seed>/{trajectory.csv, checkpoint_<N>.csv, checkpoint_<N>.json, summary.json}
/// and <out>/<name>/manifest.json. Throws IoError on filesystem failures.
[[nodiscard]] DiagnosticsReport run_experiment(const ExperimentConfig& config, const RunRequest& request = {});

/// Runs one seed in memory without writing artifacts.
[[nodiscard]] RunReport run_single(const ExperimentConfig& config, std::uint64_t seed,
                                   const std::filesystem::path* seed_dir = nullptr);

/// FNV-1a 64 of the canonical (sorted-key) dump, as 16 hex digits.
[[nodiscard]] std::string config_hash(const nlohmann::json& doc);

// Checkpoint files: CSV with header j,x0..x{n-1},v0..v{n-1},weight and a JSON
// sidecar {dimension, total_weight, iteration, seed, ...}.
void write_checkpoint(const std::filesystem::path& csv_path, const OccupationMeasure& mu,
                      std::int64_t first_index, const nlohmann::json& sidecar);
struct LoadedCheckpoint {
  OccupationMeasure measure;
  nlohmann::json sidecar;
};
[[nodiscard]] LoadedCheckpoint read_checkpoint(const std::filesystem::path& csv_path);
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Recomputes the checkpoint diagnostics from a checkpoint file and its sidecar.
[[nodiscard]] CheckpointDiagnostics diagnose_checkpoint(const std::filesystem::path& csv_path);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace sadi
