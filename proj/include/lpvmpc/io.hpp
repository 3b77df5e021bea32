#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/mpc.hpp"
#include "lpvmpc/plant.hpp"
#include "lpvmpc/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lpvmpc {

// Float formatting used by every CSV writer: 17 significant digits.
std::string format_double(double value);

/// Dataset as CSV (k, u1.., y1..) plus a JSON sidecar with Ts, seed, noise
/// and split indices.
void write_dataset(const Dataset& data, const std::filesystem::path& csv, const std::filesystem::path& meta,
                   std::optional<double> snr_db = std::nullopt);
/// Reads a dataset; without a sidecar the default 60/20/20 split is used.
Dataset read_dataset(const std::filesystem::path& csv, const std::filesystem::path& meta = {});
/// Sidecar path next to a CSV file: data.csv -> data.json.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Columns: k, r, y, u, xhat1..xhatnx, inner_iters, conv_residual,
/// t_convert_ms, t_qp_ms, t_total_ms (multi-channel r/y/u get a suffix).
void write_trajectory(const TrajectoryLog& log, const std::filesystem::path& csv);

/// Parsed trajectory CSV, one column vector per header name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
  Index rows() const { return columns.empty() ? 0 : static_cast<Index>(columns.front().size()); }
};
CsvTable read_csv(const std::filesystem::path& csv);

struct TimingStats {
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct BenchSummary {
  Index steps = 0;
  TimingStats total, convert, solve;  // ms per control step
  std::map<int, Index> iteration_histogram;
  double median_iterations = 0.0;
  int max_iterations = 0;
  int mode_iterations = 0;
  Index unconverged_steps = 0;
  double max_slack = 0.0;
};

TimingStats timing_stats(const std::vector<double>& samples);
BenchSummary summarize(const TrajectoryLog& log);
nlohmann::json summary_to_json(const BenchSummary& s);
BenchSummary summary_from_json(const nlohmann::json& j);

/// Piecewise-constant angle reference on the disc.
struct Scenario {
  std::vector<double> levels{0.5, -0.3, 0.0, 0.65, -0.6, 0.9, 0.2, -0.9, 0.4};
  Index hold = 50;
  double noise_std = 0.01;  // rad, measurement noise
  std::uint64_t seed = 7;   // plant noise seed

  Index steps() const { return static_cast<Index>(levels.size()) * hold; }
  /// max |r| over the levels.
  double amplitude() const;
  ReferenceSignal reference() const;
  void validate() const;
};

TrajectoryLog run_scenario(const AnnSsModel& model, const UnbalancedDisc& disc, double Ts, const Scenario& scenario,
                           const ControllerConfig& cfg, Index steps = -1);

struct BenchComparison {
  BenchSummary first, second;
  TrajectoryLog first_log, second_log;
  double max_output_difference = 0.0;  // noiseless plant outputs, max norm
  double max_input_difference = 0.0;
  double reference_amplitude = 0.0;
};

/// Paired closed-loop runs with identical noise seeds in two conversion modes.
BenchComparison bench_compare(const AnnSsModel& model, const UnbalancedDisc& disc, double Ts, const Scenario& scenario,
                              const ControllerConfig& base, ConversionMode first, ConversionMode second,
                              Index steps = -1);

/// Settings behind the six subcommands, read from `{plant, trainer, controller, run}`.
struct RunConfig {
  UnbalancedDisc disc;
  SimSettings sim;
  MultisineConfig excitation;
  TrainConfig trainer;
  // Controller fields kept in raw form until the model dimensions are known.
  Index horizon = 10;
  std::vector<double> q_diag{1e3, 10.0};
  std::vector<double> r_diag{1.0};
  double u_abs = 4.0;
  double y_abs = 1.2;
  double conv_tol = 0.1;
  int max_inner_iter = 10;
  double dlambda = 0.05;
  ConversionMode mode = ConversionMode::Ftc;
  std::optional<double> slack_penalty = 1e4;
  unsigned workers = 1;
  QpSettings qp;
  Scenario scenario;
  Index steps = -1;  // -1: whole scenario
  std::string model_path = "model.json";
  std::string data_path = "data.csv";
  std::string out_dir = ".";

  ControllerConfig controller(Index nx, Index nu, Index ny) const;
};

/// Throws ConfigError on unknown keys or wrong types.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& cfg);

nlohmann::json report_to_json(const TrainReport& report);

/// Exit codes of the command-line entry point.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitQp = 4 };

/// Command-line entry point; returns the process exit status.
int run(int argc, const char* const* argv);

}  // namespace lpvmpc
