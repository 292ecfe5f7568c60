#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scrn/optimizers.hpp"
#include "scrn/rl/algorithms.hpp"

namespace scrn::harness {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { Synthetic, Rl };

enum class RlEnv { CliffWalking, RandomMaze, RandomShapeMaze };

enum class RlAxis { StateActions, Episodes };

struct SyntheticSetup {
  SyntheticSpec spec;
  Vec x0;
  std::string algorithm;  // scrn | crn | vr-scrn | sgd
  ScrnConfig scrn;
  VrScrnConfig vr;
  SgdConfig sgd;
};

struct RlSetup {
  RlEnv env = RlEnv::CliffWalking;
  double discount = rl::kDefaultDiscount;
  std::optional<int> horizon;
  std::string algorithm;  // scrn | isvr-scrn | spg | reinforce
  rl::ScrnRlConfig scrn;
  rl::IsVrConfig isvr;
  rl::SpgConfig spg;
  long eval_episodes = 100;
  double success_threshold = 0.5;  // instance succeeds when eval success rate exceeds this
  RlAxis axis = RlAxis::StateActions;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Synthetic;
  long instances = 1;
  std::uint64_t budget = 1;  // oracle calls (synthetic) or episodes (rl)
  std::uint64_t seed = 0;
  int threads = 1;
  long grid_points = 50;
  SyntheticSetup synthetic;
  RlSetup rl;
  nlohmann::json raw;
};

/// Throws Error(ConfigError) naming the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> list_algorithms();

/// Per-instance seed derived from the master seed via std::seed_seq.
std::uint64_t instance_seed(std::uint64_t master, long instance);

struct MetricRow {
  long step = 0;
  std::uint64_t calls_grad = 0;
  std::uint64_t calls_hess = 0;
  std::string name;
  double value = 0;
};

struct InstanceResult {
  long instance = 0;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  std::vector<double> x;  // aggregation axis
  std::vector<double> y;  // primary metric: gap (synthetic) or mean return (rl)
  std::string status;
  std::optional<std::string> error;
  std::optional<bool> success;
  std::optional<double> final_eval_success_rate;
};

struct AggregateSeries {
  std::vector<double> x;
  std::vector<double> median;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct ExperimentResult {
  std::vector<InstanceResult> instances;
  AggregateSeries series;
  std::optional<double> success_percentage;
  double wall_seconds = 0;
};

/// Type-7 (linear interpolation) sample quantile, q ∈ [0, 1].
double quantile(std::vector<double> values, double q);

/// Pointwise median and (1−level)/2, (1+level)/2 quantiles across runs.
/// Each run is a curve (x, y) evaluated on `grid` by linear interpolation,
/// held constant outside its recorded range. Throws EmptyInput for no runs.
AggregateSeries aggregate_ci(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& runs,
                             const std::vector<double>& grid, double level = 0.90);

/// Runs every instance on a pool of config.threads workers. A failing
/// instance is recorded with its error and the others still run.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// runs.csv, aggregate.csv and manifest.json in `dir` (created if needed).
/// Throws IoError.
void emit(const ExperimentConfig& config, const ExperimentResult& result, const std::filesystem::path& dir);

/// %.17g
std::string format_double(double v);

}  // namespace scrn::harness
