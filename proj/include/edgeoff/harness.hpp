#pragma once

// Experiment orchestration: configuration, per-seed training, attack-impact
// and detection studies, and the CSV/JSON artifacts they emit.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/detect/classifier.hpp"
#include "edgeoff/dqn.hpp"
#include "edgeoff/fsi_attack.hpp"
#include "edgeoff/grid_env.hpp"

namespace edgeoff::harness {

inline constexpr const char* kTrainLogHeader = "episode,mean_reward,mean_cost,epsilon";
inline constexpr const char* kImpactHeader =
    "condition,stations,gamma,mean_cost,normalized_cost,invalid_rate";
inline constexpr const char* kDetectionHeader = "model,task,class,precision,recall,f_measure";
inline constexpr const char* kReportRowsHeader = "seed,study,condition,metric,value";

struct AttackSettings {
  // Extra condition evaluated alongside the standard grid when non-empty.
  std::vector<int> targets;
  double gamma = 2.0;
  attack::PoisonMode mode = attack::PoisonMode::kShift;
  int recon_observations = 2000;
  int eval_tasks = 1000;
  int eval_seeds = 5;
  // --check thresholds on cost(2 stations) / cost(1 station)
  double min_ratio = 1.5;
  double max_ratio = 2.5;
};

struct DetectionSettings {
  int per_class = 1000;
  std::vector<double> gammas{0.5, 1.0, 2.0, 4.0};
  double test_fraction = 0.2;
  int dt_max_depth = 12;
  int dt_min_leaf = 5;
  int rf_trees = 100;
  int gbt_stages = 100;
  int svm_epochs = 50;
  int mlp_epochs = 50;
  // --check threshold on the fine-grained random-forest macro-F
  double min_rf_f = 0.95;

  detect::ClassifierParams classifier_params(const dqn::Normalization& norm) const;
};

struct ExperimentConfig {
  env::ScenarioConfig scenario;
  dqn::AgentConfig agent;
  AttackSettings attack;
  DetectionSettings detection;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields take defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Parses a file; syntax errors report line and column.
  static ExperimentConfig load(const std::string& path);
};

/// 16 hex digits of FNV-1a over the canonical JSON of every field that
/// affects results (the output directory is excluded).
std::string config_hash(const ExperimentConfig& config);

std::string policy_path(const ExperimentConfig& config, std::uint64_t seed);

struct TrainArtifacts {
  std::uint64_t seed = 0;
  std::string policy_file;
  std::string log_file;
  double first_window_cost = 0.0;  // mean over the first 50 episodes
  double last_window_cost = 0.0;   // mean over the last 50 episodes
};

/// Trains one policy per seed and writes policy_seed<N>.json and
/// train_log_seed<N>.csv into the output directory.
std::vector<TrainArtifacts> run_train(const ExperimentConfig& config);

/// Divides each cost by the benign cost. Throws on a non-positive basis.
std::vector<double> normalize_cost(const std::vector<double>& costs, double benign_cost);

struct ImpactRow {
  std::string condition;  // benign, station_<k>, stations_<m>, configured
  int stations = 0;       // number of compromised stations
  double gamma = 0.0;
  double mean_cost = 0.0;
  double normalized_cost = 0.0;
  double invalid_rate = 0.0;
};

struct ImpactResult {
  attack::StationStats stats;
  std::vector<ImpactRow> rows;
  std::string csv_file;
};

/// Benign, every single station, then the mean over all station subsets of
/// size 1, 2 and 3, each averaged over attack.eval_seeds evaluation runs.
ImpactResult run_attack_impact(const ExperimentConfig& config, const dqn::Policy& policy,
                               std::uint64_t seed);

/// Impact rows without writing files.
ImpactResult attack_impact(const ExperimentConfig& config, const dqn::Policy& policy,
                           std::uint64_t seed);

struct DetectionRow {
  std::string model;
  std::string task;
  std::string cls;  // class index or "macro"
  detect::ClassScore score;
};

struct DetectionResult {
  std::vector<DetectionRow> rows;
  std::vector<std::string> files;

  /// Macro F-measure for a model/task pair; throws when absent.
  double macro_f(const std::string& model, const std::string& task) const;
};

/// Builds binary and fine-grained datasets, trains every classifier kind
/// on both and writes datasets, models and detection_metrics_seed<N>.csv.
DetectionResult run_detection_benchmark(const ExperimentConfig& config, const dqn::Policy& policy,
                                        std::uint64_t seed);

struct ReportRow {
  std::uint64_t seed = 0;
  std::string study;
  std::string condition;
  std::string metric;
  double value = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct Aggregate {
  std::string study;
  std::string condition;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over seeds
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  std::string experiment_id;
  std::string config_hash;
  std::vector<ReportRow> rows;
  std::vector<Aggregate> aggregates;
  std::vector<CheckResult> checks;
  std::vector<std::string> artifacts;

  bool all_checks_passed() const;
  nlohmann::json to_json() const;
};

std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows);

/// Train, attack impact, detection for every seed. Writes report_rows.csv
/// and manifest.json next to the other artifacts.
RunReport run_all(const ExperimentConfig& config);

}  // namespace edgeoff::harness
