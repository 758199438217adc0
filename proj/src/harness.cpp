#include "edgeoff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "edgeoff/csv.hpp"
#include "edgeoff/detect/dataset.hpp"
#include "edgeoff/json_fields.hpp"
#include "edgeoff/rng.hpp"

namespace edgeoff::harness {
namespace {

namespace fs = std::filesystem;

// Stream ids for derive_seed(seed, ...).
constexpr std::uint64_t kReconStream = 1;
constexpr std::uint64_t kEvalStream = 100;
constexpr std::uint64_t kPoisonStream = 200;
constexpr std::uint64_t kDatasetStream = 300;
constexpr std::uint64_t kSplitStream = 310;
constexpr std::uint64_t kClassifierStream = 400;

constexpr int kLearningWindow = 50;

std::string seed_suffix(std::uint64_t seed) { return "_seed" + std::to_string(seed); }

std::string out_file(const ExperimentConfig& config, const std::string& name) {
  fs::create_directories(config.output_dir);
  return (fs::path(config.output_dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  csv::write_file(path, j.dump(2) + "\n");
}

std::vector<std::vector<int>> subsets_of_size(int n, int m) {
  std::vector<std::vector<int>> out;
  if (m > n) return out;
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = m - 1;
    while (i >= 0 && idx[i] == n - m + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

int max_targets(int num_stations) {
  return std::min(static_cast<int>(attack::kMaxTargets), num_stations);
}

attack::StationStats recon(const ExperimentConfig& config, const dqn::Policy& policy,
                           env::OffloadEnv& env, std::uint64_t seed) {
  const dqn::Decider decide = [&policy](const env::StateVector& s) {
    return policy.greedy_action(s.values());
  };
  return attack::reconnoiter(decide, env, config.attack.recon_observations,
                             derive_seed(seed, kReconStream));
}

double window_mean(const std::vector<dqn::EpisodeLog>& log, bool first) {
  if (log.empty()) return 0.0;
  const auto n = std::min<std::size_t>(kLearningWindow, log.size());
  const auto begin = first ? log.begin() : log.end() - static_cast<std::ptrdiff_t>(n);
  double sum = 0.0;
  for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(n); ++it) sum += it->mean_cost;
  return sum / static_cast<double>(n);
}

}  // namespace

// Config ------------------------------------------------------------------------

detect::ClassifierParams DetectionSettings::classifier_params(const dqn::Normalization& norm) const {
  detect::ClassifierParams p;
  p.tree.max_depth = dt_max_depth;
  p.tree.min_samples_leaf = dt_min_leaf;
  p.forest.trees = rf_trees;
  p.boosting.stages = gbt_stages;
  p.svm.epochs = svm_epochs;
  p.mlp.epochs = mlp_epochs;
  p.normalization = norm;
  return p;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError(field + ": " + msg);
  };
  try {
    scenario.validate();
  } catch (const std::invalid_argument& e) {
    fail("scenario", e.what());
  }
  try {
    agent.validate();
  } catch (const std::invalid_argument& e) {
    fail("agent", e.what());
  }
  if (seeds.empty()) fail("seeds", "at least one seed required");
  if (!(attack.gamma >= 0)) fail("attack.gamma", "must be non-negative");
  try {
    attack::AttackConfig{attack.targets, attack.gamma, attack.mode}.validate(
        static_cast<int>(scenario.station_positions.size()));
  } catch (const std::invalid_argument& e) {
    fail("attack", e.what());
  }
  if (attack.recon_observations < 2) fail("attack.recon_observations", "must be at least 2");
  if (attack.eval_tasks < 1) fail("attack.eval_tasks", "must be positive");
  if (attack.eval_seeds < 1) fail("attack.eval_seeds", "must be positive");
  if (!(attack.min_ratio <= attack.max_ratio)) fail("attack.min_ratio", "exceeds max_ratio");
  if (detection.per_class < 2) fail("detection.per_class", "must be at least 2");
  if (detection.gammas.empty()) fail("detection.gammas", "at least one gamma required");
  for (double g : detection.gammas) {
    if (!(g >= 0)) fail("detection.gammas", "must be non-negative");
  }
  if (!(detection.test_fraction > 0 && detection.test_fraction < 1)) {
    fail("detection.test_fraction", "must lie in (0, 1)");
  }
  if (detection.dt_max_depth < 1 || detection.dt_min_leaf < 1 || detection.rf_trees < 1 ||
      detection.gbt_stages < 1 || detection.svm_epochs < 1 || detection.mlp_epochs < 1) {
    fail("detection", "model sizes must be positive");
  }
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

nlohmann::json ExperimentConfig::to_json() const {
  const auto& a = attack;
  const auto& d = detection;
  return {
      {"scenario", scenario.to_json()},
      {"agent", agent.to_json()},
      {"attack",
       {{"targets", a.targets},
        {"gamma", a.gamma},
        {"mode", attack::to_string(a.mode)},
        {"recon_observations", a.recon_observations},
        {"eval_tasks", a.eval_tasks},
        {"eval_seeds", a.eval_seeds},
        {"min_ratio", a.min_ratio},
        {"max_ratio", a.max_ratio}}},
      {"detection",
       {{"per_class", d.per_class},
        {"gammas", d.gammas},
        {"test_fraction", d.test_fraction},
        {"dt_max_depth", d.dt_max_depth},
        {"dt_min_leaf", d.dt_min_leaf},
        {"rf_trees", d.rf_trees},
        {"gbt_stages", d.gbt_stages},
        {"svm_epochs", d.svm_epochs},
        {"mlp_epochs", d.mlp_epochs},
        {"min_rf_f", d.min_rf_f}}},
      {"seeds", seeds},
      {"output_dir", output_dir},
  };
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  FieldReader top(j, "");
  c.scenario = env::ScenarioConfig::from_json(top.section("scenario"), "scenario");
  c.agent = dqn::AgentConfig::from_json(top.section("agent"), "agent");

  FieldReader a(top.section("attack"), "attack");
  a.read("targets", c.attack.targets);
  a.read("gamma", c.attack.gamma);
  std::string mode = attack::to_string(c.attack.mode);
  a.read("mode", mode);
  try {
    c.attack.mode = attack::poison_mode_from_string(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(a.field("mode") + ": " + e.what());
  }
  a.read("recon_observations", c.attack.recon_observations);
  a.read("eval_tasks", c.attack.eval_tasks);
  a.read("eval_seeds", c.attack.eval_seeds);
  a.read("min_ratio", c.attack.min_ratio);
  a.read("max_ratio", c.attack.max_ratio);
  a.finish();

  FieldReader d(top.section("detection"), "detection");
  d.read("per_class", c.detection.per_class);
  d.read("gammas", c.detection.gammas);
  d.read("test_fraction", c.detection.test_fraction);
  d.read("dt_max_depth", c.detection.dt_max_depth);
  d.read("dt_min_leaf", c.detection.dt_min_leaf);
  d.read("rf_trees", c.detection.rf_trees);
  d.read("gbt_stages", c.detection.gbt_stages);
  d.read("svm_epochs", c.detection.svm_epochs);
  d.read("mlp_epochs", c.detection.mlp_epochs);
  d.read("min_rf_f", c.detection.min_rf_f);
  d.finish();

  top.read("seeds", c.seeds);
  top.read("output_dir", c.output_dir);
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  auto j = config.to_json();
  j.erase("output_dir");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string policy_path(const ExperimentConfig& config, std::uint64_t seed) {
  return (fs::path(config.output_dir) / ("policy" + seed_suffix(seed) + ".json")).string();
}

// Training ------------------------------------------------------------------------

std::vector<TrainArtifacts> run_train(const ExperimentConfig& config) {
  config.validate();
  const auto hash = config_hash(config);
  std::vector<TrainArtifacts> out;
  for (auto seed : config.seeds) {
    auto result = dqn::train_offload(config.scenario, config.agent, seed);
    result.policy.metadata.config_hash = hash;
    TrainArtifacts art;
    art.seed = seed;
    art.policy_file = out_file(config, "policy" + seed_suffix(seed) + ".json");
    result.policy.save(art.policy_file);

    std::string log = std::string(kTrainLogHeader) + "\n";
    for (const auto& e : result.log) {
      log += csv::join_row({std::to_string(e.episode), csv::format_double(e.mean_reward),
                            csv::format_double(e.mean_cost), csv::format_double(e.epsilon)});
    }
    art.log_file = out_file(config, "train_log" + seed_suffix(seed) + ".csv");
    csv::write_file(art.log_file, log);
    art.first_window_cost = window_mean(result.log, true);
    art.last_window_cost = window_mean(result.log, false);
    out.push_back(std::move(art));
  }
  return out;
}

// Attack impact -----------------------------------------------------------------

std::vector<double> normalize_cost(const std::vector<double>& costs, double benign_cost) {
  if (!(benign_cost > 0.0)) throw std::invalid_argument("benign cost must be positive");
  std::vector<double> out;
  out.reserve(costs.size());
  for (double c : costs) out.push_back(c / benign_cost);
  return out;
}

ImpactResult attack_impact(const ExperimentConfig& config, const dqn::Policy& policy,
                           std::uint64_t seed) {
  config.validate();
  env::OffloadEnv env(config.scenario);
  const int k_count = env.num_stations();
  ImpactResult result;
  result.stats = recon(config, policy, env, seed);

  // Mean cost and invalid rate over the evaluation seeds for one target set.
  std::uint64_t condition_index = 0;
  auto run_condition = [&](const std::vector<int>& targets) {
    double cost = 0.0, invalid = 0.0;
    const auto poison_base = derive_seed(seed, kPoisonStream + condition_index++);
    for (int i = 0; i < config.attack.eval_seeds; ++i) {
      dqn::PoisonHook hook;
      if (!targets.empty()) {
        attack::AttackConfig ac{targets, config.attack.gamma, config.attack.mode};
        hook = attack::make_poison_hook(ac, result.stats, derive_seed(poison_base, i));
      }
      const auto m = dqn::evaluate(policy, env, config.attack.eval_tasks,
                                   derive_seed(seed, kEvalStream + i), hook);
      cost += m.mean_cost;
      invalid += m.invalid_rate;
    }
    return std::pair{cost / config.attack.eval_seeds, invalid / config.attack.eval_seeds};
  };

  auto [benign_cost, benign_invalid] = run_condition({});
  result.rows.push_back({"benign", 0, 0.0, benign_cost, 0.0, benign_invalid});
  std::map<std::vector<int>, std::pair<double, double>> single;
  for (int k = 0; k < k_count; ++k) {
    auto [c, inv] = run_condition({k});
    single[{k}] = {c, inv};
    result.rows.push_back({"station_" + std::to_string(k), 1, config.attack.gamma, c, 0.0, inv});
  }
  for (int m = 1; m <= max_targets(k_count); ++m) {
    const auto subsets = subsets_of_size(k_count, m);
    double cost = 0.0, invalid = 0.0;
    for (const auto& s : subsets) {
      auto [c, inv] = m == 1 ? single.at(s) : run_condition(s);
      cost += c;
      invalid += inv;
    }
    const double n = static_cast<double>(subsets.size());
    result.rows.push_back({"stations_" + std::to_string(m), m, config.attack.gamma, cost / n, 0.0, invalid / n});
  }
  if (!config.attack.targets.empty()) {
    auto [c, inv] = run_condition(config.attack.targets);
    result.rows.push_back({"configured", static_cast<int>(config.attack.targets.size()), config.attack.gamma, c, 0.0, inv});
  }

  std::vector<double> costs;
  for (const auto& r : result.rows) costs.push_back(r.mean_cost);
  const auto normalized = normalize_cost(costs, benign_cost);
  for (std::size_t i = 0; i < result.rows.size(); ++i) result.rows[i].normalized_cost = normalized[i];
  return result;
}

ImpactResult run_attack_impact(const ExperimentConfig& config, const dqn::Policy& policy,
                               std::uint64_t seed) {
  auto result = attack_impact(config, policy, seed);
  std::string text = std::string(kImpactHeader) + "\n";
  for (const auto& r : result.rows) {
    text += csv::join_row({r.condition, std::to_string(r.stations), csv::format_double(r.gamma),
                           csv::format_double(r.mean_cost), csv::format_double(r.normalized_cost),
                           csv::format_double(r.invalid_rate)});
  }
  result.csv_file = out_file(config, "attack_impact" + seed_suffix(seed) + ".csv");
  csv::write_file(result.csv_file, text);
  write_json(out_file(config, "recon" + seed_suffix(seed) + ".json"), attack::to_json(result.stats));
  return result;
}

// Detection ---------------------------------------------------------------------

double DetectionResult::macro_f(const std::string& model, const std::string& task) const {
  for (const auto& r : rows) {
    if (r.model == model && r.task == task && r.cls == "macro") return r.score.f_measure;
  }
  throw std::out_of_range("no detection result for " + model + "/" + task);
}

DetectionResult run_detection_benchmark(const ExperimentConfig& config, const dqn::Policy& policy,
                                        std::uint64_t seed) {
  config.validate();
  env::OffloadEnv env(config.scenario);
  const int k_count = env.num_stations();
  if (policy.net.input_size() != env.state_dim() || policy.num_actions() != k_count) {
    throw std::invalid_argument("policy does not match the scenario");
  }
  const auto stats = recon(config, policy, env, seed);
  const auto params = config.detection.classifier_params(policy.normalization);

  DetectionResult result;
  std::string text = std::string(kDetectionHeader) + "\n";
  const detect::LabelTask tasks[] = {detect::LabelTask::kBinary, detect::LabelTask::kFineGrained};
  for (std::size_t t = 0; t < 2; ++t) {
    const auto task = tasks[t];
    const auto task_name = detect::to_string(task);
    std::vector<attack::AttackConfig> grid{attack::AttackConfig{}};
    const int widest = task == detect::LabelTask::kBinary ? max_targets(k_count) : 1;
    for (double g : config.detection.gammas) {
      for (int m = 1; m <= widest; ++m) {
        for (auto& s : subsets_of_size(k_count, m)) grid.push_back({s, g, config.attack.mode});
      }
    }
    const auto data = detect::gen_dataset(policy, env, grid, stats, task, config.detection.per_class,
                                          derive_seed(seed, kDatasetStream + t));
    const auto dataset_file = out_file(config, "dataset_" + task_name + seed_suffix(seed) + ".csv");
    data.write_csv(dataset_file);
    result.files.push_back(dataset_file);

    const auto split = data.stratified_split(config.detection.test_fraction, derive_seed(seed, kSplitStream + t));
    const auto train_set = data.subset(split.train);
    const auto test_set = data.subset(split.test);
    for (std::size_t k = 0; k < detect::kAllKinds.size(); ++k) {
      const auto kind = detect::kAllKinds[k];
      const auto model = detect::train(kind, train_set, params, derive_seed(seed, kClassifierStream + k));
      const auto model_file = out_file(
          config, "model_" + task_name + "_" + detect::to_string(kind) + seed_suffix(seed) + ".json");
      write_json(model_file, model.to_json());
      result.files.push_back(model_file);

      const auto eval = detect::evaluate(model, test_set);
      const auto name = detect::to_string(kind);
      for (std::size_t c = 0; c < eval.metrics.per_class.size(); ++c) {
        result.rows.push_back({name, task_name, std::to_string(c), eval.metrics.per_class[c]});
      }
      result.rows.push_back({name, task_name, "macro", eval.metrics.macro});
    }
  }
  for (const auto& r : result.rows) {
    text += csv::join_row({r.model, r.task, r.cls, csv::format_double(r.score.precision),
                           csv::format_double(r.score.recall), csv::format_double(r.score.f_measure)});
  }
  const auto metrics_file = out_file(config, "detection_metrics" + seed_suffix(seed) + ".csv");
  csv::write_file(metrics_file, text);
  result.files.push_back(metrics_file);
  return result;
}

// Report ------------------------------------------------------------------------

bool RunReport::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"seed", r.seed}, {"study", r.study}, {"condition", r.condition},
                         {"metric", r.metric}, {"value", r.value}});
  }
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& a : aggregates) {
    agg.push_back({{"study", a.study}, {"condition", a.condition}, {"metric", a.metric},
                   {"mean", a.mean}, {"std", a.stddev}});
  }
  nlohmann::json checks_json = nlohmann::json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return {{"experiment_id", experiment_id}, {"config_hash", config_hash},
          {"rows", rows_json},              {"aggregates", agg},
          {"checks", checks_json},          {"artifacts", artifacts}};
}

std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows) {
  // Keeps first-appearance order of (study, condition, metric).
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.study == r.study && a.condition == r.condition && a.metric == r.metric;
    });
    if (it == out.end()) {
      out.push_back({r.study, r.condition, r.metric, 0.0, 0.0});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    out[i].mean = mean;
    out[i].stddev = std::sqrt(var / static_cast<double>(v.size()));
  }
  return out;
}

RunReport run_all(const ExperimentConfig& config) {
  config.validate();
  RunReport report;
  report.config_hash = config_hash(config);
  report.experiment_id = "edgeoff-" + report.config_hash;

  auto stage = [](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(name + ": " + e.what());
    }
  };

  const auto trained = stage("train", [&] { return run_train(config); });
  bool learned = true;
  std::string learn_detail;
  for (const auto& t : trained) {
    report.artifacts.push_back(t.policy_file);
    report.artifacts.push_back(t.log_file);
    report.rows.push_back({t.seed, "train", "all", "first_window_cost", t.first_window_cost});
    report.rows.push_back({t.seed, "train", "all", "last_window_cost", t.last_window_cost});
    learned = learned && t.last_window_cost < t.first_window_cost;
    learn_detail += "seed " + std::to_string(t.seed) + ": " + csv::format_double(t.first_window_cost) +
                    " -> " + csv::format_double(t.last_window_cost) + "; ";
  }
  report.checks.push_back({"learning_curve", learned, learn_detail});

  for (const auto& t : trained) {
    const auto policy = dqn::Policy::load(t.policy_file);
    const auto impact = stage("attack-impact", [&] { return run_attack_impact(config, policy, t.seed); });
    report.artifacts.push_back(impact.csv_file);
    for (const auto& r : impact.rows) {
      report.rows.push_back({t.seed, "impact", r.condition, "normalized_cost", r.normalized_cost});
    }
    const auto det = stage("detection", [&] { return run_detection_benchmark(config, policy, t.seed); });
    report.artifacts.insert(report.artifacts.end(), det.files.begin(), det.files.end());
    for (const auto& r : det.rows) {
      if (r.cls == "macro") report.rows.push_back({t.seed, "detection", r.task + "/" + r.model, "macro_f", r.score.f_measure});
    }
  }
  report.aggregates = aggregate(report.rows);

  auto mean_of = [&](const std::string& study, const std::string& condition) -> double {
    for (const auto& a : report.aggregates) {
      if (a.study == study && a.condition == condition) return a.mean;
    }
    return std::nan("");
  };
  const double c1 = mean_of("impact", "stations_1");
  const double c2 = mean_of("impact", "stations_2");
  const double c3 = mean_of("impact", "stations_3");
  report.checks.push_back({"impact_trend", c1 < c2 && c2 < c3,
                           "1: " + csv::format_double(c1) + ", 2: " + csv::format_double(c2) +
                               ", 3: " + csv::format_double(c3)});
  const double ratio = c2 / c1;
  report.checks.push_back({"impact_ratio",
                           ratio >= config.attack.min_ratio && ratio <= config.attack.max_ratio,
                           "cost(2)/cost(1) = " + csv::format_double(ratio)});
  const double rf = mean_of("detection", "fine_grained/rf");
  const double svm = mean_of("detection", "fine_grained/svm");
  report.checks.push_back({"rf_fine_grained", rf >= config.detection.min_rf_f,
                           "rf macro-F = " + csv::format_double(rf)});
  report.checks.push_back({"rf_vs_svm", rf >= svm,
                           "rf " + csv::format_double(rf) + ", svm " + csv::format_double(svm)});

  std::string rows_text = std::string(kReportRowsHeader) + "\n";
  for (const auto& r : report.rows) {
    rows_text += csv::join_row({std::to_string(r.seed), r.study, r.condition, r.metric, csv::format_double(r.value)});
  }
  const auto rows_file = out_file(config, "report_rows.csv");
  csv::write_file(rows_file, rows_text);
  report.artifacts.push_back(rows_file);
  const auto manifest = out_file(config, "manifest.json");
  report.artifacts.push_back(manifest);
  write_json(manifest, report.to_json());
  return report;
}

}  // namespace edgeoff::harness
