#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edgeoff/harness.hpp"
#include "edgeoff/json_fields.hpp"

using namespace edgeoff;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool check = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path, "experiment config (JSON); defaults apply when omitted");
  cmd->add_option("--seed", opt.seed, "run this seed instead of the configured list");
  cmd->add_option("--out", opt.out, "output directory");
}

harness::ExperimentConfig load_config(const Options& opt) {
  harness::ExperimentConfig config;
  if (!opt.config_path.empty()) config = harness::ExperimentConfig::load(opt.config_path);
  if (opt.seed) config.seeds = {*opt.seed};
  if (!opt.out.empty()) config.output_dir = opt.out;
  config.validate();
  return config;
}

dqn::Policy load_policy(const harness::ExperimentConfig& config, std::uint64_t seed) {
  const auto path = harness::policy_path(config, seed);
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("missing policy " + path + " (run `edgeoff train` first)");
  }
  return dqn::Policy::load(path);
}

int cmd_train(const Options& opt) {
  const auto config = load_config(opt);
  for (const auto& t : harness::run_train(config)) {
    std::cout << "seed " << t.seed << ": cost " << t.first_window_cost << " -> " << t.last_window_cost
              << "  " << t.policy_file << "\n";
  }
  return 0;
}

int cmd_attack_impact(const Options& opt) {
  const auto config = load_config(opt);
  for (auto seed : config.seeds) {
    const auto r = harness::run_attack_impact(config, load_policy(config, seed), seed);
    std::cout << "seed " << seed << ":\n";
    for (const auto& row : r.rows) {
      std::cout << "  " << row.condition << " normalized " << row.normalized_cost << "\n";
    }
    std::cout << "  " << r.csv_file << "\n";
  }
  return 0;
}

int cmd_detect(const Options& opt) {
  const auto config = load_config(opt);
  for (auto seed : config.seeds) {
    const auto r = harness::run_detection_benchmark(config, load_policy(config, seed), seed);
    std::cout << "seed " << seed << ":\n";
    for (const auto& row : r.rows) {
      if (row.cls == "macro") std::cout << "  " << row.task << " " << row.model << " macro-F " << row.score.f_measure << "\n";
    }
  }
  return 0;
}

int cmd_all(const Options& opt) {
  const auto config = load_config(opt);
  const auto report = harness::run_all(config);
  std::cout << report.experiment_id << "\n";
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << "  " << c.detail << "\n";
  }
  if (opt.check && !report.all_checks_passed()) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge offloading under false state injection: training, attack impact, detection"};
  app.require_subcommand(1);
  Options opt;
  auto* train = app.add_subcommand("train", "train one policy per seed");
  auto* impact = app.add_subcommand("attack-impact", "evaluate trained policies under attack");
  auto* detect = app.add_subcommand("detect", "train and score the detectors");
  auto* all = app.add_subcommand("all", "train, attack impact and detection with a run manifest");
  for (auto* cmd : {train, impact, detect, all}) add_common(cmd, opt);
  all->add_flag("--check", opt.check, "exit nonzero when an acceptance threshold is breached");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return cmd_train(opt);
    if (impact->parsed()) return cmd_attack_impact(opt);
    if (detect->parsed()) return cmd_detect(opt);
    return cmd_all(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
