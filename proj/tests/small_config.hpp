#pragma once

#include <filesystem>
#include <string>

#include "edgeoff/harness.hpp"

namespace edgeoff::testing {

/// A full pipeline config small enough to run in a few seconds.
inline harness::ExperimentConfig small_config(const std::string& out_dir) {
  harness::ExperimentConfig c;
  c.agent.episodes = 60;
  c.agent.steps_per_episode = 30;
  c.agent.hidden = {16};
  c.agent.batch_size = 32;
  c.agent.epsilon = {1.0, 0.05, 1000};
  c.attack.recon_observations = 300;
  c.attack.eval_tasks = 150;
  c.attack.eval_seeds = 2;
  c.detection.per_class = 60;
  c.detection.gammas = {2.0};
  c.detection.rf_trees = 8;
  c.detection.gbt_stages = 8;
  c.detection.svm_epochs = 5;
  c.detection.mlp_epochs = 5;
  c.seeds = {3};
  c.output_dir = out_dir;
  return c;
}

inline std::string fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace edgeoff::testing
