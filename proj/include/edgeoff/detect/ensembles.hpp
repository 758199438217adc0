#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "edgeoff/detect/tree.hpp"

namespace edgeoff::detect {

struct ForestParams {
  int trees = 100;
  int max_depth = 64;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0 means round(sqrt(d))
  bool bootstrap = true;
};

/// Bagged CART trees with per-split feature subsampling. Tree t draws from
/// its own stream derive_seed(seed, t), so the forest does not depend on
/// the order trees are fitted in.
class RandomForest {
 public:
  static RandomForest fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                          const ForestParams& params, std::uint64_t seed);
  static RandomForest from_trees(std::vector<DecisionTree> trees);

  std::vector<int> votes(std::span<const double> features) const;
  /// Majority vote, ties to the lowest label.
  int predict(std::span<const double> features) const;
  /// Fraction of trees voting for `label`.
  double vote_fraction(std::span<const double> features, int label) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  int num_classes() const { return num_classes_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<DecisionTree> trees_;
  int num_classes_ = 0;
};

struct BoostingParams {
  int stages = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 1;
};

/// Stage-wise multiclass gradient boosting on the softmax cross-entropy: at
/// every stage one regression tree per class is fitted to y - p with
/// Newton leaf values scaled by (C - 1) / C.
class GradientBoosting {
 public:
  static GradientBoosting fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                              const BoostingParams& params);

  std::vector<double> scores(std::span<const double> features) const;
  /// Highest score, ties to the lowest label.
  int predict(std::span<const double> features) const;

  int num_classes() const { return num_classes_; }
  std::size_t num_stages() const { return stages_.size(); }

  nlohmann::json to_json() const;
  static GradientBoosting from_json(const nlohmann::json& j);

 private:
  std::vector<std::vector<RegressionTree>> stages_;  // [stage][class]
  int num_classes_ = 0;
  double learning_rate_ = 0.1;
};

}  // namespace edgeoff::detect
