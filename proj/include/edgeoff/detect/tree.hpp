#pragma once

// CART trees. Classification trees split on Gini impurity and predict the
// majority label of a leaf; regression trees split on squared error and
// carry a Newton-step leaf value, for use inside gradient boosting.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "edgeoff/nn.hpp"
#include "edgeoff/rng.hpp"

namespace edgeoff::detect {

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int label = 0;       // classification leaves
  double value = 0.0;  // regression leaves

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
  int max_depth = 12;
  int min_samples_leaf = 5;
  int max_features = 0;  // features tried per split; 0 means all
};

class DecisionTree {
 public:
  /// Fits on the rows of `x` listed in `rows` (repeats allowed, as in a
  /// bootstrap sample). Labels must lie in [0, num_classes).
  static DecisionTree fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                          std::span<const std::size_t> rows, const TreeParams& params, Rng& rng);
  /// Depth-1 tree: left_label when x[feature] <= threshold, else right_label.
  static DecisionTree stump(int dimension, int num_classes, int feature, double threshold,
                            int left_label, int right_label);

  int predict(std::span<const double> features) const;
  int dimension() const { return dimension_; }
  int num_classes() const { return num_classes_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);
  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  int dimension_ = 0;
  int num_classes_ = 0;
};

class RegressionTree {
 public:
  /// Splits to reduce squared error of `gradients`; each leaf predicts
  /// leaf_scale * sum(gradients) / sum(hessians).
  static RegressionTree fit(const nn::Matrix& x, std::span<const double> gradients,
                            std::span<const double> hessians, std::span<const std::size_t> rows,
                            int max_depth, int min_samples_leaf, double leaf_scale);

  double predict(std::span<const double> features) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);
  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Shared json layout for both tree kinds: nested node records.
nlohmann::json nodes_to_json(const std::vector<TreeNode>& nodes, bool regression);
std::vector<TreeNode> nodes_from_json(const nlohmann::json& root, bool regression);

}  // namespace edgeoff::detect
