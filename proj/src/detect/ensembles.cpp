#include "edgeoff/detect/ensembles.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "edgeoff/dqn.hpp"

namespace edgeoff::detect {

RandomForest RandomForest::fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                               const ForestParams& params, std::uint64_t seed) {
  if (params.trees < 1) throw std::invalid_argument("forest needs at least one tree");
  const auto n = static_cast<std::size_t>(x.rows());
  TreeParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_samples_leaf = params.min_samples_leaf;
  tree_params.max_features = params.max_features > 0
                                 ? params.max_features
                                 : std::max(1, static_cast<int>(std::lround(std::sqrt(x.cols()))));
  RandomForest forest;
  forest.num_classes_ = num_classes;
  for (int t = 0; t < params.trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees_.push_back(DecisionTree::fit(x, labels, num_classes, rows, tree_params, rng));
  }
  return forest;
}

RandomForest RandomForest::from_trees(std::vector<DecisionTree> trees) {
  if (trees.empty()) throw std::invalid_argument("forest needs at least one tree");
  RandomForest f;
  f.num_classes_ = trees.front().num_classes();
  f.trees_ = std::move(trees);
  return f;
}

std::vector<int> RandomForest::votes(std::span<const double> features) const {
  std::vector<int> v(num_classes_, 0);
  for (const auto& t : trees_) ++v[t.predict(features)];
  return v;
}

int RandomForest::predict(std::span<const double> features) const {
  const auto v = votes(features);
  int best = 0;
  for (int c = 1; c < num_classes_; ++c) {
    if (v[c] > v[best]) best = c;
  }
  return best;
}

double RandomForest::vote_fraction(std::span<const double> features, int label) const {
  return static_cast<double>(votes(features).at(label)) / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"num_classes", num_classes_}, {"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest f;
  f.num_classes_ = j.at("num_classes").get<int>();
  for (const auto& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t));
  return f;
}

GradientBoosting GradientBoosting::fit(const nn::Matrix& x, std::span<const int> labels,
                                       int num_classes, const BoostingParams& params) {
  if (num_classes < 2) throw std::invalid_argument("boosting needs at least two classes");
  const int n = x.rows();
  const int c_count = num_classes;
  GradientBoosting model;
  model.num_classes_ = c_count;
  model.learning_rate_ = params.learning_rate;

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> f(static_cast<std::size_t>(n) * c_count, 0.0);
  std::vector<double> g(n), h(n);
  const double leaf_scale = static_cast<double>(c_count - 1) / c_count;

  for (int stage = 0; stage < params.stages; ++stage) {
    std::vector<double> prob(f.size());
    for (int i = 0; i < n; ++i) {
      const auto p = nn::softmax(std::span<const double>(f.data() + static_cast<std::size_t>(i) * c_count, c_count));
      std::copy(p.begin(), p.end(), prob.begin() + static_cast<std::ptrdiff_t>(i) * c_count);
    }
    std::vector<RegressionTree> trees;
    for (int c = 0; c < c_count; ++c) {
      for (int i = 0; i < n; ++i) {
        const double p = prob[static_cast<std::size_t>(i) * c_count + c];
        g[i] = (labels[i] == c ? 1.0 : 0.0) - p;
        h[i] = p * (1.0 - p);
      }
      trees.push_back(RegressionTree::fit(x, g, h, rows, params.max_depth, params.min_samples_leaf, leaf_scale));
    }
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_count; ++c) {
        f[static_cast<std::size_t>(i) * c_count + c] += params.learning_rate * trees[c].predict(x.row(i));
      }
    }
    model.stages_.push_back(std::move(trees));
  }
  return model;
}

std::vector<double> GradientBoosting::scores(std::span<const double> features) const {
  std::vector<double> s(num_classes_, 0.0);
  for (const auto& stage : stages_) {
    for (int c = 0; c < num_classes_; ++c) s[c] += learning_rate_ * stage[c].predict(features);
  }
  return s;
}

int GradientBoosting::predict(std::span<const double> features) const {
  return dqn::argmax(scores(features));
}

nlohmann::json GradientBoosting::to_json() const {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : stages_) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : stage) trees.push_back(t.to_json());
    stages.push_back(trees);
  }
  return {{"num_classes", num_classes_}, {"learning_rate", learning_rate_}, {"stages", stages}};
}

GradientBoosting GradientBoosting::from_json(const nlohmann::json& j) {
  GradientBoosting m;
  m.num_classes_ = j.at("num_classes").get<int>();
  m.learning_rate_ = j.at("learning_rate").get<double>();
  for (const auto& stage : j.at("stages")) {
    std::vector<RegressionTree> trees;
    for (const auto& t : stage) trees.push_back(RegressionTree::from_json(t));
    m.stages_.push_back(std::move(trees));
  }
  return m;
}

}  // namespace edgeoff::detect
