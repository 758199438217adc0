#include "edgeoff/detect/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace edgeoff::detect {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // lower is better
};

std::vector<int> candidate_features(int dimension, int max_features, Rng& rng) {
  std::vector<int> f(dimension);
  std::iota(f.begin(), f.end(), 0);
  if (max_features <= 0 || max_features >= dimension) return f;
  for (int i = 0; i < max_features; ++i) {
    std::uniform_int_distribution<int> pick(i, dimension - 1);
    std::swap(f[i], f[pick(rng)]);
  }
  f.resize(max_features);
  return f;
}

void sort_by_feature(const nn::Matrix& x, std::vector<std::size_t>& rows, int feature) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    const double va = x(static_cast<int>(a), feature);
    const double vb = x(static_cast<int>(b), feature);
    return va < vb || (va == vb && a < b);
  });
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  // Guard against rounding up to b for adjacent doubles.
  return m < b ? m : a;
}

class ClassificationBuilder {
 public:
  ClassificationBuilder(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                        const TreeParams& params, Rng& rng)
      : x_(x), labels_(labels), classes_(num_classes), params_(params), rng_(rng) {}

  int build(std::vector<std::size_t> rows, int depth, std::vector<TreeNode>& nodes) {
    std::vector<std::int64_t> counts(classes_, 0);
    for (auto r : rows) ++counts[labels_[r]];
    const int node = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node].label = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());

    const auto n = static_cast<std::int64_t>(rows.size());
    const bool pure = counts[nodes[node].label] == n;
    if (pure || depth >= params_.max_depth || n < 2 * static_cast<std::int64_t>(params_.min_samples_leaf)) {
      return node;
    }
    const Split best = find_split(rows, counts);
    if (best.feature < 0) return node;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_(static_cast<int>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes[node].feature = best.feature;
    nodes[node].threshold = best.threshold;
    const int l = build(std::move(left), depth + 1, nodes);
    nodes[node].left = l;
    const int r = build(std::move(right), depth + 1, nodes);
    nodes[node].right = r;
    return node;
  }

 private:
  static double sum_sq(const std::vector<std::int64_t>& c) {
    double s = 0.0;
    for (auto v : c) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
  }

  Split find_split(const std::vector<std::size_t>& rows, const std::vector<std::int64_t>& counts) {
    const double n = static_cast<double>(rows.size());
    // Weighted Gini n_l*(1 - sl/n_l^2) + n_r*(1 - sr/n_r^2) = n - sl/n_l - sr/n_r.
    // Any split of an impure node is accepted, including zero-gain ones
    // (XOR-like layouts need them).
    Split best;
    best.score = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> sorted = rows;
    const std::int64_t min_leaf = std::max(1, params_.min_samples_leaf);
    for (int f : candidate_features(x_.cols(), params_.max_features, rng_)) {
      sort_by_feature(x_, sorted, f);
      std::vector<std::int64_t> left(classes_, 0);
      std::vector<std::int64_t> right = counts;
      double left_sq = 0.0;
      double right_sq = sum_sq(counts);
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const int y = labels_[sorted[i]];
        left_sq += 2.0 * static_cast<double>(left[y]) + 1.0;
        right_sq -= 2.0 * static_cast<double>(right[y]) - 1.0;
        ++left[y];
        --right[y];
        const auto nl = static_cast<std::int64_t>(i + 1);
        const auto nr = static_cast<std::int64_t>(sorted.size()) - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double v = x_(static_cast<int>(sorted[i]), f);
        const double v_next = x_(static_cast<int>(sorted[i + 1]), f);
        if (v == v_next) continue;
        const double score = n - left_sq / static_cast<double>(nl) - right_sq / static_cast<double>(nr);
        if (score < best.score) {
          best = Split{f, midpoint(v, v_next), score};
        }
      }
    }
    return best;
  }

  const nn::Matrix& x_;
  std::span<const int> labels_;
  int classes_;
  const TreeParams& params_;
  Rng& rng_;
};

class RegressionBuilder {
 public:
  RegressionBuilder(const nn::Matrix& x, std::span<const double> g, std::span<const double> h,
                    int max_depth, int min_leaf, double leaf_scale)
      : x_(x), g_(g), h_(h), max_depth_(max_depth), min_leaf_(std::max(1, min_leaf)),
        leaf_scale_(leaf_scale) {}

  int build(std::vector<std::size_t> rows, int depth, std::vector<TreeNode>& nodes) {
    double gs = 0.0, hs = 0.0;
    for (auto r : rows) {
      gs += g_[r];
      hs += h_[r];
    }
    const int node = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node].value = hs > 1e-12 ? leaf_scale_ * gs / hs : 0.0;
    if (depth >= max_depth_ || rows.size() < 2 * static_cast<std::size_t>(min_leaf_)) return node;

    const double n = static_cast<double>(rows.size());
    // Maximize sl^2/nl + sr^2/nr, the reduction in squared error.
    double best_score = gs * gs / n + 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = rows;
    for (int f = 0; f < x_.cols(); ++f) {
      sort_by_feature(x_, sorted, f);
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left += g_[sorted[i]];
        const auto nl = static_cast<std::size_t>(i + 1);
        const auto nr = sorted.size() - nl;
        if (nl < static_cast<std::size_t>(min_leaf_) || nr < static_cast<std::size_t>(min_leaf_)) continue;
        const double v = x_(static_cast<int>(sorted[i]), f);
        const double v_next = x_(static_cast<int>(sorted[i + 1]), f);
        if (v == v_next) continue;
        const double right = gs - left;
        const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = midpoint(v, v_next);
        }
      }
    }
    if (best_feature < 0) return node;
    std::vector<std::size_t> l_rows, r_rows;
    for (auto r : rows) {
      (x_(static_cast<int>(r), best_feature) <= best_threshold ? l_rows : r_rows).push_back(r);
    }
    nodes[node].feature = best_feature;
    nodes[node].threshold = best_threshold;
    const int l = build(std::move(l_rows), depth + 1, nodes);
    nodes[node].left = l;
    const int r = build(std::move(r_rows), depth + 1, nodes);
    nodes[node].right = r;
    return node;
  }

 private:
  const nn::Matrix& x_;
  std::span<const double> g_;
  std::span<const double> h_;
  int max_depth_;
  int min_leaf_;
  double leaf_scale_;
};

const TreeNode& descend(const std::vector<TreeNode>& nodes, std::span<const double> features) {
  int i = 0;
  while (!nodes[i].leaf()) {
    i = features[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i];
}

nlohmann::json node_json(const std::vector<TreeNode>& nodes, int i, bool regression) {
  const auto& n = nodes[i];
  if (n.leaf()) {
    return regression ? nlohmann::json{{"value", n.value}} : nlohmann::json{{"label", n.label}};
  }
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(nodes, n.left, regression)},
          {"right", node_json(nodes, n.right, regression)}};
}

int node_from_json(const nlohmann::json& j, bool regression, std::vector<TreeNode>& nodes) {
  const int i = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("feature")) {
    nodes[i].feature = j.at("feature").get<int>();
    nodes[i].threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), regression, nodes);
    nodes[i].left = l;
    const int r = node_from_json(j.at("right"), regression, nodes);
    nodes[i].right = r;
  } else if (regression) {
    nodes[i].value = j.at("value").get<double>();
  } else {
    nodes[i].label = j.at("label").get<int>();
  }
  return i;
}

}  // namespace

nlohmann::json nodes_to_json(const std::vector<TreeNode>& nodes, bool regression) {
  return node_json(nodes, 0, regression);
}

std::vector<TreeNode> nodes_from_json(const nlohmann::json& root, bool regression) {
  std::vector<TreeNode> nodes;
  node_from_json(root, regression, nodes);
  return nodes;
}

DecisionTree DecisionTree::fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                               std::span<const std::size_t> rows, const TreeParams& params, Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("cannot fit a tree on zero rows");
  if (labels.size() != static_cast<std::size_t>(x.rows())) {
    throw std::invalid_argument("label count does not match feature rows");
  }
  for (auto r : rows) {
    if (labels[r] < 0 || labels[r] >= num_classes) throw std::invalid_argument("label out of range");
  }
  DecisionTree tree;
  tree.dimension_ = x.cols();
  tree.num_classes_ = num_classes;
  ClassificationBuilder builder(x, labels, num_classes, params, rng);
  builder.build({rows.begin(), rows.end()}, 0, tree.nodes_);
  return tree;
}

DecisionTree DecisionTree::stump(int dimension, int num_classes, int feature, double threshold,
                                 int left_label, int right_label) {
  DecisionTree t;
  t.dimension_ = dimension;
  t.num_classes_ = num_classes;
  t.nodes_.resize(3);
  t.nodes_[0].feature = feature;
  t.nodes_[0].threshold = threshold;
  t.nodes_[0].left = 1;
  t.nodes_[0].right = 2;
  t.nodes_[1].label = left_label;
  t.nodes_[2].label = right_label;
  return t;
}

int DecisionTree::predict(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(dimension_)) {
    throw std::invalid_argument("tree expects " + std::to_string(dimension_) + " features");
  }
  return descend(nodes_, features).label;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].leaf()) continue;
    d[nodes_[i].left] = d[nodes_[i].right] = d[i] + 1;
    deepest = std::max(deepest, d[i] + 1);
  }
  return deepest;
}

nlohmann::json DecisionTree::to_json() const {
  return {{"dimension", dimension_}, {"num_classes", num_classes_}, {"root", nodes_to_json(nodes_, false)}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
  DecisionTree t;
  t.dimension_ = j.at("dimension").get<int>();
  t.num_classes_ = j.at("num_classes").get<int>();
  t.nodes_ = nodes_from_json(j.at("root"), false);
  return t;
}

RegressionTree RegressionTree::fit(const nn::Matrix& x, std::span<const double> gradients,
                                   std::span<const double> hessians, std::span<const std::size_t> rows,
                                   int max_depth, int min_samples_leaf, double leaf_scale) {
  if (rows.empty()) throw std::invalid_argument("cannot fit a tree on zero rows");
  RegressionTree tree;
  RegressionBuilder builder(x, gradients, hessians, max_depth, min_samples_leaf, leaf_scale);
  builder.build({rows.begin(), rows.end()}, 0, tree.nodes_);
  return tree;
}

double RegressionTree::predict(std::span<const double> features) const {
  return descend(nodes_, features).value;
}

nlohmann::json RegressionTree::to_json() const { return nodes_to_json(nodes_, true); }

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree t;
  t.nodes_ = nodes_from_json(j, true);
  return t;
}

}  // namespace edgeoff::detect
