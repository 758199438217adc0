#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "edgeoff/detect/dataset.hpp"
#include "edgeoff/detect/ensembles.hpp"
#include "edgeoff/detect/metrics.hpp"
#include "edgeoff/detect/nn_models.hpp"
#include "edgeoff/detect/tree.hpp"

namespace edgeoff::detect {

enum class ClassifierKind { kDecisionTree, kRandomForest, kGradientBoosting, kLinearSvm, kMlp };

inline constexpr std::array<ClassifierKind, 5> kAllKinds{
    ClassifierKind::kDecisionTree, ClassifierKind::kRandomForest, ClassifierKind::kGradientBoosting,
    ClassifierKind::kLinearSvm, ClassifierKind::kMlp};

/// Short names used in reports and file names: dt, rf, gbt, svm, mlp.
std::string to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& s);

struct ClassifierParams {
  TreeParams tree;
  ForestParams forest;
  BoostingParams boosting;
  SvmParams svm;
  MlpParams mlp;
  /// Applied before the SVM and MLP; trees see raw features. Empty means identity.
  dqn::Normalization normalization;
};

class ClassifierModel {
 public:
  using Impl = std::variant<DecisionTree, RandomForest, GradientBoosting, LinearSvm, MlpClassifier>;

  ClassifierModel(Impl impl, int dimension, int num_classes);

  ClassifierKind kind() const;
  int dimension() const { return dimension_; }
  int num_classes() const { return num_classes_; }
  const Impl& impl() const { return impl_; }

  /// Throws std::invalid_argument when the feature count differs from training.
  int predict(std::span<const double> features) const;

  nlohmann::json to_json() const;
  static ClassifierModel from_json(const nlohmann::json& j);

 private:
  Impl impl_;
  int dimension_ = 0;
  int num_classes_ = 0;
};

/// Fits a model of the given kind. Requires at least two distinct labels.
ClassifierModel train(ClassifierKind kind, const Dataset& data, const ClassifierParams& params,
                      std::uint64_t seed);

struct Evaluation {
  ConfusionMatrix confusion;
  Metrics metrics;
};

/// Confusion matrix over max(model, data) classes.
Evaluation evaluate(const ClassifierModel& model, const Dataset& test);

/// One binary random forest per station, each answering "is station k
/// poisoned". Scores are the fraction of trees voting yes.
class StationDetector {
 public:
  static StationDetector fit(const std::vector<TaggedObservation>& samples, int num_stations,
                             const ForestParams& params, std::uint64_t seed);
  explicit StationDetector(std::vector<RandomForest> forests);

  std::vector<double> scores(std::span<const double> features) const;
  /// score > 0.5 per station.
  std::vector<bool> flags(std::span<const double> features) const;
  int num_stations() const { return static_cast<int>(forests_.size()); }

  nlohmann::json to_json() const;
  static StationDetector from_json(const nlohmann::json& j);

 private:
  std::vector<RandomForest> forests_;
};

}  // namespace edgeoff::detect
