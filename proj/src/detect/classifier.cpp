#include "edgeoff/detect/classifier.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace edgeoff::detect {

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kDecisionTree: return "dt";
    case ClassifierKind::kRandomForest: return "rf";
    case ClassifierKind::kGradientBoosting: return "gbt";
    case ClassifierKind::kLinearSvm: return "svm";
    case ClassifierKind::kMlp: return "mlp";
  }
  return "?";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
  for (auto k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown classifier kind: " + s);
}

ClassifierModel::ClassifierModel(Impl impl, int dimension, int num_classes)
    : impl_(std::move(impl)), dimension_(dimension), num_classes_(num_classes) {}

ClassifierKind ClassifierModel::kind() const { return kAllKinds[impl_.index()]; }

int ClassifierModel::predict(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(dimension_)) {
    throw std::invalid_argument("classifier expects " + std::to_string(dimension_) +
                                " features, got " + std::to_string(features.size()));
  }
  return std::visit([&](const auto& m) { return m.predict(features); }, impl_);
}

nlohmann::json ClassifierModel::to_json() const {
  return {{"kind", to_string(kind())},
          {"dimension", dimension_},
          {"num_classes", num_classes_},
          {"model", std::visit([](const auto& m) { return m.to_json(); }, impl_)}};
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& j) {
  const auto kind = classifier_kind_from_string(j.at("kind").get<std::string>());
  const auto& body = j.at("model");
  Impl impl = [&]() -> Impl {
    switch (kind) {
      case ClassifierKind::kDecisionTree: return DecisionTree::from_json(body);
      case ClassifierKind::kRandomForest: return RandomForest::from_json(body);
      case ClassifierKind::kGradientBoosting: return GradientBoosting::from_json(body);
      case ClassifierKind::kLinearSvm: return LinearSvm::from_json(body);
      case ClassifierKind::kMlp: return MlpClassifier::from_json(body);
    }
    throw std::invalid_argument("unknown classifier kind");
  }();
  return ClassifierModel(std::move(impl), j.at("dimension").get<int>(), j.at("num_classes").get<int>());
}

ClassifierModel train(ClassifierKind kind, const Dataset& data, const ClassifierParams& params,
                      std::uint64_t seed) {
  const auto labels = data.labels();
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw std::invalid_argument("training data holds a single class");
  const auto x = data.feature_matrix();
  const int classes = data.num_classes();
  const auto norm = params.normalization.scale.empty() ? dqn::Normalization::identity(data.dimension())
                                                       : params.normalization;
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

  Rng rng(seed);
  ClassifierModel::Impl impl = [&]() -> ClassifierModel::Impl {
    switch (kind) {
      case ClassifierKind::kDecisionTree:
        return DecisionTree::fit(x, labels, classes, rows, params.tree, rng);
      case ClassifierKind::kRandomForest:
        return RandomForest::fit(x, labels, classes, params.forest, seed);
      case ClassifierKind::kGradientBoosting:
        return GradientBoosting::fit(x, labels, classes, params.boosting);
      case ClassifierKind::kLinearSvm:
        return LinearSvm::fit(x, labels, classes, norm, params.svm, seed);
      case ClassifierKind::kMlp:
        return MlpClassifier::fit(x, labels, classes, norm, params.mlp, seed);
    }
    throw std::invalid_argument("unknown classifier kind");
  }();
  return ClassifierModel(std::move(impl), data.dimension(), classes);
}

Evaluation evaluate(const ClassifierModel& model, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  Evaluation e{ConfusionMatrix(std::max(model.num_classes(), test.num_classes())), {}};
  for (const auto& s : test.samples()) e.confusion.add(s.label, model.predict(s.features));
  e.metrics = compute_metrics(e.confusion);
  return e;
}

StationDetector StationDetector::fit(const std::vector<TaggedObservation>& samples,
                                     int num_stations, const ForestParams& params,
                                     std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("station detector: no samples");
  const int d = static_cast<int>(samples.front().features.size());
  nn::Matrix x(static_cast<int>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != static_cast<std::size_t>(d)) {
      throw std::invalid_argument("station detector: inconsistent feature dimension");
    }
    std::copy(samples[i].features.begin(), samples[i].features.end(), x.row(static_cast<int>(i)).begin());
  }
  std::vector<RandomForest> forests;
  std::vector<int> labels(samples.size());
  for (int k = 0; k < num_stations; ++k) {
    int positives = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& t = samples[i].targets;
      labels[i] = std::find(t.begin(), t.end(), k) != t.end() ? 1 : 0;
      positives += labels[i];
    }
    if (positives == 0 || positives == static_cast<int>(samples.size())) {
      throw std::invalid_argument("station detector: station " + std::to_string(k) +
                                  " has single-class training data");
    }
    forests.push_back(RandomForest::fit(x, labels, 2, params, derive_seed(seed, static_cast<std::uint64_t>(k))));
  }
  return StationDetector(std::move(forests));
}

StationDetector::StationDetector(std::vector<RandomForest> forests) : forests_(std::move(forests)) {}

std::vector<double> StationDetector::scores(std::span<const double> features) const {
  std::vector<double> s;
  s.reserve(forests_.size());
  for (const auto& f : forests_) s.push_back(f.vote_fraction(features, 1));
  return s;
}

std::vector<bool> StationDetector::flags(std::span<const double> features) const {
  std::vector<bool> out;
  for (double s : scores(features)) out.push_back(s > 0.5);
  return out;
}

nlohmann::json StationDetector::to_json() const {
  nlohmann::json forests = nlohmann::json::array();
  for (const auto& f : forests_) forests.push_back(f.to_json());
  return {{"forests", forests}};
}

StationDetector StationDetector::from_json(const nlohmann::json& j) {
  std::vector<RandomForest> forests;
  for (const auto& f : j.at("forests")) forests.push_back(RandomForest::from_json(f));
  return StationDetector(std::move(forests));
}

}  // namespace edgeoff::detect
