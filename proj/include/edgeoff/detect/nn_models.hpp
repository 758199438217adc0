#pragma once

// Gradient-trained classifiers built on nn::DenseNet. Both apply a fixed
// feature normalization before the network.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "edgeoff/dqn.hpp"
#include "edgeoff/nn.hpp"

namespace edgeoff::detect {

struct SvmParams {
  double learning_rate = 0.01;
  int epochs = 50;
  double l2 = 1e-4;
};

/// One-vs-rest linear scorers trained with per-sample SGD on the hinge loss
/// (targets +1 for the own class, -1 otherwise) plus an L2 weight penalty.
class LinearSvm {
 public:
  static LinearSvm fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                       const dqn::Normalization& norm, const SvmParams& params, std::uint64_t seed);

  std::vector<double> scores(std::span<const double> features) const;
  int predict(std::span<const double> features) const;

  const nn::DenseNet& net() const { return net_; }
  const dqn::Normalization& normalization() const { return norm_; }

  nlohmann::json to_json() const;
  static LinearSvm from_json(const nlohmann::json& j);

 private:
  nn::DenseNet net_;
  dqn::Normalization norm_;
};

struct MlpParams {
  int hidden = 64;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

/// d-hidden-C ReLU network with a softmax output, cross-entropy loss, Adam.
class MlpClassifier {
 public:
  static MlpClassifier fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                           const dqn::Normalization& norm, const MlpParams& params,
                           std::uint64_t seed);

  std::vector<double> probabilities(std::span<const double> features) const;
  int predict(std::span<const double> features) const;

  const nn::DenseNet& net() const { return net_; }

  nlohmann::json to_json() const;
  static MlpClassifier from_json(const nlohmann::json& j);

 private:
  nn::DenseNet net_;
  dqn::Normalization norm_;
};

}  // namespace edgeoff::detect
