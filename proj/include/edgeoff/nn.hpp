#pragma once

// Small dense-network numerics: row-major matrices, a fully connected ReLU
// network with exact backpropagation, standard losses and first-order
// optimizers. Parameters of a network live in one flat buffer so that
// optimizers and finite-difference checks can treat them uniformly.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/rng.hpp"

namespace edgeoff::nn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  Matrix(int rows, int cols, std::vector<double> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

enum class OutputActivation { kIdentity, kSoftmax };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

/// Per-layer activations recorded by a batched forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer (post-activation of the previous)
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;               // final (post output-activation) values
};

/// Fully connected network: ReLU on hidden layers, identity or softmax on
/// the output. Layer l maps n_{l-1} inputs to n_l outputs with a weight
/// matrix stored row-major as n_l x n_{l-1} followed by n_l biases.
class DenseNet {
 public:
  DenseNet() = default;
  /// Zero-initialized network.
  DenseNet(std::vector<int> sizes, OutputActivation output);
  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static DenseNet he_uniform(std::vector<int> sizes, OutputActivation output, Rng& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  OutputActivation output_activation() const { return output_; }

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> biases(int layer);
  std::span<const double> biases(int layer) const;

  /// Single-sample forward pass.
  std::vector<double> forward(std::span<const double> input) const;
  /// Batched forward pass; row r of `inputs` is one sample.
  Matrix forward_batch(const Matrix& inputs, ForwardCache* cache = nullptr) const;
  /// Gradients of the loss w.r.t. all parameters, laid out like parameters().
  /// `output_grad` holds dLoss/dOutput per sample (post output activation).
  std::vector<double> backward(const ForwardCache& cache, const Matrix& output_grad) const;

  bool operator==(const DenseNet&) const = default;

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& j);

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1];
  }

  std::vector<int> sizes_;
  OutputActivation output_ = OutputActivation::kIdentity;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Losses ----------------------------------------------------------------------

enum class LossKind { kMse, kCrossEntropy, kHinge };

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dPrediction
};

/// MSE: mean squared error over outputs.
/// Cross-entropy: -sum t*log(p) with log clamped at 1e-12; prediction is a
/// probability vector, target a distribution (usually one-hot).
/// Hinge: sum max(0, 1 - t*f) with targets in {-1, +1}.
LossResult loss_and_grad(LossKind kind, std::span<const double> prediction,
                         std::span<const double> target);

std::vector<double> softmax(std::span<const double> logits);

// Optimizers ------------------------------------------------------------------

struct OptimizerConfig {
  enum class Kind { kSgdMomentum, kAdam };
  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::size_t parameter_count);

  /// One update of `params` in place from `grads`.
  void apply_update(std::span<double> params, std::span<const double> grads);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<double> first_;   // velocity (SGD) or first moment (Adam)
  std::vector<double> second_;  // Adam second moment
  std::int64_t steps_ = 0;
};

}  // namespace edgeoff::nn
