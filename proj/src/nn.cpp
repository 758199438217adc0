#include "edgeoff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgeoff::nn {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("matrix data length does not match rows * cols");
  }
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string to_string(OutputActivation a) {
  return a == OutputActivation::kSoftmax ? "softmax" : "identity";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "identity") return OutputActivation::kIdentity;
  if (s == "softmax") return OutputActivation::kSoftmax;
  throw std::invalid_argument("unknown output activation '" + s + "'");
}

DenseNet::DenseNet(std::vector<int> sizes, OutputActivation output)
    : sizes_(std::move(sizes)), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_.assign(total, 0.0);
}

DenseNet DenseNet::he_uniform(std::vector<int> sizes, OutputActivation output, Rng& rng) {
  DenseNet net(std::move(sizes), output);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double bound = std::sqrt(6.0 / net.sizes_[l]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

std::span<double> DenseNet::weights(int layer) {
  return {params_.data() + weight_offset(layer),
          static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1]};
}
std::span<const double> DenseNet::weights(int layer) const {
  return {params_.data() + weight_offset(layer),
          static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1]};
}
std::span<double> DenseNet::biases(int layer) {
  return {params_.data() + bias_offset(layer), static_cast<std::size_t>(sizes_[layer + 1])};
}
std::span<const double> DenseNet::biases(int layer) const {
  return {params_.data() + bias_offset(layer), static_cast<std::size_t>(sizes_[layer + 1])};
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
  Matrix in(1, static_cast<int>(input.size()), std::vector<double>(input.begin(), input.end()));
  Matrix out = forward_batch(in);
  return {out.data().begin(), out.data().end()};
}

Matrix DenseNet::forward_batch(const Matrix& inputs, ForwardCache* cache) const {
  if (inputs.cols() != input_size()) {
    throw std::invalid_argument("forward: input width " + std::to_string(inputs.cols()) +
                                " does not match network input " + std::to_string(input_size()));
  }
  const int batch = inputs.rows();
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = inputs;
  for (int l = 0; l < num_layers(); ++l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const auto w = weights(l);
    const auto b = biases(l);
    Matrix z(batch, n_out);
    for (int r = 0; r < batch; ++r) {
      const auto x = a.row(r);
      auto zr = z.row(r);
      for (int j = 0; j < n_out; ++j) {
        const double* wj = w.data() + static_cast<std::size_t>(j) * n_in;
        double s = b[j];
        for (int i = 0; i < n_in; ++i) s += wj[i] * x[i];
        zr[j] = s;
      }
    }
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    const bool last = l + 1 == num_layers();
    if (!last) {
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
    } else if (output_ == OutputActivation::kSoftmax) {
      for (int r = 0; r < batch; ++r) {
        const auto p = softmax(z.row(r));
        std::copy(p.begin(), p.end(), z.row(r).begin());
      }
    }
    a = std::move(z);
  }
  if (cache) cache->output = a;
  return a;
}

std::vector<double> DenseNet::backward(const ForwardCache& cache, const Matrix& output_grad) const {
  if (cache.pre.size() != static_cast<std::size_t>(num_layers())) {
    throw std::invalid_argument("backward: cache does not match network depth");
  }
  if (output_grad.cols() != output_size() || output_grad.rows() != cache.output.rows()) {
    throw std::invalid_argument("backward: output gradient shape mismatch");
  }
  const int batch = output_grad.rows();
  std::vector<double> grads(params_.size(), 0.0);

  // Gradient w.r.t. the last pre-activation.
  Matrix delta = output_grad;
  if (output_ == OutputActivation::kSoftmax) {
    for (int r = 0; r < batch; ++r) {
      const auto p = cache.output.row(r);
      auto g = delta.row(r);
      double dot = 0.0;
      for (int j = 0; j < output_size(); ++j) dot += g[j] * p[j];
      for (int j = 0; j < output_size(); ++j) g[j] = p[j] * (g[j] - dot);
    }
  }

  for (int l = num_layers() - 1; l >= 0; --l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const Matrix& x = cache.inputs[l];
    const auto w = weights(l);
    double* gw = grads.data() + weight_offset(l);
    double* gb = grads.data() + bias_offset(l);
    for (int r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      const auto xr = x.row(r);
      for (int j = 0; j < n_out; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        gb[j] += dj;
        double* gwj = gw + static_cast<std::size_t>(j) * n_in;
        for (int i = 0; i < n_in; ++i) gwj[i] += dj * xr[i];
      }
    }
    if (l == 0) break;
    Matrix prev(batch, n_in);
    const Matrix& z_prev = cache.pre[l - 1];
    for (int r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      auto pr = prev.row(r);
      for (int j = 0; j < n_out; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        const double* wj = w.data() + static_cast<std::size_t>(j) * n_in;
        for (int i = 0; i < n_in; ++i) pr[i] += dj * wj[i];
      }
      const auto zr = z_prev.row(r);
      for (int i = 0; i < n_in; ++i) {
        if (zr[i] <= 0.0) pr[i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < num_layers(); ++l) {
    const auto w = weights(l);
    const auto b = biases(l);
    layers.push_back({{"weights", std::vector<double>(w.begin(), w.end())},
                      {"biases", std::vector<double>(b.begin(), b.end())}});
  }
  std::vector<std::string> activations(num_layers(), "relu");
  activations.back() = to_string(output_);
  return {{"layer_sizes", sizes_}, {"activations", activations}, {"layers", layers}};
}

DenseNet DenseNet::from_json(const nlohmann::json& j) {
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto activations = j.at("activations").get<std::vector<std::string>>();
    if (activations.size() + 1 != sizes.size()) {
      throw std::invalid_argument("activation count does not match layer count");
    }
    for (std::size_t l = 0; l + 1 < activations.size(); ++l) {
      if (activations[l] != "relu") throw std::invalid_argument("hidden activations must be relu");
    }
    DenseNet net(sizes, output_activation_from_string(activations.back()));
    const auto& layers = j.at("layers");
    if (layers.size() != static_cast<std::size_t>(net.num_layers())) {
      throw std::invalid_argument("layer record count does not match layer sizes");
    }
    for (int l = 0; l < net.num_layers(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("biases").get<std::vector<double>>();
      if (w.size() != net.weights(l).size() || b.size() != net.biases(l).size()) {
        throw std::invalid_argument("layer " + std::to_string(l) + " has wrong parameter count");
      }
      std::copy(w.begin(), w.end(), net.weights(l).begin());
      std::copy(b.begin(), b.end(), net.biases(l).begin());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed network document: ") + e.what());
  }
}

LossResult loss_and_grad(LossKind kind, std::span<const double> prediction,
                         std::span<const double> target) {
  if (prediction.size() != target.size()) {
    throw std::invalid_argument("loss: prediction and target lengths differ");
  }
  const std::size_t n = prediction.size();
  LossResult out;
  out.grad.assign(n, 0.0);
  switch (kind) {
    case LossKind::kMse:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = prediction[i] - target[i];
        out.loss += d * d / static_cast<double>(n);
        out.grad[i] = 2.0 * d / static_cast<double>(n);
      }
      break;
    case LossKind::kCrossEntropy:
      for (std::size_t i = 0; i < n; ++i) {
        if (target[i] == 0.0) continue;
        const double p = std::max(prediction[i], 1e-12);
        out.loss -= target[i] * std::log(p);
        out.grad[i] = prediction[i] > 1e-12 ? -target[i] / p : 0.0;
      }
      break;
    case LossKind::kHinge:
      for (std::size_t i = 0; i < n; ++i) {
        const double margin = 1.0 - target[i] * prediction[i];
        if (margin > 0.0) {
          out.loss += margin;
          out.grad[i] = -target[i];
        }
      }
      break;
  }
  return out;
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t parameter_count)
    : config_(config), first_(parameter_count, 0.0) {
  if (config_.kind == OptimizerConfig::Kind::kAdam) second_.assign(parameter_count, 0.0);
}

void Optimizer::apply_update(std::span<double> params, std::span<const double> grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    throw std::invalid_argument("optimizer: parameter/gradient size mismatch");
  }
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerConfig::Kind::kSgdMomentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = config_.momentum * first_[i] + grads[i];
      params[i] -= lr * first_[i];
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_[i] = b1 * first_[i] + (1.0 - b1) * grads[i];
    second_[i] = b2 * second_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = first_[i] / c1;
    const double v_hat = second_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

}  // namespace edgeoff::nn
