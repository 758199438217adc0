#include "edgeoff/detect/nn_models.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace edgeoff::detect {
namespace {

nn::Matrix normalized(const nn::Matrix& x, const dqn::Normalization& norm) {
  nn::Matrix out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const auto v = norm.apply(x.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

void check_fit_inputs(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                      const dqn::Normalization& norm) {
  if (num_classes < 2) throw std::invalid_argument("classifier needs at least two classes");
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw std::invalid_argument("classifier: feature rows and labels disagree");
  }
  if (norm.scale.size() != static_cast<std::size_t>(x.cols())) {
    throw std::invalid_argument("classifier: normalization dimension mismatch");
  }
}

}  // namespace

LinearSvm LinearSvm::fit(const nn::Matrix& x, std::span<const int> labels, int num_classes,
                         const dqn::Normalization& norm, const SvmParams& params,
                         std::uint64_t seed) {
  check_fit_inputs(x, labels, num_classes, norm);
  LinearSvm model;
  model.norm_ = norm;
  model.net_ = nn::DenseNet({x.cols(), num_classes}, nn::OutputActivation::kIdentity);
  const nn::Matrix z = normalized(x, norm);
  const int d = x.cols();

  Rng rng(seed);
  std::vector<std::size_t> order(z.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto w = model.net_.weights(0);
  auto b = model.net_.biases(0);
  std::vector<double> target(num_classes);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const auto xi = z.row(static_cast<int>(i));
      const auto f = model.net_.forward(xi);
      for (int c = 0; c < num_classes; ++c) target[c] = labels[i] == c ? 1.0 : -1.0;
      const auto loss = nn::loss_and_grad(nn::LossKind::kHinge, f, target);
      for (int c = 0; c < num_classes; ++c) {
        auto wc = w.subspan(static_cast<std::size_t>(c) * d, d);
        const double g = loss.grad[c];
        for (int j = 0; j < d; ++j) wc[j] -= params.learning_rate * (g * xi[j] + params.l2 * wc[j]);
        b[c] -= params.learning_rate * g;
      }
    }
  }
  return model;
}

std::vector<double> LinearSvm::scores(std::span<const double> features) const {
  return net_.forward(norm_.apply(features));
}

int LinearSvm::predict(std::span<const double> features) const {
  return dqn::argmax(scores(features));
}

nlohmann::json LinearSvm::to_json() const {
  return {{"network", net_.to_json()}, {"normalization", norm_.to_json()}};
}

LinearSvm LinearSvm::from_json(const nlohmann::json& j) {
  LinearSvm m;
  m.net_ = nn::DenseNet::from_json(j.at("network"));
  m.norm_ = dqn::Normalization::from_json(j.at("normalization"));
  return m;
}

MlpClassifier MlpClassifier::fit(const nn::Matrix& x, std::span<const int> labels,
                                 int num_classes, const dqn::Normalization& norm,
                                 const MlpParams& params, std::uint64_t seed) {
  check_fit_inputs(x, labels, num_classes, norm);
  if (params.batch_size < 1) throw std::invalid_argument("mlp batch_size must be positive");
  Rng rng(seed);
  MlpClassifier model;
  model.norm_ = norm;
  model.net_ = nn::DenseNet::he_uniform({x.cols(), params.hidden, num_classes},
                                        nn::OutputActivation::kSoftmax, rng);
  const nn::Matrix z = normalized(x, norm);
  nn::OptimizerConfig opt_config;
  opt_config.kind = nn::OptimizerConfig::Kind::kAdam;
  opt_config.learning_rate = params.learning_rate;
  nn::Optimizer opt(opt_config, model.net_.parameter_count());

  const int n = z.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> target(num_classes);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += params.batch_size) {
      const int m = std::min(params.batch_size, n - start);
      nn::Matrix batch(m, z.cols());
      for (int r = 0; r < m; ++r) {
        const auto src = z.row(static_cast<int>(order[start + r]));
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }
      nn::ForwardCache cache;
      const auto out = model.net_.forward_batch(batch, &cache);
      nn::Matrix grad(m, num_classes);
      for (int r = 0; r < m; ++r) {
        const int label = labels[order[start + r]];
        for (int c = 0; c < num_classes; ++c) target[c] = label == c ? 1.0 : 0.0;
        const auto loss = nn::loss_and_grad(nn::LossKind::kCrossEntropy, out.row(r), target);
        for (int c = 0; c < num_classes; ++c) grad(r, c) = loss.grad[c] / m;
      }
      const auto grads = model.net_.backward(cache, grad);
      opt.apply_update(model.net_.parameters(), grads);
    }
  }
  return model;
}

std::vector<double> MlpClassifier::probabilities(std::span<const double> features) const {
  return net_.forward(norm_.apply(features));
}

int MlpClassifier::predict(std::span<const double> features) const {
  return dqn::argmax(probabilities(features));
}

nlohmann::json MlpClassifier::to_json() const {
  return {{"network", net_.to_json()}, {"normalization", norm_.to_json()}};
}

MlpClassifier MlpClassifier::from_json(const nlohmann::json& j) {
  MlpClassifier m;
  m.net_ = nn::DenseNet::from_json(j.at("network"));
  m.norm_ = dqn::Normalization::from_json(j.at("normalization"));
  return m;
}

}  // namespace edgeoff::detect
