#pragma once

// Central-difference check of DenseNet::backward, shared by the unit tests
// and the acceptance run.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "edgeoff/nn.hpp"

namespace edgeoff::testing {

struct GradCase {
  nn::DenseNet net;
  nn::Matrix inputs;
  std::vector<std::vector<double>> targets;
  nn::LossKind loss;
};

inline double total_loss(const GradCase& c, const nn::DenseNet& net) {
  const auto out = net.forward_batch(c.inputs);
  double sum = 0.0;
  for (int r = 0; r < out.rows(); ++r) sum += nn::loss_and_grad(c.loss, out.row(r), c.targets[r]).loss;
  return sum;
}

inline std::vector<double> analytic_grad(const GradCase& c) {
  nn::ForwardCache cache;
  const auto out = c.net.forward_batch(c.inputs, &cache);
  nn::Matrix g(out.rows(), out.cols());
  for (int r = 0; r < out.rows(); ++r) {
    const auto lg = nn::loss_and_grad(c.loss, out.row(r), c.targets[r]);
    std::copy(lg.grad.begin(), lg.grad.end(), g.row(r).begin());
  }
  return c.net.backward(cache, g);
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t zero_entries = 0;  // both values under the roundoff bound
};

/// Max over parameters of |a - n| / max(|a|, |n|, 1e-6). An entry where
/// both |a| and |n| lie below the central-difference roundoff bound
/// 64 * eps * max(|L|, 1) / h carries no relative information and is
/// counted in zero_entries instead.
inline GradCheckResult check_gradients(const GradCase& c, double h = 1e-5) {
  const auto analytic = analytic_grad(c);
  nn::DenseNet probe = c.net;
  const double roundoff =
      64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(total_loss(c, c.net)), 1.0) / h;
  GradCheckResult r;
  for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
    const double orig = probe.parameters()[i];
    probe.parameters()[i] = orig + h;
    const double up = total_loss(c, probe);
    probe.parameters()[i] = orig - h;
    const double down = total_loss(c, probe);
    probe.parameters()[i] = orig;
    const double numeric = (up - down) / (2 * h);
    if (std::abs(analytic[i]) < roundoff && std::abs(numeric) < roundoff) {
      ++r.zero_entries;
      continue;
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic[i] - numeric) / denom);
  }
  return r;
}

inline double max_relative_error(const GradCase& c, double h = 1e-5) {
  return check_gradients(c, h).max_relative_error;
}

/// Random case: He-uniform net, inputs in [-1, 1], targets suited to the loss.
/// Hinge targets are drawn so that no margin sits within 1e-3 of the kink.
inline GradCase random_case(std::vector<int> sizes, nn::OutputActivation act, nn::LossKind loss,
                            int batch, Rng& rng) {
  GradCase c{nn::DenseNet::he_uniform(sizes, act, rng), nn::Matrix(batch, sizes.front()), {}, loss};
  for (auto& b : c.net.parameters()) {
    // non-zero biases so the check covers them too
    if (b == 0.0) b = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : c.inputs.data()) v = u(rng);
  const int out = sizes.back();
  const auto outputs = c.net.forward_batch(c.inputs);
  for (int r = 0; r < batch; ++r) {
    std::vector<double> t(out, 0.0);
    switch (loss) {
      case nn::LossKind::kMse:
        for (auto& x : t) x = u(rng);
        break;
      case nn::LossKind::kCrossEntropy:
        t[std::uniform_int_distribution<int>(0, out - 1)(rng)] = 1.0;
        break;
      case nn::LossKind::kHinge:
        for (int j = 0; j < out; ++j) {
          t[j] = u(rng) < 0 ? -1.0 : 1.0;
          if (std::abs(1.0 - t[j] * outputs(r, j)) < 1e-3) t[j] = -t[j];
        }
        break;
    }
    c.targets.push_back(t);
  }
  return c;
}

}  // namespace edgeoff::testing
