#include "edgeoff/detect/metrics.hpp"

#include <stdexcept>
#include <string>

namespace edgeoff::detect {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int actual, int predicted) {
  if (actual < 0 || actual >= classes_ || predicted < 0 || predicted >= classes_) {
    throw std::out_of_range("label outside confusion matrix: " + std::to_string(actual) + "/" +
                            std::to_string(predicted));
  }
  ++counts_[index(actual, predicted)];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int actual) const {
  std::int64_t t = 0;
  for (int p = 0; p < classes_; ++p) t += at(actual, p);
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
  std::int64_t t = 0;
  for (int a = 0; a < classes_; ++a) t += at(a, predicted);
  return t;
}

ClassScore score_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  ClassScore s;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double denom = s.precision + s.recall;
  s.f_measure = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  Metrics m;
  std::int64_t correct = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const auto tp = cm.at(c, c);
    correct += tp;
    const auto s = score_counts(tp, cm.col_sum(c) - tp, cm.row_sum(c) - tp);
    m.per_class.push_back(s);
    m.macro.precision += s.precision;
    m.macro.recall += s.recall;
    m.macro.f_measure += s.f_measure;
  }
  const double n = cm.num_classes();
  m.macro.precision /= n;
  m.macro.recall /= n;
  m.macro.f_measure /= n;
  const auto total = cm.total();
  m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return m;
}

}  // namespace edgeoff::detect
