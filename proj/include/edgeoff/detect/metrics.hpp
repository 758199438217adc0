#pragma once

#include <cstdint>
#include <vector>

namespace edgeoff::detect {

/// Rows are actual classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(int actual, int predicted);

  int num_classes() const { return classes_; }
  std::int64_t at(int actual, int predicted) const { return counts_[index(actual, predicted)]; }
  std::int64_t total() const;
  std::int64_t row_sum(int actual) const;
  std::int64_t col_sum(int predicted) const;

 private:
  std::size_t index(int a, int p) const { return static_cast<std::size_t>(a) * classes_ + p; }

  int classes_;
  std::vector<std::int64_t> counts_;
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

struct Metrics {
  std::vector<ClassScore> per_class;
  ClassScore macro;  // unweighted mean over classes
  double accuracy = 0.0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R); any zero denominator
/// scores 0.
ClassScore score_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);
Metrics compute_metrics(const ConfusionMatrix& cm);

}  // namespace edgeoff::detect
