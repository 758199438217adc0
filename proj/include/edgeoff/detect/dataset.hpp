#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeoff/dqn.hpp"
#include "edgeoff/fsi_attack.hpp"
#include "edgeoff/nn.hpp"

namespace edgeoff::detect {

struct LabeledSample {
  std::vector<double> features;
  int label = 0;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(int dimension) : dimension_(dimension) {}

  void add(std::vector<double> features, int label);

  int dimension() const { return dimension_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<LabeledSample>& samples() const { return samples_; }

  /// 1 + largest label.
  int num_classes() const;
  std::vector<std::size_t> class_counts() const;
  nn::Matrix feature_matrix() const;
  std::vector<int> labels() const;

  Dataset subset(const std::vector<std::size_t>& indices) const;

  struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
  };
  /// Per-class shuffle, then round(test_fraction * class size) to test.
  Split stratified_split(double test_fraction, std::uint64_t seed) const;

  /// Header f0..f{d-1},label; shortest round-trip decimal floats.
  void write_csv(const std::string& path) const;
  static Dataset read_csv(const std::string& path);

 private:
  int dimension_ = 0;
  std::vector<LabeledSample> samples_;
};

/// An observation seen by the agent together with the stations whose state
/// was poisoned when it was recorded.
struct TaggedObservation {
  std::vector<double> features;
  std::vector<int> targets;
};

/// Runs the policy greedily for `count` tasks under `attack` and records the
/// (possibly poisoned) observations it acted on.
std::vector<TaggedObservation> collect_observations(const dqn::Policy& policy, env::OffloadEnv& env,
                                                    const attack::AttackConfig& attack,
                                                    const attack::StationStats& stats, int count,
                                                    std::uint64_t seed);

enum class LabelTask {
  kBinary,       // 0 benign, 1 attacked
  kFineGrained,  // 0 benign, k + 1 when station k alone is attacked
};

std::string to_string(LabelTask task);

/// Builds a class-balanced dataset: every label receives `per_class`
/// samples, shared evenly among the grid configs that produce that label.
/// The grid must contain the benign config. Fine-grained labelling rejects
/// multi-target configs.
Dataset gen_dataset(const dqn::Policy& policy, env::OffloadEnv& env,
                    const std::vector<attack::AttackConfig>& grid, const attack::StationStats& stats,
                    LabelTask task, int per_class, std::uint64_t seed);

}  // namespace edgeoff::detect
