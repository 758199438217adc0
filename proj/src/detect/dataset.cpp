#include "edgeoff/detect/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "edgeoff/csv.hpp"

namespace edgeoff::detect {

void Dataset::add(std::vector<double> features, int label) {
  if (samples_.empty() && dimension_ == 0) dimension_ = static_cast<int>(features.size());
  if (features.size() != static_cast<std::size_t>(dimension_)) {
    throw std::invalid_argument("sample has " + std::to_string(features.size()) +
                                " features, dataset expects " + std::to_string(dimension_));
  }
  if (label < 0) throw std::invalid_argument("labels must be non-negative");
  samples_.push_back(LabeledSample{std::move(features), label});
}

int Dataset::num_classes() const {
  int top = -1;
  for (const auto& s : samples_) top = std::max(top, s.label);
  return top + 1;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (const auto& s : samples_) ++counts[s.label];
  return counts;
}

nn::Matrix Dataset::feature_matrix() const {
  nn::Matrix m(static_cast<int>(samples_.size()), dimension_);
  for (std::size_t r = 0; r < samples_.size(); ++r) {
    std::copy(samples_[r].features.begin(), samples_[r].features.end(),
              m.row(static_cast<int>(r)).begin());
  }
  return m;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out(dimension_);
  for (std::size_t i : indices) out.samples_.push_back(samples_.at(i));
  return out;
}

Dataset::Split Dataset::stratified_split(double test_fraction, std::uint64_t seed) const {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw std::invalid_argument("test_fraction must lie in [0, 1]");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes());
  for (std::size_t i = 0; i < samples_.size(); ++i) by_class[samples_[i].label].push_back(i);
  Rng rng(seed);
  Split split;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * members.size()));
    split.test.insert(split.test.end(), members.begin(), members.begin() + n_test);
    split.train.insert(split.train.end(), members.begin() + n_test, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void Dataset::write_csv(const std::string& path) const {
  std::string out;
  std::vector<std::string> header;
  for (int i = 0; i < dimension_; ++i) header.push_back("f" + std::to_string(i));
  header.push_back("label");
  out += csv::join_row(header);
  for (const auto& s : samples_) {
    std::vector<std::string> row;
    for (double v : s.features) row.push_back(csv::format_double(v));
    row.push_back(std::to_string(s.label));
    out += csv::join_row(row);
  }
  csv::write_file(path, out);
}

Dataset Dataset::read_csv(const std::string& path) {
  std::istringstream in(csv::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty dataset file");
  const auto header = csv::split_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw std::invalid_argument(path + ": header must end with 'label'");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < dim; ++i) {
    if (header[i] != "f" + std::to_string(i)) {
      throw std::invalid_argument(path + ": unexpected header field '" + header[i] + "'");
    }
  }
  Dataset ds(dim);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> f(dim);
    try {
      for (int i = 0; i < dim; ++i) f[i] = csv::parse_double(fields[i]);
      ds.add(std::move(f), std::stoi(fields.back()));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

std::vector<TaggedObservation> collect_observations(const dqn::Policy& policy, env::OffloadEnv& env,
                                                    const attack::AttackConfig& attack,
                                                    const attack::StationStats& stats, int count,
                                                    std::uint64_t seed) {
  attack.validate(env.num_stations());
  std::vector<TaggedObservation> out;
  out.reserve(count);
  dqn::PoisonHook hook;
  if (!attack.benign()) hook = attack::make_poison_hook(attack, stats, derive_seed(seed, 1));
  dqn::evaluate(policy, env, count, seed, hook, [&](const env::StateVector& s) {
    out.push_back(TaggedObservation{{s.values().begin(), s.values().end()}, attack.targets});
  });
  return out;
}

std::string to_string(LabelTask task) {
  return task == LabelTask::kBinary ? "binary" : "fine_grained";
}

Dataset gen_dataset(const dqn::Policy& policy, env::OffloadEnv& env,
                    const std::vector<attack::AttackConfig>& grid, const attack::StationStats& stats,
                    LabelTask task, int per_class, std::uint64_t seed) {
  if (per_class <= 0) throw std::invalid_argument("per_class must be positive");
  auto label_of = [task](const attack::AttackConfig& c) {
    if (c.benign()) return 0;
    if (task == LabelTask::kBinary) return 1;
    if (c.targets.size() != 1) {
      throw std::invalid_argument("fine-grained labels need single-target attack configs");
    }
    return c.targets.front() + 1;
  };
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < grid.size(); ++i) members[label_of(grid[i])].push_back(i);
  if (!members.count(0)) throw std::invalid_argument("attack grid must include the benign config");

  std::vector<int> quota(grid.size(), 0);
  for (const auto& [label, idx] : members) {
    const int base = per_class / static_cast<int>(idx.size());
    int extra = per_class % static_cast<int>(idx.size());
    for (std::size_t i : idx) quota[i] = base + (extra-- > 0 ? 1 : 0);
  }

  Dataset ds(env.state_dim());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (quota[i] == 0) continue;
    const int label = label_of(grid[i]);
    for (auto& obs : collect_observations(policy, env, grid[i], stats, quota[i], derive_seed(seed, i))) {
      ds.add(std::move(obs.features), label);
    }
  }
  return ds;
}

}  // namespace edgeoff::detect
