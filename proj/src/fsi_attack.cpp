#include "edgeoff/fsi_attack.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

namespace edgeoff::attack {

nlohmann::json FeatureStats::to_json() const {
  return {{"mean", mean}, {"stddev", stddev}, {"count", count}};
}

FeatureStats FeatureStats::from_json(const nlohmann::json& j) {
  return FeatureStats{j.at("mean").get<double>(), j.at("stddev").get<double>(),
                      j.at("count").get<std::size_t>()};
}

std::string to_string(PoisonMode mode) {
  return mode == PoisonMode::kShift ? "shift" : "resample";
}

PoisonMode poison_mode_from_string(const std::string& s) {
  if (s == "shift") return PoisonMode::kShift;
  if (s == "resample") return PoisonMode::kResample;
  throw std::invalid_argument("unknown poison mode '" + s + "' (expected shift or resample)");
}

void AttackConfig::validate(int num_stations) const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("attack gamma must be non-negative");
  if (targets.size() > kMaxTargets) {
    throw std::invalid_argument("an attack may target at most 3 stations");
  }
  std::set<int> seen;
  for (int t : targets) {
    if (t < 0 || t >= num_stations) {
      throw std::invalid_argument("attack target " + std::to_string(t) + " is not a station");
    }
    if (!seen.insert(t).second) throw std::invalid_argument("duplicate attack target");
  }
}

FeatureStats estimate_stats(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("estimate_stats needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return FeatureStats{mean, std::sqrt(ss / (n - 1.0)), samples.size()};
}

double attacked_mean(const FeatureStats& stats, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("attack gamma must be non-negative");
  return stats.mean + std::sqrt(2.0 * gamma) * stats.stddev;
}

double sample_attacked(Rng& rng, const FeatureStats& stats, double gamma) {
  const double mu = attacked_mean(stats, gamma);
  if (stats.stddev == 0.0) return mu;
  return std::normal_distribution<double>(mu, stats.stddev)(rng);
}

env::StateVector poison_state(const env::StateVector& state, const AttackConfig& config,
                              const StationStats& stats, Rng& rng) {
  env::StateVector out = state;
  for (int k : config.targets) {
    auto it = stats.find(k);
    if (it == stats.end()) {
      throw std::invalid_argument("no reconnaissance stats for targeted station " + std::to_string(k));
    }
    if (config.mode == PoisonMode::kShift) {
      out.data_rate(k) += std::sqrt(2.0 * config.gamma) * it->second.stddev;
    } else {
      out.data_rate(k) = sample_attacked(rng, it->second, config.gamma);
    }
  }
  return out;
}

StationStats reconnoiter(const dqn::Decider& decide, env::OffloadEnv& env, int n_observations,
                         std::uint64_t seed) {
  std::vector<std::vector<double>> seen(env.num_stations());
  dqn::evaluate(decide, env, n_observations, seed, {}, [&seen](const env::StateVector& s) {
    for (int k = 0; k < s.num_stations(); ++k) {
      if (s.data_rate(k) > 0.0) seen[k].push_back(s.data_rate(k));
    }
  });
  StationStats stats;
  for (int k = 0; k < env.num_stations(); ++k) {
    if (seen[k].size() >= 2) stats[k] = estimate_stats(seen[k]);
  }
  return stats;
}

dqn::PoisonHook make_poison_hook(AttackConfig config, StationStats stats, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [config = std::move(config), stats = std::move(stats), rng](const env::StateVector& s) {
    return poison_state(s, config, stats, *rng);
  };
}

nlohmann::json to_json(const StationStats& stats) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [k, s] : stats) {
    auto row = s.to_json();
    row["station"] = k;
    j.push_back(row);
  }
  return j;
}

StationStats station_stats_from_json(const nlohmann::json& j) {
  StationStats out;
  for (const auto& row : j) out[row.at("station").get<int>()] = FeatureStats::from_json(row);
  return out;
}

}  // namespace edgeoff::attack
