#pragma once

// False-state-injection adversary. The attacker estimates the benign
// distribution of each station's advertised data rate, then reports values
// drawn from (or biased toward) a normal whose mean is pushed up by
// sqrt(2 * gamma) standard deviations.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/dqn.hpp"
#include "edgeoff/grid_env.hpp"
#include "edgeoff/rng.hpp"

namespace edgeoff::attack {

struct FeatureStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;

  bool operator==(const FeatureStats&) const = default;
  nlohmann::json to_json() const;
  static FeatureStats from_json(const nlohmann::json& j);
};

/// Reconnaissance result, keyed by station index.
using StationStats = std::map<int, FeatureStats>;

enum class PoisonMode {
  kShift,     // bias the true value by the mean shift
  kResample,  // replace with a fresh draw from the attacked distribution
};

std::string to_string(PoisonMode mode);
PoisonMode poison_mode_from_string(const std::string& s);

inline constexpr std::size_t kMaxTargets = 3;

struct AttackConfig {
  std::vector<int> targets;
  double gamma = 0.0;
  PoisonMode mode = PoisonMode::kShift;

  bool benign() const { return targets.empty(); }
  /// Throws on duplicate/out-of-range targets, more than three targets or a
  /// negative gamma.
  void validate(int num_stations) const;
};

/// Sample mean and unbiased standard deviation. Needs at least two samples.
FeatureStats estimate_stats(std::span<const double> samples);

/// theta + sqrt(2 * gamma) * sigma. Throws on a negative gamma.
double attacked_mean(const FeatureStats& stats, double gamma);

/// One draw from N(attacked_mean, sigma^2).
double sample_attacked(Rng& rng, const FeatureStats& stats, double gamma);

/// Returns a copy of `state` with the data-rate entry of every targeted
/// station replaced according to the attack mode. Nothing else changes.
/// Throws std::invalid_argument when a target has no stats.
env::StateVector poison_state(const env::StateVector& state, const AttackConfig& config,
                              const StationStats& stats, Rng& rng);

/// Observes `n_observations` benign decisions of `decide` and estimates the
/// data-rate distribution of every station from the rates that station
/// advertised to meters it covers.
StationStats reconnoiter(const dqn::Decider& decide, env::OffloadEnv& env, int n_observations,
                         std::uint64_t seed);

/// Builds an evaluation hook that poisons each observation with its own
/// rng stream.
dqn::PoisonHook make_poison_hook(AttackConfig config, StationStats stats, std::uint64_t seed);

nlohmann::json to_json(const StationStats& stats);
StationStats station_stats_from_json(const nlohmann::json& j);

}  // namespace edgeoff::attack
