#pragma once

// Simulation environment for offloading energy-demand-management (EDM)
// tasks from smart meters to overlapping edge base stations.
//
// The environment emits observations in physical units (bits, cycles,
// bits/s, seconds). Any scaling for learning happens inside the agent.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/rng.hpp"

namespace edgeoff::env {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

double distance(Position a, Position b);

/// One EDM job. Data sizes in bits, computation in CPU cycles.
struct EdmTask {
  std::int64_t id = 0;
  double demand_bits = 0.0;
  double monitor_bits = 0.0;
  double demand_cycles = 0.0;
  double monitor_cycles = 0.0;
  double qos_latency = 0.0;
  double timestamp = 0.0;
  int meter_id = 0;

  double total_bits() const { return demand_bits + monitor_bits; }
  double total_cycles() const { return demand_cycles + monitor_cycles; }
};

struct SmartMeter {
  int id = 0;
  Position position;
  double tx_power = 0.5;  // W
};

struct BaseStation {
  int id = 0;
  Position position;
  double bandwidth = 10e6;         // Hz
  double cpu_rate = 16e9;          // cycles/s
  double coverage_radius = 300.0;  // m
  double queue_backlog = 0.0;      // cycles
  double arrival_rate = 0.0;       // tasks/s, smoothed
  double processing_rate = 0.0;    // tasks/s

  bool covers(const SmartMeter& meter) const;
  /// Flags the stability condition lambda < mu as violated. Never halts.
  bool overloaded() const { return arrival_rate >= processing_rate; }
};

struct PathLoss {
  double reference_gain = 1e-4;
  double exponent = 4.0;
  double min_distance = 1.0;  // m
};

struct RadioParams {
  PathLoss path_loss;
  double noise_power = 1e-13;  // W
};

struct Topology {
  std::vector<SmartMeter> meters;
  std::vector<BaseStation> stations;
  RadioParams radio;
  // Row-major meters x stations.
  std::vector<char> coverage;

  int num_meters() const { return static_cast<int>(meters.size()); }
  int num_stations() const { return static_cast<int>(stations.size()); }
  bool covers(int meter, int station) const {
    return coverage[static_cast<std::size_t>(meter) * stations.size() + station] != 0;
  }
};

/// Builds coverage from geometry and rejects layouts that leave a meter
/// uncovered. Throws std::invalid_argument.
Topology make_topology(std::vector<SmartMeter> meters, std::vector<BaseStation> stations,
                       RadioParams radio);

struct CostParams {
  double xi = 0.5;
  double delta1 = 0.5;
  double delta2 = 0.5;

  /// delta1 = xi, delta2 = 1 - xi, so that the summed negative reward equals
  /// the weighted latency + energy objective.
  static CostParams balanced(double xi);
  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TaskRanges {
  Range demand_bits{100e3, 400e3};
  Range monitor_bits{0.5e6, 1e6};
  Range demand_cycles{0.1e9, 0.4e9};
  Range monitor_cycles{0.5e9, 1e9};
  double qos_latency = 1.0;  // s, identical for all tasks
};

/// Ordered observation [D_d, D_m, C_d, C_m, DR_1..DR_K, L_1..L_K, QoS].
class StateVector {
 public:
  StateVector() = default;
  StateVector(std::vector<double> values, int num_stations);

  static constexpr int kTaskFeatures = 4;
  static int dimension(int num_stations) { return 5 + 2 * num_stations; }
  static int data_rate_index(int station) { return kTaskFeatures + station; }
  static int latency_index(int station, int num_stations) {
    return kTaskFeatures + num_stations + station;
  }
  static int qos_index(int num_stations) { return kTaskFeatures + 2 * num_stations; }

  int num_stations() const { return num_stations_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double data_rate(int station) const { return values_[data_rate_index(station)]; }
  double& data_rate(int station) { return values_[data_rate_index(station)]; }
  double latency(int station) const { return values_[latency_index(station, num_stations_)]; }
  double qos() const { return values_[qos_index(num_stations_)]; }

  bool operator==(const StateVector&) const = default;

 private:
  std::vector<double> values_;
  int num_stations_ = 0;
};

// Cost model ----------------------------------------------------------------

/// g0 * d^(-alpha), with d clamped below at min_distance.
double channel_gain(const SmartMeter& meter, const BaseStation& station, const PathLoss& path_loss);

/// Uplink rate of `meter` to `station` while the meters in `co_assigned`
/// transmit to the same station. Bandwidth is shared equally among the
/// 1 + |co_assigned| transmitters and the co-assigned meters interfere.
/// Throws std::invalid_argument when the station does not cover the meter.
double data_rate(const SmartMeter& meter, const BaseStation& station,
                 std::span<const SmartMeter> co_assigned, const RadioParams& radio);

/// D_s / rate + C_s / cpu_rate.
double exec_time(const EdmTask& task, double rate, double cpu_rate);
/// P * D_s / rate.
double tx_energy(const EdmTask& task, double rate, double tx_power);
/// xi * exec_time + (1 - xi) * tx_energy.
double offload_cost(const EdmTask& task, const SmartMeter& meter, const BaseStation& station,
                    double rate, const CostParams& params);
/// Backlog drained at the station's cpu rate.
double queue_latency(const BaseStation& station);

EdmTask gen_task(Rng& rng, const SmartMeter& meter, double now, const TaskRanges& ranges,
                 std::int64_t id);

// Scenario ------------------------------------------------------------------

struct ScenarioConfig {
  double area_size = 400.0;  // m, square side
  std::vector<Position> station_positions{{100, 100}, {100, 300}, {300, 100}, {300, 300}};
  double bandwidth = 10e6;
  double cpu_rate = 16e9;
  double coverage_radius = 300.0;
  RadioParams radio;
  int meter_count = 40;
  double meter_tx_power = 0.5;
  TaskRanges tasks;
  double mean_task_interval = 0.3;  // s, mean gap between task arrivals
  double rate_smoothing = 0.05;     // EWMA weight for arrival-rate tracking
  double penalty_factor = 10.0;     // invalid action penalty, x typical max cost
  CostParams cost;
  std::uint64_t layout_seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ConfigError.
  static ScenarioConfig from_json(const nlohmann::json& j, const std::string& path = "scenario");
};

/// Places meters uniformly in the square (seeded by layout_seed) and the
/// stations at the configured positions.
Topology build_topology(const ScenarioConfig& config);

struct StepInfo {
  int station = -1;
  bool valid = false;     // served by a covering station
  bool dropped = false;   // covering station, but cost exceeded the penalty
  double rate = 0.0;     // bits/s actually obtained
  double time = 0.0;     // s
  double energy = 0.0;   // J
  double cost = 0.0;     // -reward
  bool qos_violated = false;
};

struct StepResult {
  StateVector next;
  double reward = 0.0;
  StepInfo info;
};

/// The MDP the agent interacts with. One pending task at a time; step()
/// executes it at the chosen station and advances simulated time to the
/// next arrival.
class OffloadEnv {
 public:
  explicit OffloadEnv(ScenarioConfig config);
  OffloadEnv(ScenarioConfig config, Topology topology);

  /// Empties queues and transmissions and restarts the task stream.
  void reset(std::uint64_t seed);

  int num_stations() const { return topology_.num_stations(); }
  int state_dim() const { return StateVector::dimension(num_stations()); }
  const Topology& topology() const { return topology_; }
  const ScenarioConfig& config() const { return config_; }
  const EdmTask& pending_task() const { return pending_; }
  double now() const { return now_; }

  StateVector observe() const;
  StepResult step(int action);

  /// Cost charged (as negative reward) for selecting a non-covering station.
  double penalty_cost() const { return penalty_cost_; }
  /// Weighted cost of the largest task at the coverage edge, no interference.
  double typical_max_cost() const;

  /// Hook for tests: replace the pending task.
  void set_pending_task(const EdmTask& task) { pending_ = task; }
  /// Hook for tests: fix the gap to the next arrival instead of drawing it.
  void set_fixed_interval(double dt) { fixed_interval_ = dt; }

 private:
  struct Transmission {
    int meter;
    int station;
    double end_time;
  };

  std::vector<SmartMeter> co_assigned(int station, int excluding_meter) const;
  double rate_for(int meter, int station) const;
  void next_task();

  ScenarioConfig config_;
  Topology topology_;
  Rng rng_;
  EdmTask pending_;
  double now_ = 0.0;
  std::int64_t next_id_ = 0;
  std::vector<Transmission> active_;
  std::vector<double> assign_ewma_;
  double interval_ewma_ = 0.0;
  double fixed_interval_ = 0.0;
  double penalty_cost_ = 0.0;
};

}  // namespace edgeoff::env
