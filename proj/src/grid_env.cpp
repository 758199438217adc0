#include "edgeoff/grid_env.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "edgeoff/json_fields.hpp"

namespace edgeoff::env {

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool BaseStation::covers(const SmartMeter& meter) const {
  return distance(position, meter.position) <= coverage_radius;
}

Topology make_topology(std::vector<SmartMeter> meters, std::vector<BaseStation> stations,
                       RadioParams radio) {
  if (stations.empty()) throw std::invalid_argument("topology needs at least one station");
  for (const auto& s : stations) {
    if (!(s.bandwidth > 0) || !(s.cpu_rate > 0)) {
      throw std::invalid_argument("station " + std::to_string(s.id) +
                                  ": bandwidth and cpu_rate must be positive");
    }
  }
  Topology topo;
  topo.coverage.assign(meters.size() * stations.size(), 0);
  for (std::size_t i = 0; i < meters.size(); ++i) {
    if (!(meters[i].tx_power > 0)) {
      throw std::invalid_argument("meter " + std::to_string(i) + ": tx_power must be positive");
    }
    bool any = false;
    for (std::size_t k = 0; k < stations.size(); ++k) {
      const bool c = stations[k].covers(meters[i]);
      topo.coverage[i * stations.size() + k] = c;
      any = any || c;
    }
    if (!any) {
      throw std::invalid_argument("meter " + std::to_string(i) +
                                  " is not covered by any station");
    }
  }
  topo.meters = std::move(meters);
  topo.stations = std::move(stations);
  topo.radio = radio;
  return topo;
}

CostParams CostParams::balanced(double xi) { return CostParams{xi, xi, 1.0 - xi}; }

void CostParams::validate() const {
  if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in [0, 1]");
  if (!(delta1 >= 0.0) || !(delta2 >= 0.0)) {
    throw std::invalid_argument("reward weights must be non-negative");
  }
}

StateVector::StateVector(std::vector<double> values, int num_stations)
    : values_(std::move(values)), num_stations_(num_stations) {
  if (values_.size() != static_cast<std::size_t>(dimension(num_stations))) {
    throw std::invalid_argument("state vector length does not match 5 + 2K");
  }
}

double channel_gain(const SmartMeter& meter, const BaseStation& station,
                    const PathLoss& path_loss) {
  const double d =
      std::max(path_loss.min_distance, distance(meter.position, station.position));
  return path_loss.reference_gain * std::pow(d, -path_loss.exponent);
}

double data_rate(const SmartMeter& meter, const BaseStation& station,
                 std::span<const SmartMeter> co_assigned, const RadioParams& radio) {
  if (!station.covers(meter)) {
    throw std::invalid_argument("station " + std::to_string(station.id) +
                                " does not cover meter " + std::to_string(meter.id));
  }
  double interference = 0.0;
  for (const auto& other : co_assigned) {
    interference += other.tx_power * channel_gain(other, station, radio.path_loss);
  }
  const double signal = meter.tx_power * channel_gain(meter, station, radio.path_loss);
  const double sinr = signal / (radio.noise_power + interference);
  const double share = station.bandwidth / static_cast<double>(1 + co_assigned.size());
  return share * std::log2(1.0 + sinr);
}

double exec_time(const EdmTask& task, double rate, double cpu_rate) {
  if (!(rate > 0)) throw std::invalid_argument("exec_time: rate must be positive");
  if (!(cpu_rate > 0)) throw std::invalid_argument("exec_time: cpu_rate must be positive");
  return task.total_bits() / rate + task.total_cycles() / cpu_rate;
}

double tx_energy(const EdmTask& task, double rate, double tx_power) {
  if (!(rate > 0)) throw std::invalid_argument("tx_energy: rate must be positive");
  return tx_power * task.total_bits() / rate;
}

double offload_cost(const EdmTask& task, const SmartMeter& meter, const BaseStation& station,
                    double rate, const CostParams& params) {
  const double t = exec_time(task, rate, station.cpu_rate);
  const double e = tx_energy(task, rate, meter.tx_power);
  return params.xi * t + (1.0 - params.xi) * e;
}

double queue_latency(const BaseStation& station) {
  return station.queue_backlog / station.cpu_rate;
}

EdmTask gen_task(Rng& rng, const SmartMeter& meter, double now, const TaskRanges& ranges,
                 std::int64_t id) {
  auto draw = [&rng](Range r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  EdmTask task;
  task.id = id;
  task.demand_bits = draw(ranges.demand_bits);
  task.monitor_bits = draw(ranges.monitor_bits);
  task.demand_cycles = draw(ranges.demand_cycles);
  task.monitor_cycles = draw(ranges.monitor_cycles);
  task.qos_latency = ranges.qos_latency;
  task.timestamp = now;
  task.meter_id = meter.id;
  return task;
}

// Scenario ------------------------------------------------------------------

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo > 0) || !(r.hi >= r.lo)) {
    throw std::invalid_argument(std::string("task range ") + name + " must satisfy 0 < lo <= hi");
  }
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

void read_range(FieldReader& reader, const char* key, Range& r) {
  std::vector<double> v{r.lo, r.hi};
  reader.read(key, v);
  if (v.size() != 2) throw ConfigError(reader.field(key) + ": expected [lo, hi]");
  r = Range{v[0], v[1]};
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(area_size > 0)) throw std::invalid_argument("area_size must be positive");
  if (station_positions.empty()) throw std::invalid_argument("at least one station required");
  if (!(bandwidth > 0) || !(cpu_rate > 0) || !(coverage_radius > 0)) {
    throw std::invalid_argument("bandwidth, cpu_rate and coverage_radius must be positive");
  }
  if (!(radio.noise_power > 0)) throw std::invalid_argument("noise_power must be positive");
  if (!(radio.path_loss.reference_gain > 0) || !(radio.path_loss.min_distance > 0)) {
    throw std::invalid_argument("path loss constants must be positive");
  }
  if (meter_count < 1) throw std::invalid_argument("meter_count must be >= 1");
  if (!(meter_tx_power > 0)) throw std::invalid_argument("meter_tx_power must be positive");
  check_range(tasks.demand_bits, "demand_bits");
  check_range(tasks.monitor_bits, "monitor_bits");
  check_range(tasks.demand_cycles, "demand_cycles");
  check_range(tasks.monitor_cycles, "monitor_cycles");
  if (!(tasks.qos_latency > 0)) throw std::invalid_argument("qos_latency must be positive");
  if (!(mean_task_interval > 0)) throw std::invalid_argument("mean_task_interval must be positive");
  if (!(rate_smoothing > 0 && rate_smoothing <= 1)) {
    throw std::invalid_argument("rate_smoothing must lie in (0, 1]");
  }
  if (!(penalty_factor > 0)) throw std::invalid_argument("penalty_factor must be positive");
  cost.validate();
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json stations = nlohmann::json::array();
  for (const auto& p : station_positions) stations.push_back({p.x, p.y});
  return {
      {"area_size", area_size},
      {"station_positions", stations},
      {"bandwidth", bandwidth},
      {"cpu_rate", cpu_rate},
      {"coverage_radius", coverage_radius},
      {"noise_power", radio.noise_power},
      {"path_loss_gain", radio.path_loss.reference_gain},
      {"path_loss_exponent", radio.path_loss.exponent},
      {"min_distance", radio.path_loss.min_distance},
      {"meter_count", meter_count},
      {"meter_tx_power", meter_tx_power},
      {"demand_bits", range_json(tasks.demand_bits)},
      {"monitor_bits", range_json(tasks.monitor_bits)},
      {"demand_cycles", range_json(tasks.demand_cycles)},
      {"monitor_cycles", range_json(tasks.monitor_cycles)},
      {"qos_latency", tasks.qos_latency},
      {"mean_task_interval", mean_task_interval},
      {"rate_smoothing", rate_smoothing},
      {"penalty_factor", penalty_factor},
      {"xi", cost.xi},
      {"delta1", cost.delta1},
      {"delta2", cost.delta2},
      {"layout_seed", layout_seed},
  };
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j, const std::string& path) {
  ScenarioConfig c;
  FieldReader r(j, path);
  r.read("area_size", c.area_size);
  std::vector<std::vector<double>> raw;
  for (const auto& p : c.station_positions) raw.push_back({p.x, p.y});
  r.read("station_positions", raw);
  c.station_positions.clear();
  for (const auto& p : raw) {
    if (p.size() != 2) throw ConfigError(r.field("station_positions") + ": expected [x, y] pairs");
    c.station_positions.push_back({p[0], p[1]});
  }
  r.read("bandwidth", c.bandwidth);
  r.read("cpu_rate", c.cpu_rate);
  r.read("coverage_radius", c.coverage_radius);
  r.read("noise_power", c.radio.noise_power);
  r.read("path_loss_gain", c.radio.path_loss.reference_gain);
  r.read("path_loss_exponent", c.radio.path_loss.exponent);
  r.read("min_distance", c.radio.path_loss.min_distance);
  r.read("meter_count", c.meter_count);
  r.read("meter_tx_power", c.meter_tx_power);
  read_range(r, "demand_bits", c.tasks.demand_bits);
  read_range(r, "monitor_bits", c.tasks.monitor_bits);
  read_range(r, "demand_cycles", c.tasks.demand_cycles);
  read_range(r, "monitor_cycles", c.tasks.monitor_cycles);
  r.read("qos_latency", c.tasks.qos_latency);
  r.read("mean_task_interval", c.mean_task_interval);
  r.read("rate_smoothing", c.rate_smoothing);
  r.read("penalty_factor", c.penalty_factor);
  r.read("xi", c.cost.xi);
  // Reward weights follow xi unless given explicitly.
  c.cost.delta1 = c.cost.xi;
  c.cost.delta2 = 1.0 - c.cost.xi;
  r.read("delta1", c.cost.delta1);
  r.read("delta2", c.cost.delta2);
  r.read("layout_seed", c.layout_seed);
  r.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

Topology build_topology(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.layout_seed);
  std::uniform_real_distribution<double> coord(0.0, config.area_size);
  std::vector<SmartMeter> meters;
  for (int i = 0; i < config.meter_count; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    meters.push_back(SmartMeter{i, {x, y}, config.meter_tx_power});
  }
  const double mean_cycles =
      0.5 * (config.tasks.demand_cycles.lo + config.tasks.demand_cycles.hi) +
      0.5 * (config.tasks.monitor_cycles.lo + config.tasks.monitor_cycles.hi);
  std::vector<BaseStation> stations;
  for (std::size_t k = 0; k < config.station_positions.size(); ++k) {
    BaseStation s;
    s.id = static_cast<int>(k);
    s.position = config.station_positions[k];
    s.bandwidth = config.bandwidth;
    s.cpu_rate = config.cpu_rate;
    s.coverage_radius = config.coverage_radius;
    s.processing_rate = config.cpu_rate / mean_cycles;
    stations.push_back(s);
  }
  return make_topology(std::move(meters), std::move(stations), config.radio);
}

// Environment ---------------------------------------------------------------

OffloadEnv::OffloadEnv(ScenarioConfig config)
    : OffloadEnv(config, build_topology(config)) {}

OffloadEnv::OffloadEnv(ScenarioConfig config, Topology topology)
    : config_(std::move(config)), topology_(std::move(topology)) {
  config_.validate();
  penalty_cost_ = config_.penalty_factor * typical_max_cost();
  reset(0);
}

double OffloadEnv::typical_max_cost() const {
  const auto& t = config_.tasks;
  EdmTask worst;
  worst.demand_bits = t.demand_bits.hi;
  worst.monitor_bits = t.monitor_bits.hi;
  worst.demand_cycles = t.demand_cycles.hi;
  worst.monitor_cycles = t.monitor_cycles.hi;
  double worst_cost = 0.0;
  for (const auto& station : topology_.stations) {
    SmartMeter edge{-1, station.position, config_.meter_tx_power};
    edge.position.x += station.coverage_radius;
    const double rate = data_rate(edge, station, {}, topology_.radio);
    const double time = exec_time(worst, rate, station.cpu_rate);
    const double energy = tx_energy(worst, rate, edge.tx_power);
    worst_cost = std::max(worst_cost, config_.cost.delta1 * time + config_.cost.delta2 * energy);
  }
  return worst_cost;
}

void OffloadEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  now_ = 0.0;
  next_id_ = 0;
  active_.clear();
  for (auto& s : topology_.stations) {
    s.queue_backlog = 0.0;
    s.arrival_rate = 0.0;
  }
  assign_ewma_.assign(topology_.stations.size(), 0.0);
  interval_ewma_ = config_.mean_task_interval;
  next_task();
}

void OffloadEnv::next_task() {
  std::uniform_int_distribution<int> pick(0, topology_.num_meters() - 1);
  const auto& meter = topology_.meters[pick(rng_)];
  pending_ = gen_task(rng_, meter, now_, config_.tasks, next_id_++);
}

std::vector<SmartMeter> OffloadEnv::co_assigned(int station, int excluding_meter) const {
  std::vector<SmartMeter> out;
  for (const auto& tx : active_) {
    if (tx.station == station && tx.meter != excluding_meter) {
      out.push_back(topology_.meters[tx.meter]);
    }
  }
  return out;
}

double OffloadEnv::rate_for(int meter, int station) const {
  const auto others = co_assigned(station, meter);
  return data_rate(topology_.meters[meter], topology_.stations[station], others, topology_.radio);
}

StateVector OffloadEnv::observe() const {
  const int k_count = num_stations();
  std::vector<double> v(StateVector::dimension(k_count), 0.0);
  v[0] = pending_.demand_bits;
  v[1] = pending_.monitor_bits;
  v[2] = pending_.demand_cycles;
  v[3] = pending_.monitor_cycles;
  for (int k = 0; k < k_count; ++k) {
    v[StateVector::data_rate_index(k)] =
        topology_.covers(pending_.meter_id, k) ? rate_for(pending_.meter_id, k) : 0.0;
    v[StateVector::latency_index(k, k_count)] = queue_latency(topology_.stations[k]);
  }
  v[StateVector::qos_index(k_count)] = pending_.qos_latency;
  return StateVector(std::move(v), k_count);
}

StepResult OffloadEnv::step(int action) {
  if (action < 0 || action >= num_stations()) {
    throw std::out_of_range("action " + std::to_string(action) + " outside [0, K)");
  }
  const EdmTask task = pending_;
  const SmartMeter& meter = topology_.meters[task.meter_id];
  StepResult result;
  result.info.station = action;

  std::vector<double> added(topology_.stations.size(), 0.0);
  if (topology_.covers(task.meter_id, action)) {
    BaseStation& station = topology_.stations[action];
    const double rate = rate_for(task.meter_id, action);
    result.info.rate = rate;
    result.info.time = exec_time(task, rate, station.cpu_rate);
    result.info.energy = tx_energy(task, rate, meter.tx_power);
    result.info.cost = config_.cost.delta1 * result.info.time +
                       config_.cost.delta2 * result.info.energy;
    result.info.qos_violated = result.info.time > task.qos_latency;
    if (result.info.cost <= penalty_cost_) {
      result.info.valid = true;
      added[action] = task.total_cycles();
      active_.push_back(Transmission{task.meter_id, action, now_ + task.total_bits() / rate});
    } else {
      // Interference has starved the link; the upload is abandoned.
      result.info.dropped = true;
      result.info.cost = penalty_cost_;
    }
  } else {
    result.info.cost = penalty_cost_;
    result.info.qos_violated = true;
  }
  result.reward = -result.info.cost;

  double dt = fixed_interval_;
  if (!(dt > 0)) {
    dt = std::exponential_distribution<double>(1.0 / config_.mean_task_interval)(rng_);
  }
  const double alpha = config_.rate_smoothing;
  interval_ewma_ = (1.0 - alpha) * interval_ewma_ + alpha * dt;
  for (std::size_t k = 0; k < topology_.stations.size(); ++k) {
    BaseStation& s = topology_.stations[k];
    const double before = s.queue_backlog;
    s.queue_backlog = std::max(0.0, before + added[k] - s.cpu_rate * dt);
    assert(s.queue_backlog == std::max(0.0, before + added[k] - s.cpu_rate * dt));
    const double assigned = (result.info.valid && static_cast<int>(k) == action) ? 1.0 : 0.0;
    assign_ewma_[k] = (1.0 - alpha) * assign_ewma_[k] + alpha * assigned;
    s.arrival_rate = assign_ewma_[k] / interval_ewma_;
  }
  now_ += dt;
  std::erase_if(active_, [this](const Transmission& tx) { return tx.end_time <= now_; });

  next_task();
  result.next = observe();
  return result;
}

}  // namespace edgeoff::env
