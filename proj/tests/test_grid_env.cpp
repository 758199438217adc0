#include <doctest.h>

#include <cmath>
#include <vector>

#include "edgeoff/grid_env.hpp"
#include "edgeoff/json_fields.hpp"
#include "test_util.hpp"

using namespace edgeoff;
using namespace edgeoff::env;
using edgeoff::testing::rel_err;

namespace {

BaseStation station_at(double x, double y, double radius = 300.0) {
  BaseStation s;
  s.position = {x, y};
  s.coverage_radius = radius;
  return s;
}

EdmTask task_with(double bits, double cycles) {
  EdmTask t;
  t.demand_bits = bits / 4;
  t.monitor_bits = bits - bits / 4;
  t.demand_cycles = cycles / 4;
  t.monitor_cycles = cycles - cycles / 4;
  t.qos_latency = 1.0;
  return t;
}

// Scalar restatement of the rate expression, independent of data_rate().
double brute_rate(double bandwidth, double p, double gain, double noise,
                  const std::vector<std::pair<double, double>>& interferers) {
  double denom = noise;
  for (auto [pl, gl] : interferers) denom += pl * gl;
  const double n = 1.0 + static_cast<double>(interferers.size());
  return bandwidth / n * (std::log(1.0 + p * gain / denom) / std::log(2.0));
}

}  // namespace

TEST_CASE("channel gain follows inverse fourth power with clamping") {
  PathLoss pl;
  SmartMeter m{0, {0, 0}, 0.5};
  CHECK(rel_err(channel_gain(m, station_at(1, 0), pl), 1e-4) < 1e-12);
  CHECK(rel_err(channel_gain(m, station_at(10, 0), pl), 1e-8) < 1e-12);
  CHECK(rel_err(channel_gain(m, station_at(100, 0), pl), 1e-12) < 1e-12);
  // coincident positions clamp to the 1 m value
  CHECK(channel_gain(m, station_at(0, 0), pl) == channel_gain(m, station_at(1, 0), pl));
  CHECK(channel_gain(m, station_at(0.3, 0.2), pl) == channel_gain(m, station_at(1, 0), pl));
}

TEST_CASE("data rate matches the closed form for a lone meter") {
  RadioParams radio;
  radio.path_loss.reference_gain = 1e-10;  // gain 1e-10 at the 1 m clamp
  SmartMeter m{0, {0, 0}, 0.5};
  auto s = station_at(0.5, 0);
  s.bandwidth = 10e6;
  const double rate = data_rate(m, s, {}, radio);
  CHECK(rel_err(rate, 1e7 * std::log2(501.0)) < 1e-9);
  CHECK(rel_err(rate, 8.9687e7) < 1e-4);

  SUBCASE("unit SINR gives one bit per hertz") {
    radio.path_loss.reference_gain = 2e-13;  // 0.5 * 2e-13 / 1e-13 = 1
    CHECK(rel_err(data_rate(m, s, {}, radio), 10e6) < 1e-12);
  }
}

TEST_CASE("two co-assigned meters share bandwidth and interfere") {
  RadioParams radio;
  auto s = station_at(0, 0);
  SmartMeter a{0, {30, 40}, 0.5};   // 50 m
  SmartMeter b{1, {-40, 30}, 0.5};  // 50 m
  const double g = 1e-4 * std::pow(50.0, -4.0);
  const double expected = brute_rate(s.bandwidth, 0.5, g, radio.noise_power, {{0.5, g}});
  const std::vector<SmartMeter> others{b};
  CHECK(rel_err(data_rate(a, s, others, radio), expected) < 1e-12);
  const std::vector<SmartMeter> others_a{a};
  CHECK(data_rate(b, s, others_a, radio) == doctest::Approx(data_rate(a, s, others, radio)).epsilon(1e-12));
}

TEST_CASE("data rate rejects an uncovered meter") {
  SmartMeter m{0, {0, 0}, 0.5};
  CHECK_THROWS_AS(data_rate(m, station_at(500, 0), {}, RadioParams{}), std::invalid_argument);
}

TEST_CASE("data rate decreases as co-assignment grows on random layouts") {
  Rng rng(11);
  std::uniform_real_distribution<double> coord(-200, 200);
  RadioParams radio;
  for (int trial = 0; trial < 200; ++trial) {
    auto s = station_at(0, 0, 1000);
    SmartMeter m{0, {coord(rng), coord(rng)}, 0.5};
    std::vector<SmartMeter> others;
    double prev = data_rate(m, s, others, radio);
    for (int j = 1; j <= 5; ++j) {
      others.push_back(SmartMeter{j, {coord(rng), coord(rng)}, 0.5});
      const double r = data_rate(m, s, others, radio);
      CHECK(r < prev);
      CHECK(r > 0.0);
      prev = r;
    }
  }
}

TEST_CASE("execution time and transmission energy") {
  CHECK(rel_err(exec_time(task_with(1e6, 1e9), 1e7, 1.6e10), 0.1625) < 1e-12);
  CHECK(exec_time(task_with(0, 0), 1e7, 1.6e10) == 0.0);
  CHECK(rel_err(exec_time(task_with(8e5, 0), 8e6, 1.6e10), 0.1) < 1e-12);
  CHECK(rel_err(tx_energy(task_with(1e6, 0), 1e7, 0.5), 0.05) < 1e-12);
  CHECK(tx_energy(task_with(0, 0), 1e7, 0.5) == 0.0);
  CHECK(rel_err(tx_energy(task_with(2e6, 0), 1e7, 0.5), 0.1) < 1e-12);

  CHECK_THROWS_AS(exec_time(task_with(1e6, 1e9), 0.0, 1.6e10), std::invalid_argument);
  CHECK_THROWS_AS(exec_time(task_with(1e6, 1e9), 1e7, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(tx_energy(task_with(1e6, 1e9), -3.0, 0.5), std::invalid_argument);
}

TEST_CASE("derived sizes equal the field sums") {
  EdmTask t;
  t.demand_bits = 123e3;
  t.monitor_bits = 0.7e6;
  t.demand_cycles = 0.2e9;
  t.monitor_cycles = 0.9e9;
  CHECK(t.total_bits() == 123e3 + 0.7e6);
  CHECK(t.total_cycles() == 0.2e9 + 0.9e9);
}

TEST_CASE("time and energy are linear in data size") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(1e5, 2e6);
  for (int i = 0; i < 50; ++i) {
    const double bits = u(rng);
    const double rate = u(rng) * 10;
    const auto one = task_with(bits, 0);
    const auto two = task_with(2 * bits, 0);
    CHECK(rel_err(exec_time(two, rate, 1e10), 2 * exec_time(one, rate, 1e10)) < 1e-12);
    CHECK(rel_err(tx_energy(two, rate, 0.5), 2 * tx_energy(one, rate, 0.5)) < 1e-12);
  }
}

TEST_CASE("offload cost is the xi-weighted mix of time and energy") {
  SmartMeter m{0, {0, 0}, 0.5};
  auto s = station_at(0, 0);
  s.cpu_rate = 1.6e10;
  const auto task = task_with(1e6, 1e9);
  CHECK(rel_err(offload_cost(task, m, s, 1e7, CostParams::balanced(0.5)), 0.10625) < 1e-12);
  CHECK(offload_cost(task, m, s, 1e7, CostParams::balanced(1.0)) == exec_time(task, 1e7, 1.6e10));
  CHECK(offload_cost(task, m, s, 1e7, CostParams::balanced(0.0)) == tx_energy(task, 1e7, 0.5));

  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = exec_time(task, 1e7, 1.6e10);
  const double e = tx_energy(task, 1e7, 0.5);
  for (int i = 0; i < 100; ++i) {
    const double xi = u(rng);
    const double expected = xi * t + (1 - xi) * e;
    CHECK(rel_err(offload_cost(task, m, s, 1e7, CostParams::balanced(xi)), expected) < 1e-12);
  }
}

TEST_CASE("queue latency is backlog over cpu rate") {
  auto s = station_at(0, 0);
  s.cpu_rate = 1.6e10;
  CHECK(queue_latency(s) == 0.0);
  s.queue_backlog = 1.6e9;
  CHECK(rel_err(queue_latency(s), 0.1) < 1e-12);
  s.queue_backlog = 8e9;
  CHECK(rel_err(queue_latency(s), 0.5) < 1e-12);
}

TEST_CASE("reward from the worked example") {
  const auto task = task_with(1e6, 1e9);
  CostParams p{0.5, 1.0, 1.0};
  const double reward = -(p.delta1 * exec_time(task, 1e7, 1.6e10) + p.delta2 * tx_energy(task, 1e7, 0.5));
  CHECK(rel_err(reward, -0.2125) < 1e-12);
}

TEST_CASE("generated tasks stay inside the configured ranges") {
  Rng rng(9);
  TaskRanges r;
  SmartMeter m{3, {1, 1}, 0.5};
  for (int i = 0; i < 2000; ++i) {
    const auto t = gen_task(rng, m, 1.5, r, i);
    CHECK(t.demand_bits >= 100e3);
    CHECK(t.demand_bits <= 400e3);
    CHECK(t.monitor_bits >= 0.5e6);
    CHECK(t.monitor_bits <= 1e6);
    CHECK(t.demand_cycles >= 0.1e9);
    CHECK(t.demand_cycles <= 0.4e9);
    CHECK(t.monitor_cycles >= 0.5e9);
    CHECK(t.monitor_cycles <= 1e9);
    CHECK(t.qos_latency == 1.0);
    CHECK(t.meter_id == 3);
  }
  Rng a(42), b(42);
  for (int i = 0; i < 20; ++i) {
    const auto ta = gen_task(a, m, 0, r, i);
    const auto tb = gen_task(b, m, 0, r, i);
    CHECK(ta.demand_bits == tb.demand_bits);
    CHECK(ta.monitor_cycles == tb.monitor_cycles);
  }
}

TEST_CASE("topology construction enforces coverage") {
  std::vector<BaseStation> stations{station_at(0, 0, 100)};
  std::vector<SmartMeter> ok{{0, {50, 0}, 0.5}};
  const auto topo = make_topology(ok, stations, RadioParams{});
  CHECK(topo.covers(0, 0));
  std::vector<SmartMeter> bad{{0, {50, 0}, 0.5}, {1, {150, 0}, 0.5}};
  CHECK_THROWS_AS(make_topology(bad, stations, RadioParams{}), std::invalid_argument);

  // coverage matches the distance rule on the default layout
  ScenarioConfig config;
  const auto t = build_topology(config);
  CHECK(t.num_meters() == 40);
  CHECK(t.num_stations() == 4);
  for (int i = 0; i < t.num_meters(); ++i) {
    bool any = false;
    for (int k = 0; k < t.num_stations(); ++k) {
      const bool expect = distance(t.meters[i].position, t.stations[k].position) <= 300.0;
      CHECK(t.covers(i, k) == expect);
      any = any || expect;
    }
    CHECK(any);
    CHECK(t.meters[i].position.x >= 0);
    CHECK(t.meters[i].position.x <= 400);
  }
}

TEST_CASE("observation layout and length") {
  OffloadEnv env(ScenarioConfig{});
  env.reset(1);
  const auto s = env.observe();
  CHECK(s.size() == 13);
  for (int k = 0; k < 4; ++k) CHECK(s.latency(k) == 0.0);
  const auto& task = env.pending_task();
  CHECK(s[0] == task.demand_bits);
  CHECK(s[1] == task.monitor_bits);
  CHECK(s[2] == task.demand_cycles);
  CHECK(s[3] == task.monitor_cycles);
  CHECK(s.qos() == task.qos_latency);
  for (int k = 0; k < 4; ++k) {
    CHECK((s.data_rate(k) > 0) == env.topology().covers(task.meter_id, k));
  }
}

TEST_CASE("crafted single-meter scenario observes hand-computed rates") {
  auto s0 = station_at(10, 0);
  s0.id = 0;
  auto s1 = station_at(1000, 0);
  s1.id = 1;
  ScenarioConfig config;
  config.station_positions = {{10, 0}, {1000, 0}};
  auto topo = make_topology({{0, {0, 0}, 0.5}}, {s0, s1}, config.radio);
  OffloadEnv env(config, topo);
  env.reset(4);
  const auto obs = env.observe();
  CHECK(rel_err(obs.data_rate(0), 1e7 * std::log2(1.0 + 0.5 * 1e-8 / 1e-13)) < 1e-9);
  CHECK(obs.data_rate(1) == 0.0);
}

TEST_CASE("step charges the negative weighted cost") {
  ScenarioConfig config;
  config.cost = CostParams{0.5, 1.0, 1.0};
  OffloadEnv env(config);
  env.reset(2);
  for (int i = 0; i < 50; ++i) {
    const auto obs = env.observe();
    int action = 0;
    while (obs.data_rate(action) == 0.0) ++action;
    const auto task = env.pending_task();
    const auto r = env.step(action);
    if (r.info.valid) {
      const double t = task.total_bits() / r.info.rate + task.total_cycles() / 16e9;
      const double e = 0.5 * task.total_bits() / r.info.rate;
      CHECK(rel_err(r.reward, -(t + e)) < 1e-12);
      CHECK(r.info.rate == obs.data_rate(action));
    }
  }
}

TEST_CASE("zero reward weights give zero reward for valid actions") {
  ScenarioConfig config;
  config.cost = CostParams{0.5, 0.0, 0.0};
  OffloadEnv env(config);
  env.reset(3);
  for (int i = 0; i < 30; ++i) {
    const auto obs = env.observe();
    int action = 0;
    while (obs.data_rate(action) == 0.0) ++action;
    CHECK(env.step(action).reward == 0.0);
  }
}

TEST_CASE("invalid action pays the fixed penalty without enqueueing") {
  OffloadEnv env(ScenarioConfig{});
  env.reset(7);
  CHECK(env.penalty_cost() == doctest::Approx(10.0 * env.typical_max_cost()));
  int checked = 0;
  for (int i = 0; i < 400 && checked < 10; ++i) {
    const auto obs = env.observe();
    int bad = -1;
    for (int k = 0; k < 4; ++k) {
      if (obs.data_rate(k) == 0.0) bad = k;
    }
    if (bad < 0) {
      env.step(0);
      continue;
    }
    env.set_fixed_interval(1e-9);
    const double backlog = env.topology().stations[bad].queue_backlog;
    const auto r = env.step(bad);
    env.set_fixed_interval(0.0);
    CHECK_FALSE(r.info.valid);
    CHECK(r.reward == -env.penalty_cost());
    CHECK(env.topology().stations[bad].queue_backlog <= backlog);
    ++checked;
  }
  CHECK(checked == 10);
  CHECK_THROWS_AS(env.step(4), std::out_of_range);
  CHECK_THROWS_AS(env.step(-1), std::out_of_range);
}

TEST_CASE("queue conservation holds on every transition") {
  OffloadEnv env(ScenarioConfig{});
  env.reset(5);
  Rng rng(8);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> gap(0.0, 0.2);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> before;
    for (const auto& s : env.topology().stations) before.push_back(s.queue_backlog);
    const double cycles = env.pending_task().total_cycles();
    const double dt = gap(rng) + 1e-6;
    env.set_fixed_interval(dt);
    const int a = pick(rng);
    const auto r = env.step(a);
    for (int k = 0; k < 4; ++k) {
      const double added = (r.info.valid && k == a) ? cycles : 0.0;
      const double expected = std::max(0.0, before[k] + added - 16e9 * dt);
      CHECK(env.topology().stations[k].queue_backlog == expected);
      CHECK(env.topology().stations[k].queue_backlog >= 0.0);
    }
  }
}

TEST_CASE("repeated tasks to one station grow its latency while arrivals outpace drain") {
  OffloadEnv env(ScenarioConfig{});
  env.reset(1);
  int meter = 0;
  while (!env.topology().covers(meter, 0)) ++meter;
  EdmTask task = task_with(5e5, 1e9);
  task.meter_id = meter;
  env.set_fixed_interval(0.01);  // drains 1.6e8 cycles per arrival
  double prev = -1.0;
  for (int i = 0; i < 30; ++i) {
    env.set_pending_task(task);
    const auto r = env.step(0);
    REQUIRE(r.info.valid);
    const double l = queue_latency(env.topology().stations[0]);
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("arrival-rate tracking flags an overloaded station") {
  ScenarioConfig config;
  OffloadEnv env(config);
  env.reset(1);
  int meter = 0;
  while (!env.topology().covers(meter, 0)) ++meter;
  EdmTask task = task_with(5e5, 1e9);
  task.meter_id = meter;
  env.set_fixed_interval(0.02);  // 50 tasks/s against a 16 tasks/s service rate
  for (int i = 0; i < 300; ++i) {
    env.set_pending_task(task);
    env.step(0);
  }
  const auto& s = env.topology().stations[0];
  CHECK(s.processing_rate == doctest::Approx(16.0));
  CHECK(s.arrival_rate == doctest::Approx(50.0).epsilon(0.02));
  CHECK(s.overloaded());
  CHECK_FALSE(env.topology().stations[3].overloaded());
}

TEST_CASE("same seed reproduces the trajectory bit for bit") {
  auto run = [] {
    OffloadEnv env(ScenarioConfig{});
    env.reset(77);
    std::vector<double> trace;
    for (int i = 0; i < 300; ++i) {
      const auto obs = env.observe();
      trace.insert(trace.end(), obs.values().begin(), obs.values().end());
      trace.push_back(env.step(i % 4).reward);
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("scenario config round-trips and rejects unknown keys") {
  ScenarioConfig c;
  c.meter_count = 12;
  c.cost = CostParams::balanced(0.3);
  const auto back = ScenarioConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  nlohmann::json j = {{"meter_count", 10}, {"bogus", 1}};
  CHECK_THROWS_AS(ScenarioConfig::from_json(j), ConfigError);
  try {
    ScenarioConfig::from_json(j);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("scenario.bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(ScenarioConfig::from_json({{"xi", 2.0}}), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json({{"meter_count", "many"}}), ConfigError);
  const auto weights = ScenarioConfig::from_json({{"xi", 0.25}});
  CHECK(weights.cost.delta1 == 0.25);
  CHECK(weights.cost.delta2 == 0.75);
}
