#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <vector>

#include "edgeoff/dqn.hpp"
#include "edgeoff/json_fields.hpp"
#include "edgeoff/toy_mdp.hpp"
#include "test_util.hpp"
#include "toy_setup.hpp"

using namespace edgeoff;
using namespace edgeoff::dqn;
using edgeoff::testing::rel_err;

namespace {

// Network whose output is exactly its last-layer biases.
nn::DenseNet constant_q(int inputs, std::vector<double> q) {
  nn::DenseNet net({inputs, static_cast<int>(q.size())}, nn::OutputActivation::kIdentity);
  std::copy(q.begin(), q.end(), net.biases(0).begin());
  return net;
}

std::uint64_t param_hash(const nn::DenseNet& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double p : net.parameters()) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    h = (h ^ bits) * 1099511628211ULL;
  }
  return h;
}

Experience exp_of(std::vector<double> s, int a, double r, std::vector<double> next, bool terminal) {
  return Experience{std::move(s), a, r, std::move(next), terminal};
}

}  // namespace

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{1, 3, 3, 0}) == 1);
  CHECK(argmax(std::vector<double>{2, 2}) == 0);
  CHECK(argmax(std::vector<double>{-5}) == 0);
}

TEST_CASE("select_action greedy and exploratory behaviour") {
  Rng rng(1);
  const auto net = constant_q(3, {1, 3, 3, 0});
  const std::vector<double> s{0.1, 0.2, 0.3};
  for (int i = 0; i < 50; ++i) CHECK(select_action(net, s, 0.0, rng) == 1);

  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[select_action(net, s, 1.0, rng)];
  const double p = 0.25;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("greedy action of a hand-built net matches the hand argmax") {
  nn::DenseNet net({2, 3}, nn::OutputActivation::kIdentity);
  // Q = [x0, x1, x0 + x1 - 1]
  auto w = net.weights(0);
  w[0] = 1;
  w[3] = 1;
  w[4] = 1;
  w[5] = 1;
  net.biases(0)[2] = -1;
  Rng rng(3);
  CHECK(select_action(net, std::vector<double>{2.0, 1.0}, 0.0, rng) == 0);
  CHECK(select_action(net, std::vector<double>{1.0, 2.0}, 0.0, rng) == 1);
  CHECK(select_action(net, std::vector<double>{3.0, 3.0}, 0.0, rng) == 2);
}

TEST_CASE("td targets") {
  const auto target = constant_q(2, {-1.0, -3.0});
  const auto a = exp_of({0, 0}, 0, -0.2, {1, 1}, false);
  const auto b = exp_of({0, 0}, 1, 0.4, {1, 1}, true);
  const std::vector<const Experience*> batch{&a, &b};
  const auto y = td_target(batch, target, 0.95);
  CHECK(rel_err(y[0], -1.15) < 1e-12);
  CHECK(y[1] == 0.4);
  const auto y0 = td_target(batch, target, 0.0);
  CHECK(y0[0] == -0.2);
  CHECK(y0[1] == 0.4);
}

TEST_CASE("replay buffer keeps the most recent entries") {
  ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) buf.push(exp_of({double(i)}, 0, i, {0}, false));
  CHECK(buf.size() == 5);
  const auto chrono = buf.chronological();
  for (int i = 0; i < 5; ++i) CHECK(chrono[i]->reward == 3 + i);
  Rng rng(2);
  for (auto* e : buf.sample(100, rng)) CHECK(e->reward >= 3);
}

TEST_CASE("epsilon schedule") {
  EpsilonSchedule e{1.0, 0.05, 5000};
  CHECK(e.at(0) == 1.0);
  CHECK(e.at(5000) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(e.at(9000) == e.at(5000));
  double prev = 2.0;
  for (int t = 0; t <= 7000; t += 37) {
    CHECK(e.at(t) <= prev);
    prev = e.at(t);
  }
  CHECK(e.at(2500) == doctest::Approx(0.525));
}

TEST_CASE("train_step skips an underfilled buffer and regresses toward y") {
  AgentConfig config;
  config.batch_size = 8;
  Rng rng(5);
  auto q = nn::DenseNet::he_uniform({3, 8, 2}, nn::OutputActivation::kIdentity, rng);
  const auto target = q;
  nn::OptimizerConfig oc;
  oc.learning_rate = 1e-2;
  nn::Optimizer opt(oc, q.parameter_count());
  ReplayBuffer buf(100);
  const std::vector<double> s{0.2, -0.4, 0.9};
  for (int i = 0; i < 7; ++i) buf.push(exp_of(s, 1, 0.7, s, true));
  CHECK_FALSE(train_step(q, target, buf, opt, config, rng).has_value());
  buf.push(exp_of(s, 1, 0.7, s, true));

  const auto last_row_before = std::vector<double>(q.weights(1).begin(), q.weights(1).begin() + 8);
  for (int i = 0; i < 2000; ++i) {
    const auto loss = train_step(q, target, buf, opt, config, rng);
    REQUIRE(loss.has_value());
    CHECK(*loss >= 0.0);
  }
  CHECK(std::abs(q.forward(s)[1] - 0.7) < 1e-3);
  // action 0 never taken: its output row never received gradient
  CHECK(std::vector<double>(q.weights(1).begin(), q.weights(1).begin() + 8) == last_row_before);
}

TEST_CASE("zero rewards with zero discount drive Q toward zero") {
  AgentConfig config;
  config.gamma = 0.0;
  config.batch_size = 2;
  Rng rng(6);
  auto q = nn::DenseNet::he_uniform({2, 8, 2}, nn::OutputActivation::kIdentity, rng);
  for (auto& b : q.biases(1)) b = 1.0;
  const auto target = q;
  nn::OptimizerConfig oc;
  oc.learning_rate = 1e-2;
  nn::Optimizer opt(oc, q.parameter_count());
  ReplayBuffer buf(10);
  for (int a = 0; a < 2; ++a) buf.push(exp_of({0.5, 0.5}, a, 0.0, {0.1, 0.1}, false));
  for (int i = 0; i < 3000; ++i) train_step(q, target, buf, opt, config, rng);
  for (double v : q.forward(std::vector<double>{0.5, 0.5})) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("value iteration oracles") {
  SUBCASE("single state, rewards (1, 0)") {
    TabularMdp m{1, 2, {{0, 0}}, {{1.0, 0.0}}, {{false, false}}};
    CHECK(value_iteration(m, 0.9).policy == std::vector<int>{0});
  }
  SUBCASE("delayed reward chain matches the hand-solved fixed point") {
    const auto m = TabularMdp::delayed_reward_chain();
    const auto r = value_iteration(m, 0.9);
    CHECK(r.policy == std::vector<int>{1, 1, 0});
    const double v2 = 1.0 / (1.0 - 0.729);
    CHECK(rel_err(r.values[2], v2) < 1e-8);
    CHECK(rel_err(r.values[1], 0.9 * v2) < 1e-8);
    CHECK(rel_err(r.values[0], 0.81 * v2) < 1e-8);
  }
  SUBCASE("zero discount is the immediate-reward argmax") {
    const auto m = TabularMdp::delayed_reward_chain();
    const auto r = value_iteration(m, 0.0);
    for (int s = 0; s < 3; ++s) CHECK(r.policy[s] == argmax(m.reward[s]));
  }
}

TEST_CASE("DQN recovers the chain's optimal policy") {
  const auto optimal = value_iteration(TabularMdp::delayed_reward_chain(), 0.9).policy;
  for (std::uint64_t seed : {1, 2, 3}) CHECK(testing::trained_toy_policy(seed, 0.9) == optimal);
}

TEST_CASE("target network changes only at sync steps") {
  const auto mdp = TabularMdp::delayed_reward_chain();
  auto config = testing::toy_agent_config();
  config.episodes = 20;
  config.target_sync_interval = 37;
  std::uint64_t last = 0;
  std::int64_t changes = 0;
  TrainHooks hooks;
  hooks.after_step = [&](std::int64_t step, const nn::DenseNet& target) {
    const auto h = param_hash(target);
    if (step > 1 && h != last) {
      CHECK(step % 37 == 0);
      ++changes;
    }
    last = h;
  };
  const auto r = train([mdp] { return std::make_unique<TabularEnv>(mdp); }, config, 4,
                       Normalization::identity(3), hooks);
  CHECK(changes > 0);
  CHECK(r.log.size() == 20);
}

TEST_CASE("training is deterministic per seed") {
  const auto mdp = TabularMdp::delayed_reward_chain();
  auto config = testing::toy_agent_config();
  config.episodes = 30;
  auto run = [&](std::uint64_t seed) {
    return train([mdp] { return std::make_unique<TabularEnv>(mdp); }, config, seed, Normalization::identity(3));
  };
  const auto a = run(9);
  const auto b = run(9);
  CHECK(a.policy.net == b.policy.net);
  CHECK(a.log.size() == 30);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
    CHECK(a.log[i].mean_cost == -a.log[i].mean_reward);
  }
  CHECK_FALSE(run(10).policy.net == a.policy.net);
}

TEST_CASE("policy file round-trip preserves Q-values bit for bit") {
  Rng rng(8);
  Policy p;
  p.net = nn::DenseNet::he_uniform({13, 64, 64, 4}, nn::OutputActivation::kIdentity, rng);
  p.normalization = offload_normalization(AgentConfig{}, 4);
  p.metadata = {42, "abc123"};
  const auto path = (std::filesystem::temp_directory_path() / "edgeoff_policy_roundtrip.json").string();
  p.save(path);
  const auto q = Policy::load(path);
  std::filesystem::remove(path);
  CHECK(q.metadata.seed == 42);
  CHECK(q.metadata.config_hash == "abc123");
  CHECK(q.normalization == p.normalization);
  std::uniform_real_distribution<double> u(0, 1e8);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> s(13);
    for (auto& v : s) v = u(rng);
    CHECK(q.q_values(s) == p.q_values(s));
  }
  CHECK_THROWS(Policy::load("/nonexistent/policy.json"));
}

TEST_CASE("shifting every Q-value by a constant keeps the greedy action") {
  Rng rng(10);
  auto net = nn::DenseNet::he_uniform({6, 16, 4}, nn::OutputActivation::kIdentity, rng);
  auto shifted = net;
  for (auto& b : shifted.biases(1)) b += 123.25;
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> s(6);
    for (auto& v : s) v = u(rng);
    CHECK(select_action(net, s, 0.0, rng) == select_action(shifted, s, 0.0, rng));
  }
}

TEST_CASE("evaluation hooks and determinism") {
  env::OffloadEnv e(env::ScenarioConfig{});
  Rng rng(3);
  Policy p;
  p.net = nn::DenseNet::he_uniform({13, 16, 4}, nn::OutputActivation::kIdentity, rng);
  p.normalization = offload_normalization(AgentConfig{}, 4);
  const auto plain = evaluate(p, e, 300, 17);
  const auto with_identity = evaluate(p, e, 300, 17, [](const env::StateVector& s) { return s; });
  CHECK(plain == with_identity);
  CHECK(evaluate(p, e, 300, 17) == plain);
  CHECK(plain.tasks == 300);
  std::int64_t total = 0;
  for (auto c : plain.action_histogram) total += c;
  CHECK(total == 300);
  CHECK_THROWS_AS(evaluate(p, e, 0, 1), std::invalid_argument);

  const auto fixed = evaluate(fixed_station_decider(2), e, 200, 5);
  CHECK(fixed.action_histogram[2] == 200);
}

TEST_CASE("with equal advertised rates the decision follows queues and tie-breaks") {
  // Two stations both covering one meter, which sits much closer to station 1.
  env::ScenarioConfig config;
  config.station_positions = {{100, 0}, {300, 0}};
  env::BaseStation s0, s1;
  s0.id = 0;
  s0.position = {100, 0};
  s1.id = 1;
  s1.position = {300, 0};
  const double mean_cycles = 0.25e9 + 0.75e9;
  s0.processing_rate = s1.processing_rate = 16e9 / mean_cycles;
  const auto topo = env::make_topology({{0, {250, 0}, 0.5}}, {s0, s1}, config.radio);

  // Q_k = 1e-8 * DR_k - 10 * L_k
  Policy p;
  p.net = nn::DenseNet({9, 2}, nn::OutputActivation::kIdentity);
  auto w = p.net.weights(0);
  for (int k = 0; k < 2; ++k) {
    w[k * 9 + env::StateVector::data_rate_index(k)] = 1e-8;
    w[k * 9 + env::StateVector::latency_index(k, 2)] = -10.0;
  }
  p.normalization = Normalization::identity(9);
  const PoisonHook equalize = [](const env::StateVector& s) {
    auto out = s;
    out.data_rate(0) = out.data_rate(1) = 5e7;
    return out;
  };

  SUBCASE("queues drained between arrivals: always the lowest index") {
    env::OffloadEnv e(config, topo);
    e.set_fixed_interval(10.0);
    CHECK(evaluate(p, e, 100, 1).action_histogram[1] == 100);
    CHECK(evaluate(p, e, 100, 1, equalize).action_histogram[0] == 100);
  }
  SUBCASE("queues building up: choices track the shorter queue") {
    env::OffloadEnv e(config, topo);
    e.set_fixed_interval(0.02);
    const auto m = evaluate(p, e, 200, 3, equalize);
    // hand trace: argmin latency, ties to station 0
    env::OffloadEnv trace(config, topo);
    trace.set_fixed_interval(0.02);
    trace.reset(3);
    std::vector<std::int64_t> expected(2, 0);
    for (int i = 0; i < 200; ++i) {
      const auto obs = trace.observe();
      const int a = obs.latency(1) < obs.latency(0) ? 1 : 0;
      ++expected[a];
      trace.step(a);
    }
    CHECK(m.action_histogram == expected);
    CHECK(expected[0] > 0);
    CHECK(expected[1] > 0);
  }
}

TEST_CASE("agent config json") {
  AgentConfig c;
  c.episodes = 12;
  c.hidden = {32};
  const auto back = AgentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(AgentConfig::from_json({{"epsilon_start", 0.1}, {"epsilon_end", 0.5}}), ConfigError);
  CHECK_THROWS_AS(AgentConfig::from_json({{"gamma", 1.0}}), ConfigError);
  CHECK_THROWS_AS(AgentConfig::from_json({{"episodez", 3}}), ConfigError);
}

TEST_CASE("uniform random baseline spreads decisions") {
  env::OffloadEnv e(env::ScenarioConfig{});
  const auto m = evaluate(uniform_random_decider(4, 11), e, 4000, 2);
  for (auto c : m.action_histogram) CHECK(std::abs(c - 1000) < 150);
  CHECK(m.invalid_rate > 0.0);
}
