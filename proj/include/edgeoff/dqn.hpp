#pragma once

// Deep Q-learning offloading agent: epsilon-greedy acting, experience
// replay, a periodically synced target network, centralized training that
// produces a frozen Policy, and evaluation of policies (optionally under an
// observation-poisoning hook) against baseline deciders.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/grid_env.hpp"
#include "edgeoff/nn.hpp"
#include "edgeoff/rng.hpp"

namespace edgeoff::dqn {

/// Generic episodic MDP seen by the trainer. States are raw feature vectors.
class Environment {
 public:
  struct Transition {
    std::vector<double> next_state;
    double reward = 0.0;
    bool terminal = false;
  };

  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Transition step(int action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct Experience {
  std::vector<double> state;  // normalized
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;  // normalized
  bool terminal = false;
};

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }
  /// Uniform sample with replacement.
  std::vector<const Experience*> sample(std::size_t n, Rng& rng) const;
  /// Entries ordered oldest to newest.
  std::vector<const Experience*> chronological() const;

 private:
  std::size_t capacity_;
  std::vector<Experience> items_;
  std::size_t next_ = 0;
};

/// Linear decay from `start` to `end` over `decay_steps`, constant after.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t decay_steps = 5000;

  double at(std::int64_t step) const;
};

/// Per-feature affine scaling applied to raw observations before they reach
/// the network: x' = (x - offset) * scale.
struct Normalization {
  std::vector<double> offset;
  std::vector<double> scale;

  static Normalization identity(int dim);
  std::vector<double> apply(std::span<const double> raw) const;
  nlohmann::json to_json() const;
  static Normalization from_json(const nlohmann::json& j);
  bool operator==(const Normalization&) const = default;
};

struct AgentConfig {
  double gamma = 0.95;
  double learning_rate = 1e-3;
  std::size_t buffer_capacity = 10000;
  std::size_t batch_size = 64;
  std::int64_t target_sync_interval = 200;
  EpsilonSchedule epsilon;
  int episodes = 300;
  int steps_per_episode = 100;
  std::vector<int> hidden{64, 64};
  // Offload-state scaling.
  double bits_scale = 1e-6;
  double cycles_scale = 1e-9;
  double rate_scale = 1e-8;
  double latency_scale = 1.0;
  double qos_scale = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static AgentConfig from_json(const nlohmann::json& j, const std::string& path = "agent");
};

/// Feature scaling for the [D_d, D_m, C_d, C_m, DR.., L.., QoS] layout.
Normalization offload_normalization(const AgentConfig& config, int num_stations);

struct PolicyMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Frozen Q-network plus the scaling it was trained with. Deciders load a
/// Policy and only ever read it.
struct Policy {
  nn::DenseNet net;
  Normalization normalization;
  PolicyMetadata metadata;

  std::vector<double> q_values(std::span<const double> raw_state) const;
  int greedy_action(std::span<const double> raw_state) const;
  int num_actions() const { return net.output_size(); }

  nlohmann::json to_json() const;
  static Policy from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Policy load(const std::string& path);
};

/// Argmax with ties going to the lowest index.
int argmax(std::span<const double> values);

/// With probability epsilon a uniform action, else the greedy one.
int select_action(const nn::DenseNet& net, std::span<const double> normalized_state,
                  double epsilon, Rng& rng);

/// y = r + gamma * max_a' Q_target(s', a'), or y = r for terminal transitions.
std::vector<double> td_target(std::span<const Experience* const> batch,
                              const nn::DenseNet& target_net, double gamma);

/// One minibatch regression step of Q(s, a) toward the TD target; only the
/// taken action's output receives gradient. Returns the batch MSE, or
/// nothing when the buffer holds fewer than batch_size experiences.
std::optional<double> train_step(nn::DenseNet& q_net, const nn::DenseNet& target_net,
                                 const ReplayBuffer& buffer, nn::Optimizer& optimizer,
                                 const AgentConfig& config, Rng& rng);

struct EpisodeLog {
  int episode = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  Policy policy;
  std::vector<EpisodeLog> log;
};

/// Observer invoked after every target-network sync and every gradient
/// step; used by tests to watch the target network.
struct TrainHooks {
  std::function<void(std::int64_t step, const nn::DenseNet& target)> after_step;
};

TrainResult train(const EnvFactory& make_env, const AgentConfig& config, std::uint64_t seed,
                  const Normalization& normalization, const TrainHooks& hooks = {});

/// Environment adapter running 100-task (configurable) episodes of the
/// offloading simulation; every episode starts from empty queues.
class OffloadMdp : public Environment {
 public:
  explicit OffloadMdp(env::ScenarioConfig scenario);

  int state_dim() const override { return env_.state_dim(); }
  int num_actions() const override { return env_.num_stations(); }
  std::vector<double> reset(std::uint64_t seed) override;
  Transition step(int action) override;

 private:
  env::OffloadEnv env_;
};

/// Trains on the offloading scenario with the scenario-derived scaling.
TrainResult train_offload(const env::ScenarioConfig& scenario, const AgentConfig& config,
                          std::uint64_t seed);

// Evaluation ------------------------------------------------------------------

using Decider = std::function<int(const env::StateVector& observed)>;
using PoisonHook = std::function<env::StateVector(const env::StateVector& observed)>;
using ObservationSink = std::function<void(const env::StateVector& seen_by_agent)>;

struct EvalMetrics {
  std::int64_t tasks = 0;
  double mean_cost = 0.0;
  double mean_latency = 0.0;  // over tasks served by a covering station
  double mean_energy = 0.0;   // likewise
  double qos_violation_rate = 0.0;
  double invalid_rate = 0.0;
  std::vector<std::int64_t> action_histogram;

  bool operator==(const EvalMetrics&) const = default;
};

/// Runs `n_tasks` tasks from a reset environment. When `poison` is set each
/// observation is transformed before the decision; costs always use the true
/// channel state. `sink` sees exactly what the decider sees.
EvalMetrics evaluate(const Decider& decide, env::OffloadEnv& env, int n_tasks,
                     std::uint64_t seed, const PoisonHook& poison = {},
                     const ObservationSink& sink = {});

/// Greedy (epsilon = 0) evaluation of a frozen policy.
EvalMetrics evaluate(const Policy& policy, env::OffloadEnv& env, int n_tasks, std::uint64_t seed,
                     const PoisonHook& poison = {}, const ObservationSink& sink = {});

Decider uniform_random_decider(int num_stations, std::uint64_t seed);
Decider fixed_station_decider(int station);

}  // namespace edgeoff::dqn
