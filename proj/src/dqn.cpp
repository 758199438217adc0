#include "edgeoff/dqn.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "edgeoff/json_fields.hpp"

namespace edgeoff::dqn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
  } else {
    items_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Experience*> out(n);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

std::vector<const Experience*> ReplayBuffer::chronological() const {
  std::vector<const Experience*> out;
  const std::size_t start = items_.size() < capacity_ ? 0 : next_;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    out.push_back(&items_[(start + i) % items_.size()]);
  }
  return out;
}

double EpsilonSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / decay_steps;
  return start + (end - start) * frac;
}

Normalization Normalization::identity(int dim) {
  return Normalization{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

std::vector<double> Normalization::apply(std::span<const double> raw) const {
  if (raw.size() != scale.size()) {
    throw std::invalid_argument("normalization: state has " + std::to_string(raw.size()) +
                                " features, expected " + std::to_string(scale.size()));
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - offset[i]) * scale[i];
  return out;
}

nlohmann::json Normalization::to_json() const { return {{"offset", offset}, {"scale", scale}}; }

Normalization Normalization::from_json(const nlohmann::json& j) {
  Normalization n{j.at("offset").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
  if (n.offset.size() != n.scale.size()) throw std::invalid_argument("normalization size mismatch");
  return n;
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (buffer_capacity == 0 || batch_size == 0) {
    throw std::invalid_argument("buffer_capacity and batch_size must be positive");
  }
  if (target_sync_interval <= 0) throw std::invalid_argument("target_sync_interval must be positive");
  if (!(epsilon.end >= 0.0 && epsilon.end <= epsilon.start && epsilon.start <= 1.0)) {
    throw std::invalid_argument("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
  if (episodes <= 0 || steps_per_episode <= 0) {
    throw std::invalid_argument("episodes and steps_per_episode must be positive");
  }
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
  }
}

nlohmann::json AgentConfig::to_json() const {
  return {
      {"gamma", gamma},
      {"learning_rate", learning_rate},
      {"buffer_capacity", buffer_capacity},
      {"batch_size", batch_size},
      {"target_sync_interval", target_sync_interval},
      {"epsilon_start", epsilon.start},
      {"epsilon_end", epsilon.end},
      {"epsilon_decay_steps", epsilon.decay_steps},
      {"episodes", episodes},
      {"steps_per_episode", steps_per_episode},
      {"hidden", hidden},
      {"bits_scale", bits_scale},
      {"cycles_scale", cycles_scale},
      {"rate_scale", rate_scale},
      {"latency_scale", latency_scale},
      {"qos_scale", qos_scale},
  };
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j, const std::string& path) {
  AgentConfig c;
  FieldReader r(j, path);
  r.read("gamma", c.gamma);
  r.read("learning_rate", c.learning_rate);
  r.read("buffer_capacity", c.buffer_capacity);
  r.read("batch_size", c.batch_size);
  r.read("target_sync_interval", c.target_sync_interval);
  r.read("epsilon_start", c.epsilon.start);
  r.read("epsilon_end", c.epsilon.end);
  r.read("epsilon_decay_steps", c.epsilon.decay_steps);
  r.read("episodes", c.episodes);
  r.read("steps_per_episode", c.steps_per_episode);
  r.read("hidden", c.hidden);
  r.read("bits_scale", c.bits_scale);
  r.read("cycles_scale", c.cycles_scale);
  r.read("rate_scale", c.rate_scale);
  r.read("latency_scale", c.latency_scale);
  r.read("qos_scale", c.qos_scale);
  r.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

Normalization offload_normalization(const AgentConfig& config, int num_stations) {
  const int dim = env::StateVector::dimension(num_stations);
  Normalization n = Normalization::identity(dim);
  n.scale[0] = n.scale[1] = config.bits_scale;
  n.scale[2] = n.scale[3] = config.cycles_scale;
  for (int k = 0; k < num_stations; ++k) {
    n.scale[env::StateVector::data_rate_index(k)] = config.rate_scale;
    n.scale[env::StateVector::latency_index(k, num_stations)] = config.latency_scale;
  }
  n.scale[env::StateVector::qos_index(num_stations)] = config.qos_scale;
  return n;
}

// Policy ----------------------------------------------------------------------

std::vector<double> Policy::q_values(std::span<const double> raw_state) const {
  return net.forward(normalization.apply(raw_state));
}

int Policy::greedy_action(std::span<const double> raw_state) const {
  return argmax(q_values(raw_state));
}

nlohmann::json Policy::to_json() const {
  return {{"format", "edgeoff-policy/1"},
          {"network", net.to_json()},
          {"normalization", normalization.to_json()},
          {"metadata", {{"seed", metadata.seed}, {"config_hash", metadata.config_hash}}}};
}

Policy Policy::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "edgeoff-policy/1") throw std::invalid_argument("unsupported policy format");
    Policy p;
    p.net = nn::DenseNet::from_json(j.at("network"));
    p.normalization = Normalization::from_json(j.at("normalization"));
    p.metadata.seed = j.at("metadata").at("seed").get<std::uint64_t>();
    p.metadata.config_hash = j.at("metadata").at("config_hash").get<std::string>();
    if (p.normalization.scale.size() != static_cast<std::size_t>(p.net.input_size())) {
      throw std::invalid_argument("normalization width does not match network input");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed policy document: ") + e.what());
  }
}

void Policy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write policy file " + path);
  out << to_json().dump(1) << '\n';
}

Policy Policy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read policy file " + path);
  return from_json(nlohmann::json::parse(in));
}

// Learning ----------------------------------------------------------------------

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

int select_action(const nn::DenseNet& net, std::span<const double> normalized_state,
                  double epsilon, Rng& rng) {
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      return std::uniform_int_distribution<int>(0, net.output_size() - 1)(rng);
    }
  }
  return argmax(net.forward(normalized_state));
}

namespace {

nn::Matrix stack_states(std::span<const Experience* const> batch, bool next) {
  const int dim = static_cast<int>(next ? batch.front()->next_state.size() : batch.front()->state.size());
  nn::Matrix m(static_cast<int>(batch.size()), dim);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& v = next ? batch[r]->next_state : batch[r]->state;
    std::copy(v.begin(), v.end(), m.row(static_cast<int>(r)).begin());
  }
  return m;
}

}  // namespace

std::vector<double> td_target(std::span<const Experience* const> batch,
                              const nn::DenseNet& target_net, double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_target: empty batch");
  const nn::Matrix next_q = target_net.forward_batch(stack_states(batch, true));
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->reward;
    if (!batch[i]->terminal) {
      const auto row = next_q.row(static_cast<int>(i));
      y[i] += gamma * *std::max_element(row.begin(), row.end());
    }
  }
  return y;
}

std::optional<double> train_step(nn::DenseNet& q_net, const nn::DenseNet& target_net,
                                 const ReplayBuffer& buffer, nn::Optimizer& optimizer,
                                 const AgentConfig& config, Rng& rng) {
  if (buffer.size() < config.batch_size) return std::nullopt;
  const auto batch = buffer.sample(config.batch_size, rng);
  const auto y = td_target(batch, target_net, config.gamma);

  nn::ForwardCache cache;
  const nn::Matrix q = q_net.forward_batch(stack_states(batch, false), &cache);
  nn::Matrix grad(q.rows(), q.cols());
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (int r = 0; r < q.rows(); ++r) {
    const int a = batch[r]->action;
    const double diff = q(r, a) - y[r];
    loss += diff * diff / n;
    grad(r, a) = 2.0 * diff / n;
  }
  const auto grads = q_net.backward(cache, grad);
  optimizer.apply_update(q_net.parameters(), grads);
  return loss;
}

TrainResult train(const EnvFactory& make_env, const AgentConfig& config, std::uint64_t seed,
                  const Normalization& normalization, const TrainHooks& hooks) {
  config.validate();
  auto env = make_env();
  if (static_cast<std::size_t>(env->state_dim()) != normalization.scale.size()) {
    throw std::invalid_argument("normalization width does not match environment state");
  }
  Rng rng(seed);
  std::vector<int> sizes{env->state_dim()};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(env->num_actions());
  nn::DenseNet q_net = nn::DenseNet::he_uniform(sizes, nn::OutputActivation::kIdentity, rng);
  nn::DenseNet target_net = q_net;
  nn::OptimizerConfig opt_config;
  opt_config.learning_rate = config.learning_rate;
  nn::Optimizer optimizer(opt_config, q_net.parameter_count());
  ReplayBuffer buffer(config.buffer_capacity);

  TrainResult result;
  std::int64_t step = 0;
  for (int ep = 0; ep < config.episodes; ++ep) {
    auto state = normalization.apply(env->reset(derive_seed(seed, static_cast<std::uint64_t>(ep))));
    double reward_sum = 0.0;
    int steps = 0;
    double eps = config.epsilon.at(step);
    for (int t = 0; t < config.steps_per_episode; ++t) {
      eps = config.epsilon.at(step);
      const int action = select_action(q_net, state, eps, rng);
      auto tr = env->step(action);
      auto next = normalization.apply(tr.next_state);
      buffer.push(Experience{state, action, tr.reward, next, tr.terminal});
      reward_sum += tr.reward;
      ++steps;
      train_step(q_net, target_net, buffer, optimizer, config, rng);
      ++step;
      if (step % config.target_sync_interval == 0) target_net = q_net;
      if (hooks.after_step) hooks.after_step(step, target_net);
      state = std::move(next);
      if (tr.terminal) break;
    }
    const double mean_reward = reward_sum / steps;
    result.log.push_back(EpisodeLog{ep, mean_reward, -mean_reward, eps});
  }
  result.policy.net = std::move(q_net);
  result.policy.normalization = normalization;
  result.policy.metadata.seed = seed;
  return result;
}

OffloadMdp::OffloadMdp(env::ScenarioConfig scenario) : env_(std::move(scenario)) {}

std::vector<double> OffloadMdp::reset(std::uint64_t seed) {
  env_.reset(seed);
  const auto s = env_.observe();
  return {s.values().begin(), s.values().end()};
}

Environment::Transition OffloadMdp::step(int action) {
  auto r = env_.step(action);
  // Episodes are truncated by the trainer; the task stream itself never ends.
  return Transition{{r.next.values().begin(), r.next.values().end()}, r.reward, false};
}

TrainResult train_offload(const env::ScenarioConfig& scenario, const AgentConfig& config,
                          std::uint64_t seed) {
  const int k = static_cast<int>(scenario.station_positions.size());
  return train([&scenario] { return std::make_unique<OffloadMdp>(scenario); }, config, seed,
               offload_normalization(config, k));
}

// Evaluation ----------------------------------------------------------------------

EvalMetrics evaluate(const Decider& decide, env::OffloadEnv& env, int n_tasks, std::uint64_t seed,
                     const PoisonHook& poison, const ObservationSink& sink) {
  if (n_tasks <= 0) throw std::invalid_argument("evaluate: n_tasks must be positive");
  env.reset(seed);
  EvalMetrics m;
  m.action_histogram.assign(env.num_stations(), 0);
  double cost = 0.0, latency = 0.0, energy = 0.0;
  std::int64_t valid = 0, violations = 0;
  for (int i = 0; i < n_tasks; ++i) {
    env::StateVector observed = env.observe();
    if (poison) observed = poison(observed);
    if (sink) sink(observed);
    const int action = decide(observed);
    const auto r = env.step(action);
    ++m.action_histogram[action];
    cost += r.info.cost;
    if (r.info.valid) {
      ++valid;
      latency += r.info.time;
      energy += r.info.energy;
    }
    if (r.info.qos_violated) ++violations;
  }
  m.tasks = n_tasks;
  m.mean_cost = cost / n_tasks;
  m.mean_latency = valid ? latency / valid : 0.0;
  m.mean_energy = valid ? energy / valid : 0.0;
  m.qos_violation_rate = static_cast<double>(violations) / n_tasks;
  m.invalid_rate = static_cast<double>(n_tasks - valid) / n_tasks;
  return m;
}

EvalMetrics evaluate(const Policy& policy, env::OffloadEnv& env, int n_tasks, std::uint64_t seed,
                     const PoisonHook& poison, const ObservationSink& sink) {
  if (policy.num_actions() != env.num_stations()) {
    throw std::invalid_argument("policy action count does not match station count");
  }
  return evaluate([&policy](const env::StateVector& s) { return policy.greedy_action(s.values()); },
                  env, n_tasks, seed, poison, sink);
}

Decider uniform_random_decider(int num_stations, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng, num_stations](const env::StateVector&) {
    return std::uniform_int_distribution<int>(0, num_stations - 1)(*rng);
  };
}

Decider fixed_station_decider(int station) {
  return [station](const env::StateVector&) { return station; };
}

}  // namespace edgeoff::dqn
