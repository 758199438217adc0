#include "edgeoff/toy_mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace edgeoff::dqn {

void TabularMdp::validate() const {
  if (num_states <= 0 || num_actions <= 0) throw std::invalid_argument("empty MDP");
  auto check = [this](const auto& table) {
    if (table.size() != static_cast<std::size_t>(num_states)) return false;
    for (const auto& row : table) {
      if (row.size() != static_cast<std::size_t>(num_actions)) return false;
    }
    return true;
  };
  if (!check(next) || !check(reward) || !check(terminal)) {
    throw std::invalid_argument("MDP tables must be num_states x num_actions");
  }
  for (const auto& row : next) {
    for (int s : row) {
      if (s < 0 || s >= num_states) throw std::invalid_argument("MDP successor out of range");
    }
  }
}

TabularMdp TabularMdp::delayed_reward_chain() {
  TabularMdp m;
  m.num_states = 3;
  m.num_actions = 2;
  // action 0: take 0.1 and return to the start (cash out 1.0 from state 2)
  // action 1: advance along the chain (stay put at the end)
  m.next = {{0, 1}, {0, 2}, {0, 2}};
  m.reward = {{0.1, 0.0}, {0.1, 0.0}, {1.0, 0.0}};
  m.terminal = {{false, false}, {false, false}, {false, false}};
  return m;
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tolerance) {
  mdp.validate();
  ValueIterationResult out;
  out.values.assign(mdp.num_states, 0.0);
  auto q = [&](const std::vector<double>& v, int s, int a) {
    const double cont = mdp.terminal[s][a] ? 0.0 : gamma * v[mdp.next[s][a]];
    return mdp.reward[s][a] + cont;
  };
  for (;;) {
    std::vector<double> updated(mdp.num_states);
    double residual = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      double best = q(out.values, s, 0);
      for (int a = 1; a < mdp.num_actions; ++a) best = std::max(best, q(out.values, s, a));
      updated[s] = best;
      residual = std::max(residual, std::abs(best - out.values[s]));
    }
    out.values = std::move(updated);
    ++out.iterations;
    if (residual < tolerance || out.iterations > 1000000) break;
  }
  out.policy.assign(mdp.num_states, 0);
  for (int s = 0; s < mdp.num_states; ++s) {
    std::vector<double> qs(mdp.num_actions);
    for (int a = 0; a < mdp.num_actions; ++a) qs[a] = q(out.values, s, a);
    out.policy[s] = argmax(qs);
  }
  return out;
}

TabularEnv::TabularEnv(TabularMdp mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

std::vector<double> TabularEnv::encode(int state) const {
  std::vector<double> v(mdp_.num_states, 0.0);
  v[state] = 1.0;
  return v;
}

std::vector<double> TabularEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = std::uniform_int_distribution<int>(0, mdp_.num_states - 1)(rng_);
  return encode(state_);
}

Environment::Transition TabularEnv::step(int action) {
  if (action < 0 || action >= mdp_.num_actions) throw std::out_of_range("action out of range");
  Transition t;
  t.reward = mdp_.reward[state_][action];
  t.terminal = mdp_.terminal[state_][action];
  state_ = mdp_.next[state_][action];
  t.next_state = encode(state_);
  return t;
}

}  // namespace edgeoff::dqn
