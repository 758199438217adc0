#pragma once

// Finite deterministic MDPs used to check the DQN trainer against an exact
// value-iteration solution.

#include <cstdint>
#include <vector>

#include "edgeoff/dqn.hpp"

namespace edgeoff::dqn {

struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  // Indexed [state][action].
  std::vector<std::vector<int>> next;
  std::vector<std::vector<double>> reward;
  std::vector<std::vector<bool>> terminal;

  void validate() const;

  /// Three-state chain: advancing twice pays 1.0 when cashing out at the
  /// last state, while the "take" action pays a small immediate 0.1.
  static TabularMdp delayed_reward_chain();
};

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> policy;  // greedy, lowest-index tie-break
  int iterations = 0;
};

/// Iterates the Bellman optimality operator until the max residual drops
/// below `tolerance`.
ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tolerance = 1e-10);

/// One-hot encoded episodic wrapper. Episodes start in a uniformly random
/// state; time-limit truncation is not reported as terminal.
class TabularEnv : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp);

  int state_dim() const override { return mdp_.num_states; }
  int num_actions() const override { return mdp_.num_actions; }
  std::vector<double> reset(std::uint64_t seed) override;
  Transition step(int action) override;

  std::vector<double> encode(int state) const;

 private:
  TabularMdp mdp_;
  Rng rng_;
  int state_ = 0;
};

}  // namespace edgeoff::dqn
