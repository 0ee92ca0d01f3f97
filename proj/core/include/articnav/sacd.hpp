#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "articnav/neuralnet.hpp"
#include "articnav/replay.hpp"

namespace articnav {

enum class AlphaMode { fixed, auto_tune, anneal };

std::string_view to_string(AlphaMode mode);
AlphaMode alpha_mode_from_string(std::string_view name);

struct SacConfig {
  double gamma = 1.0;
  int n_step = 1;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 600000;
  bool twin_q = true;
  double epsilon_initial = 1.0;
  double epsilon_final = 0.01;
  std::uint64_t epsilon_timesteps = 1000000;
  std::vector<std::size_t> q_hidden{512, 512, 1024};
  std::vector<std::size_t> policy_hidden{512, 512, 1024};

  double lr = 3e-4;
  double tau = 0.005;
  std::size_t target_update_interval = 1;
  AlphaMode alpha_mode = AlphaMode::auto_tune;
  double alpha_initial = 1.0;
  double alpha_final = 1e-3;               // anneal mode
  std::uint64_t alpha_anneal_updates = 100000;
  double alpha_lr = 3e-4;
  double target_entropy_ratio = 0.98;      // of ln(action count)
  double priority_alpha = 0.6;
  double priority_beta_initial = 0.4;
  double priority_beta_final = 1.0;
  double priority_epsilon = 1e-6;
  std::size_t workers = 8;
  std::uint64_t total_steps = 1500000;
  std::uint64_t warmup_steps = 10000;
  double updates_per_step = 1.0;

  // Throws Error(invalid_argument) naming the offending field.
  void validate() const;
  bool operator==(const SacConfig&) const = default;
};

// Linear decay from epsilon_initial to epsilon_final over epsilon_timesteps.
double epsilon_at(const SacConfig& config, std::uint64_t env_step);
// Importance exponent annealed linearly over total_steps.
double beta_at(const SacConfig& config, std::uint64_t env_step);

enum class ActionMode { train, eval };

struct UpdateStats {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;     // mean policy entropy over the batch
  double mean_q = 0.0;
  std::vector<double> priorities;
  bool operator==(const UpdateStats&) const = default;
};

// Argmax with ties broken towards the lowest index.
std::size_t argmax(std::span<const double> values);

class SacAgent {
 public:
  SacAgent(std::size_t observation_size, std::size_t action_count, SacConfig config,
           std::uint64_t seed);

  const SacConfig& config() const { return config_; }
  std::size_t observation_size() const { return obs_size_; }
  std::size_t action_count() const { return actions_; }

  // Train: epsilon-greedy layered over sampling the softmax policy.
  // Eval: argmax of the policy probabilities.
  static std::size_t select_action(const Mlp& policy, std::span<const float> observation,
                                   double epsilon, ActionMode mode, std::mt19937_64& rng);
  std::size_t select_action(std::span<const float> observation, std::uint64_t env_step,
                            ActionMode mode, std::mt19937_64& rng) const;

  // Soft targets y = r + gamma (1 - done) sum_a pi(a|s') (min Qbar(s', a) - alpha log pi(a|s')).
  Eigen::VectorXd q_targets(const ReplayBatch& batch) const;

  // One learner step on a given batch. Throws Error(non_finite) when a loss
  // or gradient is not finite.
  UpdateStats update_on_batch(const ReplayBatch& batch);
  // Samples from the buffer, updates, and writes the new priorities back.
  UpdateStats update(PrioritizedReplay& buffer, double beta);

  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  double target_entropy() const;
  std::uint64_t update_count() const { return updates_; }

  const Mlp& policy() const { return policy_; }
  const Mlp& q1() const { return q1_; }
  const Mlp& q2() const { return q2_; }
  const Mlp& target_q1() const { return target_q1_; }
  const Mlp& target_q2() const { return target_q2_; }
  Mlp& mutable_policy() { return policy_; }
  Mlp& mutable_q1() { return q1_; }
  Mlp& mutable_q2() { return q2_; }
  Mlp& mutable_target_q1() { return target_q1_; }
  Mlp& mutable_target_q2() { return target_q2_; }

  // Networks, optimizer states, alpha and counters. The caller fills the
  // metadata and layout version.
  void store(Checkpoint& ckpt) const;
  // Throws Error(corrupt_file) when an entry is missing or mis-shaped.
  void restore(const Checkpoint& ckpt);

  std::mt19937_64& rng() { return rng_; }

 private:
  void soft_update();

  SacConfig config_;
  std::size_t obs_size_;
  std::size_t actions_;
  Mlp policy_, q1_, q2_, target_q1_, target_q2_;
  Adam policy_opt_, q1_opt_, q2_opt_, alpha_opt_;
  double log_alpha_ = 0.0;
  std::uint64_t updates_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace articnav
