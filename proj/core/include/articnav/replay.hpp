#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace articnav {

// Binary tree over leaf values keeping subtree sums and minima. Parents are
// recomputed from their children on every write, so sums never drift.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 1);

  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return sum_[base_ + leaf]; }
  double total() const { return sum_[1]; }
  // Minimum over leaves that have been set (infinity when none).
  double min() const { return min_[1]; }
  // Leaf whose cumulative range contains `prefix` in [0, total).
  std::size_t find(double prefix) const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> sum_;
  std::vector<double> min_;
};

struct Transition {
  std::vector<float> observation;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<float> next_observation;
  bool done = false;
};

struct ReplayBatch {
  Eigen::MatrixXf observations;       // obs x batch
  Eigen::MatrixXf next_observations;  // obs x batch
  std::vector<std::size_t> actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd dones;              // 1 for terminal transitions
  std::vector<std::size_t> indices;
  Eigen::VectorXd weights;            // importance weights, max 1
};

// Proportional prioritized replay on a ring buffer. Stored priorities are
// raised to `alpha`; new transitions enter at the largest priority seen so
// far. add() may be called from several threads; sampling and priority
// updates take the same lock.
class PrioritizedReplay {
 public:
  PrioritizedReplay(std::size_t capacity, std::size_t observation_size, double alpha);

  void add(const Transition& t);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t observation_size() const { return obs_size_; }
  double alpha() const { return alpha_; }

  // Draws `batch` indices independently with P(i) = p_i^alpha / sum p^alpha
  // and weights (N P(i))^-beta normalised by the largest possible weight.
  // Throws Error(empty_buffer) when nothing is stored.
  ReplayBatch sample(std::size_t batch, double beta, std::mt19937_64& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

  // Raw (pre-exponent) priorities; each must be > 0 and finite.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> priorities);

  double priority(std::size_t index) const;  // raw priority
  double total_priority() const;             // sum of p^alpha
  double max_priority() const;
  Transition at(std::size_t index) const;

 private:
  void fill(ReplayBatch& out, std::size_t slot, std::size_t index) const;

  std::size_t capacity_;
  std::size_t obs_size_;
  double alpha_;
  mutable std::mutex mutex_;
  SumTree tree_;
  std::vector<float> obs_;
  std::vector<float> next_obs_;
  std::vector<std::uint32_t> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> dones_;
  std::vector<double> raw_priority_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace articnav
