#include "articnav/replay.hpp"

#include <cmath>
#include <limits>

#include "articnav/error.hpp"

namespace articnav {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCategory::invalid_argument, "sum tree capacity must be > 0");
  base_ = 1;
  while (base_ < capacity) base_ <<= 1;
  sum_.assign(2 * base_, 0.0);
  min_.assign(2 * base_, std::numeric_limits<double>::infinity());
}

void SumTree::set(std::size_t leaf, double value) {
  std::size_t i = base_ + leaf;
  sum_[i] = value;
  min_[i] = value;
  for (i >>= 1; i >= 1; i >>= 1) {
    sum_[i] = sum_[2 * i] + sum_[2 * i + 1];
    min_[i] = std::min(min_[2 * i], min_[2 * i + 1]);
  }
}

std::size_t SumTree::find(double prefix) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = sum_[2 * i];
    if (prefix < left || sum_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      prefix -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, capacity_ - 1);
}

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, std::size_t observation_size,
                                     double alpha)
    : capacity_(capacity), obs_size_(observation_size), alpha_(alpha), tree_(capacity) {
  if (observation_size == 0) throw Error(ErrorCategory::invalid_argument, "observation size must be > 0");
  if (!(alpha >= 0.0)) throw Error(ErrorCategory::invalid_argument, "priority exponent must be >= 0");
}

void PrioritizedReplay::add(const Transition& t) {
  if (t.observation.size() != obs_size_ || t.next_observation.size() != obs_size_) {
    throw Error(ErrorCategory::invalid_argument, "transition observation size mismatch");
  }
  std::lock_guard lock(mutex_);
  const std::size_t slot = next_;
  if (size_ < capacity_) {
    obs_.insert(obs_.end(), t.observation.begin(), t.observation.end());
    next_obs_.insert(next_obs_.end(), t.next_observation.begin(), t.next_observation.end());
    actions_.push_back(static_cast<std::uint32_t>(t.action));
    rewards_.push_back(t.reward);
    dones_.push_back(t.done ? 1 : 0);
    raw_priority_.push_back(max_priority_);
    ++size_;
  } else {
    std::copy(t.observation.begin(), t.observation.end(), obs_.begin() + slot * obs_size_);
    std::copy(t.next_observation.begin(), t.next_observation.end(),
              next_obs_.begin() + slot * obs_size_);
    actions_[slot] = static_cast<std::uint32_t>(t.action);
    rewards_[slot] = t.reward;
    dones_[slot] = t.done ? 1 : 0;
    raw_priority_[slot] = max_priority_;
  }
  tree_.set(slot, std::pow(max_priority_, alpha_));
  next_ = (next_ + 1) % capacity_;
}

std::size_t PrioritizedReplay::size() const {
  std::lock_guard lock(mutex_);
  return size_;
}

std::vector<std::size_t> PrioritizedReplay::sample_indices(std::size_t batch,
                                                           std::mt19937_64& rng) const {
  std::lock_guard lock(mutex_);
  if (size_ == 0) throw Error(ErrorCategory::empty_buffer, "cannot sample from an empty replay buffer");
  std::uniform_real_distribution<double> u(0.0, tree_.total());
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = std::min(tree_.find(u(rng)), size_ - 1);
  return out;
}

void PrioritizedReplay::fill(ReplayBatch& out, std::size_t slot, std::size_t index) const {
  const auto col = static_cast<Eigen::Index>(slot);
  out.observations.col(col) =
      Eigen::Map<const Eigen::VectorXf>(obs_.data() + index * obs_size_, static_cast<Eigen::Index>(obs_size_));
  out.next_observations.col(col) = Eigen::Map<const Eigen::VectorXf>(
      next_obs_.data() + index * obs_size_, static_cast<Eigen::Index>(obs_size_));
  out.actions[slot] = actions_[index];
  out.rewards[col] = rewards_[index];
  out.dones[col] = dones_[index];
  out.indices[slot] = index;
}

ReplayBatch PrioritizedReplay::sample(std::size_t batch, double beta, std::mt19937_64& rng) const {
  const auto indices = sample_indices(batch, rng);
  std::lock_guard lock(mutex_);
  ReplayBatch out;
  const auto b = static_cast<Eigen::Index>(batch);
  const auto n = static_cast<Eigen::Index>(obs_size_);
  out.observations.resize(n, b);
  out.next_observations.resize(n, b);
  out.actions.resize(batch);
  out.rewards.resize(b);
  out.dones.resize(b);
  out.indices.resize(batch);
  out.weights.resize(b);
  // (N P_i)^-beta / (N P_min)^-beta = (p_i / p_min)^-beta
  const double p_min = tree_.min();
  for (std::size_t k = 0; k < batch; ++k) {
    fill(out, k, indices[k]);
    out.weights[static_cast<Eigen::Index>(k)] = std::pow(tree_.get(indices[k]) / p_min, -beta);
  }
  return out;
}

void PrioritizedReplay::update_priorities(std::span<const std::size_t> indices,
                                          std::span<const double> priorities) {
  if (indices.size() != priorities.size()) {
    throw Error(ErrorCategory::invalid_argument, "priority update size mismatch");
  }
  std::lock_guard lock(mutex_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double p = priorities[k];
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCategory::non_finite, "replay priority must be finite and > 0");
    }
    if (indices[k] >= size_) throw Error(ErrorCategory::invalid_argument, "replay index out of range");
    raw_priority_[indices[k]] = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(indices[k], std::pow(p, alpha_));
  }
}

double PrioritizedReplay::priority(std::size_t index) const {
  std::lock_guard lock(mutex_);
  return raw_priority_.at(index);
}

double PrioritizedReplay::total_priority() const {
  std::lock_guard lock(mutex_);
  return tree_.total();
}

double PrioritizedReplay::max_priority() const {
  std::lock_guard lock(mutex_);
  return max_priority_;
}

Transition PrioritizedReplay::at(std::size_t index) const {
  std::lock_guard lock(mutex_);
  if (index >= size_) throw Error(ErrorCategory::invalid_argument, "replay index out of range");
  Transition t;
  t.observation.assign(obs_.begin() + index * obs_size_, obs_.begin() + (index + 1) * obs_size_);
  t.next_observation.assign(next_obs_.begin() + index * obs_size_,
                            next_obs_.begin() + (index + 1) * obs_size_);
  t.action = actions_[index];
  t.reward = rewards_[index];
  t.done = dones_[index] != 0;
  return t;
}

}  // namespace articnav
