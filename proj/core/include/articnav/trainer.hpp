#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "articnav/envmdp.hpp"
#include "articnav/sacd.hpp"

namespace articnav {

struct TrainConfig {
  SacConfig sac;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_interval = 100000;  // env steps; 0 disables periodic checkpoints
  std::size_t metrics_window = 250;            // episodes
  std::size_t log_every = 50;                  // episodes between progress log lines; 0 = silent
  // Worker threads. 0 means min(workers, ARTIC_NAV_THREADS or hardware threads).
  std::size_t threads = 0;
  std::uint32_t layout_version = kObservationLayoutVersion;
  std::string metadata;  // stored verbatim in every checkpoint
  std::filesystem::path out_dir;  // metrics.csv and checkpoints; empty = nothing written

  void validate() const;
};

// One row of metrics.csv, written when an episode ends.
struct EpisodeRecord {
  std::uint64_t step = 0;  // env steps taken by all workers when the episode ended
  std::uint64_t episode = 0;
  double reward = 0.0;
  bool success = false;
  double window_mean_reward = 0.0;
  double window_success_rate = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  std::size_t task = 0;
  std::size_t worker = 0;
  std::size_t steps = 0;
  FailureCause failure_cause = FailureCause::none;
  double mean_distance = 0.0;  // time-averaged distance to the lane centre

  bool operator==(const EpisodeRecord&) const = default;
};

const std::vector<std::string>& metrics_columns();
std::string format_metrics_row(const EpisodeRecord& r);
// Throws Error(parse) on a malformed header or row, Error(file_not_found).
std::vector<EpisodeRecord> read_metrics_csv(const std::filesystem::path& path);

struct TickInfo {
  std::uint64_t env_step = 0;
  std::size_t buffer_size = 0;
  std::uint64_t episodes = 0;
  std::uint64_t updates = 0;
};

struct TrainResult {
  std::vector<EpisodeRecord> episodes;
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  std::vector<std::filesystem::path> checkpoints;
};

using EnvFactory = std::function<std::unique_ptr<Environment>(std::size_t worker)>;

// Resolves the worker thread count from the config and ARTIC_NAV_THREADS.
std::size_t resolve_thread_count(const TrainConfig& config);

// Lockstep collection: on every tick each worker takes one step with its own
// policy snapshot (refreshed at episode start) and RNG; transitions are then
// appended to the shared buffer in worker order, followed by the learner's
// updates. Results therefore do not depend on the thread count.
class Trainer {
 public:
  Trainer(TrainConfig config, EnvFactory factory);

  // Runs to total_steps. On an exception a final checkpoint is written and
  // the exception is rethrown.
  TrainResult run(const std::function<void(const TickInfo&)>& on_tick = {});

  const SacAgent& agent() const { return agent_; }
  const PrioritizedReplay& buffer() const { return buffer_; }
  const TrainConfig& config() const { return config_; }

  Checkpoint make_checkpoint(std::uint64_t env_step, std::uint64_t episodes) const;

 private:
  TrainConfig config_;
  EnvFactory factory_;
  std::vector<std::unique_ptr<Environment>> envs_;
  SacAgent agent_;
  PrioritizedReplay buffer_;
};

}  // namespace articnav
