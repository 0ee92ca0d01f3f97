#include "articnav/trainer.hpp"

#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "articnav/error.hpp"

namespace articnav {

void TrainConfig::validate() const {
  sac.validate();
  if (metrics_window == 0) throw Error(ErrorCategory::invalid_argument, "train.metrics_window: must be > 0");
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "step",    "episode",   "reward",      "success", "window_mean_reward", "window_success_rate",
      "epsilon", "alpha",     "q1_loss",     "q2_loss", "policy_loss",        "entropy",
      "task",    "worker",    "steps",       "failure_cause", "mean_distance"};
  return cols;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCategory::parse, "metrics line " + std::to_string(line) + ": bad number '" + s + "'");
}

std::uint64_t parse_uint(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCategory::parse, "metrics line " + std::to_string(line) + ": bad integer '" + s + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Runs fn(i) for i in [0, n); thread t takes the indices with i % T == t.
class TickPool {
 public:
  explicit TickPool(std::size_t threads) {
    for (std::size_t t = 1; t < threads; ++t) pool_.emplace_back([this, t] { loop(t); });
  }
  ~TickPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    start_.notify_all();
    for (auto& th : pool_) th.join();
  }
  TickPool(const TickPool&) = delete;
  TickPool& operator=(const TickPool&) = delete;

  void run(std::size_t n, const std::function<void(std::size_t)>& fn) {
    errors_.assign(n, nullptr);
    if (pool_.empty()) {
      work(0, n, fn);
    } else {
      {
        std::lock_guard lock(mutex_);
        job_ = &fn;
        n_ = n;
        pending_ = pool_.size();
        ++generation_;
      }
      start_.notify_all();
      work(0, n, fn);
      std::unique_lock lock(mutex_);
      done_.wait(lock, [this] { return pending_ == 0; });
    }
    for (auto& e : errors_) {
      if (e) std::rethrow_exception(e);
    }
  }

 private:
  std::size_t stride() const { return pool_.size() + 1; }

  void work(std::size_t t, std::size_t n, const std::function<void(std::size_t)>& fn) {
    for (std::size_t i = t; i < n; i += stride()) {
      try {
        fn(i);
      } catch (...) {
        errors_[i] = std::current_exception();
      }
    }
  }

  void loop(std::size_t t) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* job = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock lock(mutex_);
        start_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        n = n_;
      }
      work(t, n, *job);
      {
        std::lock_guard lock(mutex_);
        --pending_;
      }
      done_.notify_one();
    }
  }

  std::vector<std::thread> pool_;
  std::mutex mutex_;
  std::condition_variable start_, done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t n_ = 0;
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

std::vector<std::unique_ptr<Environment>> make_envs(const TrainConfig& config, const EnvFactory& factory) {
  config.validate();
  std::vector<std::unique_ptr<Environment>> envs;
  for (std::size_t w = 0; w < config.sac.workers; ++w) {
    envs.push_back(factory(w));
    if (!envs.back()) throw Error(ErrorCategory::invalid_argument, "environment factory returned null");
    if (envs.back()->task_count() == 0) throw Error(ErrorCategory::invalid_argument, "environment has no tasks");
    if (envs.back()->observation_size() != envs.front()->observation_size() ||
        envs.back()->action_count() != envs.front()->action_count()) {
      throw Error(ErrorCategory::invalid_argument, "workers disagree on observation or action size");
    }
  }
  return envs;
}

}  // namespace

std::string format_metrics_row(const EpisodeRecord& r) {
  std::string s;
  s += std::to_string(r.step) + ',' + std::to_string(r.episode) + ',' + num(r.reward) + ',' +
       (r.success ? "1" : "0") + ',' + num(r.window_mean_reward) + ',' + num(r.window_success_rate) +
       ',' + num(r.epsilon) + ',' + num(r.alpha) + ',' + num(r.q1_loss) + ',' + num(r.q2_loss) + ',' +
       num(r.policy_loss) + ',' + num(r.entropy) + ',' + std::to_string(r.task) + ',' +
       std::to_string(r.worker) + ',' + std::to_string(r.steps) + ',' +
       std::string(to_string(r.failure_cause)) + ',' + num(r.mean_distance);
  return s;
}

std::vector<EpisodeRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::file_not_found, "cannot open " + path.string());
  std::string line;
  std::size_t n = 1;
  if (!std::getline(in, line) || split(line) != metrics_columns()) {
    throw Error(ErrorCategory::parse, "metrics line 1: unexpected header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != metrics_columns().size()) {
      throw Error(ErrorCategory::parse, "metrics line " + std::to_string(n) + ": expected " +
                                            std::to_string(metrics_columns().size()) + " columns");
    }
    EpisodeRecord r;
    r.step = parse_uint(c[0], n);
    r.episode = parse_uint(c[1], n);
    r.reward = parse_double(c[2], n);
    r.success = parse_uint(c[3], n) != 0;
    r.window_mean_reward = parse_double(c[4], n);
    r.window_success_rate = parse_double(c[5], n);
    r.epsilon = parse_double(c[6], n);
    r.alpha = parse_double(c[7], n);
    r.q1_loss = parse_double(c[8], n);
    r.q2_loss = parse_double(c[9], n);
    r.policy_loss = parse_double(c[10], n);
    r.entropy = parse_double(c[11], n);
    r.task = parse_uint(c[12], n);
    r.worker = parse_uint(c[13], n);
    r.steps = parse_uint(c[14], n);
    try {
      r.failure_cause = failure_cause_from_string(c[15]);
    } catch (const Error&) {
      throw Error(ErrorCategory::parse, "metrics line " + std::to_string(n) + ": bad failure cause");
    }
    r.mean_distance = parse_double(c[16], n);
    out.push_back(r);
  }
  return out;
}

std::size_t resolve_thread_count(const TrainConfig& config) {
  std::size_t cap = config.threads;
  if (cap == 0) {
    cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ARTIC_NAV_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) cap = static_cast<std::size_t>(v);
    }
  }
  return std::max<std::size_t>(1, std::min(cap, config.sac.workers));
}

Trainer::Trainer(TrainConfig config, EnvFactory factory)
    : config_(std::move(config)),
      factory_(std::move(factory)),
      envs_(make_envs(config_, factory_)),
      agent_(envs_.front()->observation_size(), envs_.front()->action_count(), config_.sac, config_.seed),
      buffer_(config_.sac.buffer_capacity, envs_.front()->observation_size(), config_.sac.priority_alpha) {}

Checkpoint Trainer::make_checkpoint(std::uint64_t env_step, std::uint64_t episodes) const {
  Checkpoint ckpt;
  ckpt.layout_version = config_.layout_version;
  ckpt.metadata = config_.metadata;
  agent_.store(ckpt);
  ckpt.counters["env_steps"] = env_step;
  ckpt.counters["episodes"] = episodes;
  return ckpt;
}

TrainResult Trainer::run(const std::function<void(const TickInfo&)>& on_tick) {
  const SacConfig& sac = config_.sac;
  const std::size_t n_workers = envs_.size();

  struct Worker {
    std::vector<float> obs;
    Mlp policy;
    std::mt19937_64 rng;
    std::size_t task = 0;
    double reward = 0.0;
    double distance = 0.0;
    std::size_t steps = 0;
    std::size_t action = 0;
    StepResult last;
  };
  std::vector<Worker> workers(n_workers);
  auto start_episode = [&](std::size_t w) {
    Worker& k = workers[w];
    std::uniform_int_distribution<std::size_t> pick(0, envs_[w]->task_count() - 1);
    k.task = pick(k.rng);
    const std::uint64_t reset_seed = k.rng();
    k.obs = envs_[w]->reset(k.task, reset_seed);
    k.policy = agent_.policy();
    k.reward = 0.0;
    k.distance = 0.0;
    k.steps = 0;
  };
  for (std::size_t w = 0; w < n_workers; ++w) {
    std::seed_seq seq{config_.seed, static_cast<std::uint64_t>(w), std::uint64_t{0x5acd}};
    workers[w].rng.seed(seq);
    start_episode(w);
  }

  std::ofstream metrics;
  if (!config_.out_dir.empty()) {
    std::filesystem::create_directories(config_.out_dir);
    metrics.open(config_.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw Error(ErrorCategory::io, "cannot write " + (config_.out_dir / "metrics.csv").string());
    for (std::size_t i = 0; i < metrics_columns().size(); ++i) {
      metrics << (i ? "," : "") << metrics_columns()[i];
    }
    metrics << '\n' << std::flush;
  }

  TrainResult result;
  auto save = [&](const std::string& name, std::uint64_t env_step) {
    if (config_.out_dir.empty()) return;
    const auto path = config_.out_dir / name;
    save_checkpoint(make_checkpoint(env_step, result.episodes.size()), path);
    result.checkpoints.push_back(path);
  };

  TickPool pool(resolve_thread_count(config_));
  std::deque<std::pair<double, bool>> window;
  double window_reward = 0.0;
  std::size_t window_success = 0;
  UpdateStats last_stats;
  last_stats.alpha = agent_.alpha();
  double pending_updates = 0.0;
  std::uint64_t env_step = 0;

  try {
    while (env_step < sac.total_steps) {
      const std::size_t active =
          static_cast<std::size_t>(std::min<std::uint64_t>(n_workers, sac.total_steps - env_step));
      const std::uint64_t base = env_step;
      pool.run(active, [&](std::size_t w) {
        Worker& k = workers[w];
        k.action = SacAgent::select_action(k.policy, k.obs, epsilon_at(sac, base + w), ActionMode::train, k.rng);
        k.last = envs_[w]->step(k.action);
      });

      for (std::size_t w = 0; w < active; ++w) {
        Worker& k = workers[w];
        buffer_.add(Transition{k.obs, k.action, k.last.reward, k.last.observation, k.last.done});
        k.reward += k.last.reward;
        k.distance += k.last.info.distance_to_center;
        ++k.steps;
        ++env_step;
        k.obs = std::move(k.last.observation);
        if (!k.last.done) continue;

        EpisodeRecord r;
        r.step = env_step;
        r.episode = result.episodes.size();
        r.reward = k.reward;
        r.success = k.last.info.success;
        window.emplace_back(r.reward, r.success);
        window_reward += r.reward;
        window_success += r.success ? 1 : 0;
        if (window.size() > config_.metrics_window) {
          window_reward -= window.front().first;
          window_success -= window.front().second ? 1 : 0;
          window.pop_front();
        }
        r.window_mean_reward = window_reward / static_cast<double>(window.size());
        r.window_success_rate = static_cast<double>(window_success) / static_cast<double>(window.size());
        r.epsilon = epsilon_at(sac, env_step);
        r.alpha = last_stats.alpha;
        r.q1_loss = last_stats.q1_loss;
        r.q2_loss = last_stats.q2_loss;
        r.policy_loss = last_stats.policy_loss;
        r.entropy = last_stats.entropy;
        r.task = k.task;
        r.worker = w;
        r.steps = k.steps;
        r.failure_cause = k.last.info.failure_cause;
        r.mean_distance = k.distance / static_cast<double>(k.steps);
        if (metrics.is_open()) metrics << format_metrics_row(r) << '\n' << std::flush;
        result.episodes.push_back(r);
        if (config_.log_every && result.episodes.size() % config_.log_every == 0) {
          spdlog::info("step {} episode {} window reward {:.1f} success {:.3f} alpha {:.4g} eps {:.3f}", env_step,
                       r.episode, r.window_mean_reward, r.window_success_rate, r.alpha, r.epsilon);
        }
        start_episode(w);
      }

      if (env_step > sac.warmup_steps && buffer_.size() >= sac.batch_size) {
        const std::uint64_t learning_steps = env_step - std::max(base, sac.warmup_steps);
        pending_updates += sac.updates_per_step * static_cast<double>(learning_steps);
        while (pending_updates >= 1.0) {
          last_stats = agent_.update(buffer_, beta_at(sac, env_step));
          pending_updates -= 1.0;
          ++result.updates;
        }
      }

      if (config_.checkpoint_interval && env_step / config_.checkpoint_interval > base / config_.checkpoint_interval) {
        save("checkpoint_" + std::to_string(env_step) + ".ckpt", env_step);
      }
      if (on_tick) on_tick(TickInfo{env_step, buffer_.size(), result.episodes.size(), result.updates});
    }
  } catch (const std::exception& e) {
    spdlog::error("training stopped at step {}: {}", env_step, e.what());
    try {
      save("final.ckpt", env_step);
    } catch (const std::exception& inner) {
      spdlog::error("could not write the final checkpoint: {}", inner.what());
    }
    throw;
  }
  save("final.ckpt", env_step);
  result.env_steps = env_step;
  return result;
}

}  // namespace articnav
