#include "articnav/sacd.hpp"

#include <algorithm>
#include <cmath>

#include "articnav/error.hpp"

namespace articnav {

std::string_view to_string(AlphaMode mode) {
  switch (mode) {
    case AlphaMode::fixed: return "fixed";
    case AlphaMode::auto_tune: return "auto";
    case AlphaMode::anneal: return "anneal";
  }
  return "auto";
}

AlphaMode alpha_mode_from_string(std::string_view name) {
  for (auto m : {AlphaMode::fixed, AlphaMode::auto_tune, AlphaMode::anneal}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCategory::parse, "unknown alpha mode '" + std::string(name) + "'");
}

void SacConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCategory::invalid_argument, "sac." + m); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma: must be in (0, 1]");
  if (n_step != 1) fail("n_step: only 1 is supported");
  if (batch_size == 0) fail("batch_size: must be > 0");
  if (buffer_capacity == 0) fail("buffer_capacity: must be > 0");
  if (!(epsilon_final >= 0.0 && epsilon_final <= epsilon_initial && epsilon_initial <= 1.0)) {
    fail("epsilon: need 0 <= epsilon_final <= epsilon_initial <= 1");
  }
  if (epsilon_timesteps == 0) fail("epsilon_timesteps: must be > 0");
  if (!(lr > 0.0) || !(alpha_lr > 0.0)) fail("lr: must be > 0");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau: must be in (0, 1]");
  if (target_update_interval == 0) fail("target_update_interval: must be > 0");
  if (!(alpha_initial > 0.0) || !(alpha_final > 0.0)) fail("alpha: must be > 0");
  if (alpha_anneal_updates == 0) fail("alpha_anneal_updates: must be > 0");
  if (!(target_entropy_ratio > 0.0 && target_entropy_ratio <= 1.0)) fail("target_entropy_ratio: must be in (0, 1]");
  if (!(priority_alpha >= 0.0)) fail("priority_alpha: must be >= 0");
  if (!(priority_beta_initial >= 0.0 && priority_beta_final >= 0.0)) fail("priority_beta: must be >= 0");
  if (!(priority_epsilon > 0.0)) fail("priority_epsilon: must be > 0");
  if (workers == 0) fail("workers: must be > 0");
  if (total_steps == 0) fail("total_steps: must be > 0");
  if (!(updates_per_step >= 0.0)) fail("updates_per_step: must be >= 0");
  for (auto h : q_hidden) if (h == 0) fail("q_hidden: sizes must be > 0");
  for (auto h : policy_hidden) if (h == 0) fail("policy_hidden: sizes must be > 0");
}

double epsilon_at(const SacConfig& c, std::uint64_t env_step) {
  if (env_step >= c.epsilon_timesteps) return c.epsilon_final;
  const double frac = static_cast<double>(env_step) / static_cast<double>(c.epsilon_timesteps);
  return c.epsilon_initial + frac * (c.epsilon_final - c.epsilon_initial);
}

double beta_at(const SacConfig& c, std::uint64_t env_step) {
  const double frac =
      std::min(1.0, static_cast<double>(env_step) / static_cast<double>(c.total_steps));
  return c.priority_beta_initial + frac * (c.priority_beta_final - c.priority_beta_initial);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCategory::non_finite, std::string("non-finite ") + what + " during SAC update");
  }
}

}  // namespace

SacAgent::SacAgent(std::size_t observation_size, std::size_t action_count, SacConfig config,
                   std::uint64_t seed)
    : config_(std::move(config)), obs_size_(observation_size), actions_(action_count), rng_(seed) {
  config_.validate();
  if (action_count < 2) throw Error(ErrorCategory::invalid_argument, "need at least 2 actions");
  policy_ = Mlp(layer_sizes(obs_size_, config_.policy_hidden, actions_), OutputHead::softmax);
  q1_ = Mlp(layer_sizes(obs_size_, config_.q_hidden, actions_), OutputHead::linear);
  q2_ = q1_;
  policy_.initialize(rng_);
  q1_.initialize(rng_);
  q2_.initialize(rng_);
  target_q1_ = q1_;
  target_q2_ = q2_;
  const AdamConfig opt{config_.lr};
  policy_opt_ = Adam(opt, policy_.parameter_count());
  q1_opt_ = Adam(opt, q1_.parameter_count());
  q2_opt_ = Adam(opt, q2_.parameter_count());
  alpha_opt_ = Adam(AdamConfig{config_.alpha_lr}, 1);
  log_alpha_ = std::log(config_.alpha_initial);
}

double SacAgent::alpha() const {
  switch (config_.alpha_mode) {
    case AlphaMode::fixed: return config_.alpha_initial;
    case AlphaMode::auto_tune: return std::exp(log_alpha_);
    case AlphaMode::anneal: {
      const double frac = std::min(1.0, static_cast<double>(updates_) /
                                            static_cast<double>(config_.alpha_anneal_updates));
      return config_.alpha_initial * std::pow(config_.alpha_final / config_.alpha_initial, frac);
    }
  }
  return config_.alpha_initial;
}

double SacAgent::target_entropy() const {
  return config_.target_entropy_ratio * std::log(static_cast<double>(actions_));
}

std::size_t SacAgent::select_action(const Mlp& policy, std::span<const float> observation,
                                    double epsilon, ActionMode mode, std::mt19937_64& rng) {
  const Eigen::Map<const Eigen::VectorXf> x(observation.data(),
                                            static_cast<Eigen::Index>(observation.size()));
  const Eigen::MatrixXf logits = policy.forward(x);
  const std::size_t n = policy.output_size();
  if (mode == ActionMode::eval) {
    std::vector<double> v(logits.data(), logits.data() + n);
    return argmax(v);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    return std::min(static_cast<std::size_t>(u(rng) * static_cast<double>(n)), n - 1);
  }
  Eigen::MatrixXd probs, log_probs;
  softmax_columns(logits, probs, log_probs);
  const double r = u(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    acc += probs(static_cast<Eigen::Index>(a), 0);
    if (r < acc) return a;
  }
  return n - 1;
}

std::size_t SacAgent::select_action(std::span<const float> observation, std::uint64_t env_step,
                                    ActionMode mode, std::mt19937_64& rng) const {
  return select_action(policy_, observation, epsilon_at(config_, env_step), mode, rng);
}

Eigen::VectorXd SacAgent::q_targets(const ReplayBatch& batch) const {
  Eigen::MatrixXd probs, log_probs;
  softmax_columns(policy_.forward(batch.next_observations), probs, log_probs);
  Eigen::MatrixXd q = target_q1_.forward(batch.next_observations).cast<double>();
  if (config_.twin_q) q = q.cwiseMin(target_q2_.forward(batch.next_observations).cast<double>());
  const double a = alpha();
  const Eigen::VectorXd v =
      (probs.array() * (q.array() - a * log_probs.array())).colwise().sum().transpose();
  return batch.rewards.array() + config_.gamma * (1.0 - batch.dones.array()) * v.array();
}

UpdateStats SacAgent::update_on_batch(const ReplayBatch& batch) {
  const auto b = static_cast<Eigen::Index>(batch.actions.size());
  const double inv_b = 1.0 / static_cast<double>(b);
  const Eigen::VectorXd& w = batch.weights;
  const Eigen::VectorXd y = q_targets(batch);

  UpdateStats stats;
  stats.alpha = alpha();

  Mlp::Cache c1, c2, cp;
  const Eigen::MatrixXd q1 = q1_.forward(batch.observations, &c1).cast<double>();
  const Eigen::MatrixXd q2 = config_.twin_q ? q2_.forward(batch.observations, &c2).cast<double>() : q1;
  Eigen::MatrixXf g1 = Eigen::MatrixXf::Zero(q1.rows(), b);
  Eigen::MatrixXf g2 = Eigen::MatrixXf::Zero(q1.rows(), b);
  stats.priorities.resize(static_cast<std::size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(i)]);
    const double td1 = q1(a, i) - y[i];
    const double td2 = q2(a, i) - y[i];
    stats.q1_loss += 0.5 * w[i] * td1 * td1 * inv_b;
    stats.q2_loss += 0.5 * w[i] * td2 * td2 * inv_b;
    stats.mean_q += q1(a, i) * inv_b;
    g1(a, i) = static_cast<float>(w[i] * td1 * inv_b);
    g2(a, i) = static_cast<float>(w[i] * td2 * inv_b);
    const double td = config_.twin_q ? 0.5 * (std::abs(td1) + std::abs(td2)) : std::abs(td1);
    stats.priorities[static_cast<std::size_t>(i)] = td + config_.priority_epsilon;
  }

  Eigen::MatrixXd probs, log_probs;
  softmax_columns(policy_.forward(batch.observations, &cp), probs, log_probs);
  const Eigen::MatrixXd q_min = q1.cwiseMin(q2);
  const double alpha = stats.alpha;
  const Eigen::MatrixXd g = alpha * log_probs - q_min;
  Eigen::MatrixXf gp(probs.rows(), b);
  double entropy_gap = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double f = probs.col(i).dot(g.col(i));
    const double h = -probs.col(i).dot(log_probs.col(i));
    stats.policy_loss += w[i] * f * inv_b;
    stats.entropy += h * inv_b;
    entropy_gap += (h - target_entropy()) * inv_b;
    gp.col(i) = (probs.col(i).array() * (g.col(i).array() - f) * (w[i] * inv_b)).cast<float>();
  }
  stats.alpha_loss = log_alpha_ * entropy_gap;
  check_finite(stats.q1_loss, "q1 loss");
  check_finite(stats.q2_loss, "q2 loss");
  check_finite(stats.policy_loss, "policy loss");

  const Eigen::VectorXf grad_q1 = q1_.backward(c1, g1);
  const Eigen::VectorXf grad_pi = policy_.backward(cp, gp);
  if (config_.twin_q) {
    const Eigen::VectorXf grad_q2 = q2_.backward(c2, g2);
    q2_opt_.step(q2_, grad_q2);
  }
  q1_opt_.step(q1_, grad_q1);
  policy_opt_.step(policy_, grad_pi);
  if (config_.alpha_mode == AlphaMode::auto_tune) {
    Eigen::VectorXf la(1);
    la[0] = static_cast<float>(log_alpha_);
    Eigen::VectorXf ga(1);
    ga[0] = static_cast<float>(entropy_gap);
    alpha_opt_.step(la, ga);
    log_alpha_ = la[0];
  }
  ++updates_;
  if (updates_ % config_.target_update_interval == 0) soft_update();
  return stats;
}

void SacAgent::soft_update() {
  const float tau = static_cast<float>(config_.tau);
  auto blend = [tau](Mlp& target, const Mlp& online) {
    Eigen::VectorXf& p = target.mutable_parameters();
    p = (1.0f - tau) * p + tau * online.parameters();
  };
  blend(target_q1_, q1_);
  if (config_.twin_q) blend(target_q2_, q2_);
}

UpdateStats SacAgent::update(PrioritizedReplay& buffer, double beta) {
  const ReplayBatch batch = buffer.sample(config_.batch_size, beta, rng_);
  UpdateStats stats = update_on_batch(batch);
  buffer.update_priorities(batch.indices, stats.priorities);
  return stats;
}

void SacAgent::store(Checkpoint& ckpt) const {
  ckpt.networks.insert_or_assign("policy", policy_);
  ckpt.networks.insert_or_assign("q1", q1_);
  ckpt.networks.insert_or_assign("q2", q2_);
  ckpt.networks.insert_or_assign("target_q1", target_q1_);
  ckpt.networks.insert_or_assign("target_q2", target_q2_);
  ckpt.optimizers.insert_or_assign("policy", std::make_pair(policy_opt_.config(), policy_opt_.state()));
  ckpt.optimizers.insert_or_assign("q1", std::make_pair(q1_opt_.config(), q1_opt_.state()));
  ckpt.optimizers.insert_or_assign("q2", std::make_pair(q2_opt_.config(), q2_opt_.state()));
  ckpt.optimizers.insert_or_assign("alpha", std::make_pair(alpha_opt_.config(), alpha_opt_.state()));
  ckpt.scalars.insert_or_assign("log_alpha", log_alpha_);
  ckpt.counters.insert_or_assign("updates", updates_);
}

void SacAgent::restore(const Checkpoint& ckpt) {
  auto net = [&](const char* name, Mlp& into) {
    const auto it = ckpt.networks.find(name);
    if (it == ckpt.networks.end() || it->second.sizes() != into.sizes() ||
        it->second.head() != into.head()) {
      throw Error(ErrorCategory::corrupt_file,
                  std::string("checkpoint network '") + name + "' is missing or has the wrong shape");
    }
    into.set_parameters(it->second.parameters());
  };
  net("policy", policy_);
  net("q1", q1_);
  net("q2", q2_);
  net("target_q1", target_q1_);
  net("target_q2", target_q2_);
  auto opt = [&](const char* name, Adam& into) {
    const auto it = ckpt.optimizers.find(name);
    if (it == ckpt.optimizers.end()) {
      throw Error(ErrorCategory::corrupt_file, std::string("checkpoint optimizer '") + name + "' missing");
    }
    into.mutable_config() = it->second.first;
    into.set_state(it->second.second);
  };
  opt("policy", policy_opt_);
  opt("q1", q1_opt_);
  opt("q2", q2_opt_);
  opt("alpha", alpha_opt_);
  if (auto it = ckpt.scalars.find("log_alpha"); it != ckpt.scalars.end()) log_alpha_ = it->second;
  if (auto it = ckpt.counters.find("updates"); it != ckpt.counters.end()) updates_ = it->second;
}

}  // namespace articnav
