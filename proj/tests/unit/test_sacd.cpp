#include <gtest/gtest.h>

#include <cmath>

#include "articnav/error.hpp"
#include "articnav/sacd.hpp"

namespace articnav {
namespace {

SacConfig small_config() {
  SacConfig c;
  c.q_hidden = {16, 16};
  c.policy_hidden = {16, 16};
  c.batch_size = 8;
  c.buffer_capacity = 64;
  return c;
}

ReplayBatch make_batch(std::size_t obs, std::size_t b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_int_distribution<int> action(0, 8);
  ReplayBatch batch;
  const auto rows = static_cast<Eigen::Index>(obs);
  const auto cols = static_cast<Eigen::Index>(b);
  batch.observations.resize(rows, cols);
  batch.next_observations.resize(rows, cols);
  for (Eigen::Index i = 0; i < batch.observations.size(); ++i) {
    batch.observations.data()[i] = n(rng);
    batch.next_observations.data()[i] = n(rng);
  }
  batch.rewards.resize(cols);
  batch.dones.resize(cols);
  batch.weights.resize(cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    batch.actions.push_back(static_cast<std::size_t>(action(rng)));
    batch.rewards[k] = n(rng);
    batch.dones[k] = k % 3 == 0 ? 1.0 : 0.0;
    batch.weights[k] = 0.5 + 0.5 * (k % 2);
    batch.indices.push_back(static_cast<std::size_t>(k));
  }
  return batch;
}

// Zero weights everywhere; the output layer bias is set to `bias`.
void set_constant_output(Mlp& net, const std::vector<float>& bias) {
  Eigen::VectorXf p = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  const auto n = static_cast<Eigen::Index>(bias.size());
  for (Eigen::Index i = 0; i < n; ++i) p[p.size() - n + i] = bias[static_cast<std::size_t>(i)];
  net.set_parameters(p);
}

TEST(Schedules, EpsilonDecaysLinearly) {
  const SacConfig c;
  EXPECT_DOUBLE_EQ(epsilon_at(c, 0), 1.0);
  EXPECT_NEAR(epsilon_at(c, 500000), 0.505, 1e-12);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 1000000), 0.01);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 5000000), 0.01);
  for (std::uint64_t s = 0; s < 1000000; s += 99991) {
    EXPECT_GE(epsilon_at(c, s), epsilon_at(c, s + 99991));
  }
}

TEST(Schedules, BetaReachesFinal) {
  const SacConfig c;
  EXPECT_DOUBLE_EQ(beta_at(c, 0), 0.4);
  EXPECT_DOUBLE_EQ(beta_at(c, c.total_steps), 1.0);
  EXPECT_DOUBLE_EQ(beta_at(c, 10 * c.total_steps), 1.0);
}

TEST(SacConfig, Validation) {
  EXPECT_NO_THROW(SacConfig{}.validate());
  auto bad = [](auto mutate) {
    SacConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), Error);
  };
  bad([](SacConfig& c) { c.gamma = 0.0; });
  bad([](SacConfig& c) { c.gamma = 1.1; });
  bad([](SacConfig& c) { c.batch_size = 0; });
  bad([](SacConfig& c) { c.epsilon_final = 2.0; });
  bad([](SacConfig& c) { c.tau = 0.0; });
  bad([](SacConfig& c) { c.alpha_initial = -1.0; });
  bad([](SacConfig& c) { c.q_hidden = {0}; });
  bad([](SacConfig& c) { c.n_step = 3; });
  EXPECT_EQ(alpha_mode_from_string("anneal"), AlphaMode::anneal);
  EXPECT_EQ(alpha_mode_from_string(to_string(AlphaMode::auto_tune)), AlphaMode::auto_tune);
  EXPECT_THROW(alpha_mode_from_string("sometimes"), Error);
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<double> v{0.1, 0.5, 0.5, 0.2};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(SoftTargets, TerminalTransitionsUseRewardOnly) {
  SacAgent agent(4, 9, small_config(), 1);
  auto batch = make_batch(4, 6, 2);
  batch.dones.setOnes();
  const auto y = agent.q_targets(batch);
  for (Eigen::Index k = 0; k < 6; ++k) EXPECT_EQ(y[k], batch.rewards[k]);
}

TEST(SoftTargets, UniformPolicyEntropyBonus) {
  auto c = small_config();
  c.alpha_mode = AlphaMode::fixed;
  c.alpha_initial = 0.1;
  SacAgent agent(4, 9, c, 1);
  set_constant_output(agent.mutable_policy(), std::vector<float>(9, 0.0f));
  set_constant_output(agent.mutable_target_q1(), std::vector<float>(9, 0.0f));
  set_constant_output(agent.mutable_target_q2(), std::vector<float>(9, 0.0f));
  auto batch = make_batch(4, 5, 3);
  batch.dones.setZero();
  batch.rewards.setZero();
  const auto y = agent.q_targets(batch);
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_NEAR(y[k], 0.1 * std::log(9.0), 1e-9);
  EXPECT_NEAR(0.1 * std::log(9.0), 0.21972, 1e-5);
}

TEST(SoftTargets, UsesElementwiseMinimumOfTwinTargets) {
  auto c = small_config();
  c.alpha_mode = AlphaMode::fixed;
  c.alpha_initial = 1e-9;
  c.gamma = 0.5;
  SacAgent agent(4, 9, c, 1);
  // Deterministic policy on action 2.
  std::vector<float> logits(9, -60.0f);
  logits[2] = 60.0f;
  set_constant_output(agent.mutable_policy(), logits);
  std::vector<float> qa(9, 0.0f), qb(9, 0.0f);
  qa[2] = 3.0f;
  qb[2] = 1.0f;
  set_constant_output(agent.mutable_target_q1(), qa);
  set_constant_output(agent.mutable_target_q2(), qb);
  auto batch = make_batch(4, 4, 4);
  batch.dones.setZero();
  auto y = agent.q_targets(batch);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(y[k], batch.rewards[k] + 0.5 * 1.0, 1e-6);
  set_constant_output(agent.mutable_target_q1(), qb);
  set_constant_output(agent.mutable_target_q2(), qa);
  y = agent.q_targets(batch);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(y[k], batch.rewards[k] + 0.5 * 1.0, 1e-6);

  c.twin_q = false;
  SacAgent single(4, 9, c, 1);
  set_constant_output(single.mutable_policy(), logits);
  set_constant_output(single.mutable_target_q1(), qa);
  y = single.q_targets(batch);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(y[k], batch.rewards[k] + 0.5 * 3.0, 1e-6);
}

TEST(Update, PrioritiesAreMeanAbsoluteTdErrors) {
  SacAgent agent(4, 9, small_config(), 7);
  const auto batch = make_batch(4, 8, 5);
  const auto y = agent.q_targets(batch);
  const Eigen::MatrixXf q1 = agent.q1().forward(batch.observations);
  const Eigen::MatrixXf q2 = agent.q2().forward(batch.observations);
  const auto stats = agent.update_on_batch(batch);
  double loss1 = 0.0;
  for (Eigen::Index k = 0; k < 8; ++k) {
    const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(k)]);
    const double td1 = q1(a, k) - y[k], td2 = q2(a, k) - y[k];
    EXPECT_NEAR(stats.priorities[static_cast<std::size_t>(k)],
                0.5 * (std::abs(td1) + std::abs(td2)) + 1e-6, 1e-5);
    loss1 += 0.5 * batch.weights[k] * td1 * td1 / 8.0;
  }
  EXPECT_NEAR(stats.q1_loss, loss1, 1e-5 * std::max(1.0, loss1));
  EXPECT_GE(stats.entropy, 0.0);
  EXPECT_LE(stats.entropy, std::log(9.0) + 1e-9);
  EXPECT_EQ(agent.update_count(), 1u);
}

TEST(Update, TargetNetworksFollowExponentialAverage) {
  auto c = small_config();
  c.tau = 0.1;
  SacAgent agent(4, 9, c, 8);
  const Eigen::VectorXf t0 = agent.target_q1().parameters();
  agent.update_on_batch(make_batch(4, 8, 1));
  const Eigen::VectorXf expected = 0.9f * t0 + 0.1f * agent.q1().parameters();
  EXPECT_LT((agent.target_q1().parameters() - expected).cwiseAbs().maxCoeff(), 1e-6);

  c.target_update_interval = 2;
  SacAgent lazy(4, 9, c, 8);
  const Eigen::VectorXf l0 = lazy.target_q2().parameters();
  lazy.update_on_batch(make_batch(4, 8, 1));
  EXPECT_EQ(lazy.target_q2().parameters(), l0);
  lazy.update_on_batch(make_batch(4, 8, 2));
  EXPECT_NE(lazy.target_q2().parameters(), l0);
}

TEST(Update, AlphaModes) {
  auto c = small_config();
  c.alpha_mode = AlphaMode::anneal;
  c.alpha_initial = 1.0;
  c.alpha_final = 1e-3;
  c.alpha_anneal_updates = 4;
  SacAgent anneal(4, 9, c, 2);
  EXPECT_DOUBLE_EQ(anneal.alpha(), 1.0);
  anneal.update_on_batch(make_batch(4, 8, 1));
  anneal.update_on_batch(make_batch(4, 8, 2));
  EXPECT_NEAR(anneal.alpha(), std::sqrt(1e-3), 1e-12);
  for (int i = 0; i < 4; ++i) anneal.update_on_batch(make_batch(4, 8, 3 + i));
  EXPECT_NEAR(anneal.alpha(), 1e-3, 1e-15);

  // A near-uniform policy has entropy above the target, so alpha drops by
  // one Adam step of size alpha_lr.
  c.alpha_mode = AlphaMode::auto_tune;
  SacAgent tuned(4, 9, c, 2);
  set_constant_output(tuned.mutable_policy(), std::vector<float>(9, 0.0f));
  EXPECT_NEAR(tuned.target_entropy(), 0.98 * std::log(9.0), 1e-12);
  tuned.update_on_batch(make_batch(4, 8, 1));
  EXPECT_NEAR(tuned.log_alpha(), -c.alpha_lr, 1e-6);

  c.alpha_mode = AlphaMode::fixed;
  c.alpha_initial = 0.3;
  SacAgent fixed(4, 9, c, 2);
  fixed.update_on_batch(make_batch(4, 8, 1));
  EXPECT_DOUBLE_EQ(fixed.alpha(), 0.3);
}

// Single-step bandit: Q converges to the rewards and the policy to the
// Boltzmann distribution softmax(r / alpha).
TEST(Update, BanditConvergesToBoltzmannPolicy) {
  auto c = small_config();
  c.alpha_mode = AlphaMode::fixed;
  c.alpha_initial = 0.5;
  c.lr = 3e-3;
  c.q_hidden = {8};
  c.policy_hidden = {8};
  SacAgent agent(2, 9, c, 3);
  ReplayBatch batch;
  batch.observations = Eigen::MatrixXf::Ones(2, 9);
  batch.next_observations = Eigen::MatrixXf::Ones(2, 9);
  batch.rewards.resize(9);
  batch.dones = Eigen::VectorXd::Ones(9);
  batch.weights = Eigen::VectorXd::Ones(9);
  for (std::size_t a = 0; a < 9; ++a) {
    batch.actions.push_back(a);
    batch.indices.push_back(a);
    batch.rewards[static_cast<Eigen::Index>(a)] = 0.25 * static_cast<double>(a % 5);
  }
  for (int i = 0; i < 4000; ++i) agent.update_on_batch(batch);
  const Eigen::MatrixXd q = agent.q1().forward(batch.observations.col(0)).cast<double>();
  const Eigen::MatrixXd pi = agent.policy().predict(batch.observations.col(0));
  double z = 0.0;
  for (std::size_t a = 0; a < 9; ++a) z += std::exp(batch.rewards[static_cast<Eigen::Index>(a)] / 0.5);
  for (Eigen::Index a = 0; a < 9; ++a) {
    EXPECT_NEAR(q(a, 0), batch.rewards[a], 0.02);
    EXPECT_NEAR(pi(a, 0), std::exp(batch.rewards[a] / 0.5) / z, 0.01);
  }
}

TEST(Update, DeterministicForSeed) {
  SacAgent a(4, 9, small_config(), 42), b(4, 9, small_config(), 42);
  PrioritizedReplay buf_a(64, 4, 0.6), buf_b(64, 4, 0.6);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int i = 0; i < 40; ++i) {
    Transition t;
    for (int k = 0; k < 4; ++k) t.observation.push_back(n(rng));
    for (int k = 0; k < 4; ++k) t.next_observation.push_back(n(rng));
    t.action = static_cast<std::size_t>(i % 9);
    t.reward = n(rng);
    t.done = i % 7 == 0;
    buf_a.add(t);
    buf_b.add(t);
  }
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(a.update(buf_a, 0.4), b.update(buf_b, 0.4));
  }
  EXPECT_EQ(a.policy(), b.policy());
  EXPECT_EQ(a.target_q2(), b.target_q2());
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(buf_a.priority(i), buf_b.priority(i));
}

TEST(Update, NonFiniteInputIsReported) {
  SacAgent agent(4, 9, small_config(), 1);
  auto batch = make_batch(4, 8, 1);
  batch.rewards[3] = std::nan("");
  try {
    agent.update_on_batch(batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::non_finite);
  }
}

TEST(ActionSelection, ModesAndEpsilon) {
  SacAgent agent(4, 9, small_config(), 1);
  std::vector<float> logits(9, 0.0f);
  logits[6] = 5.0f;
  set_constant_output(agent.mutable_policy(), logits);
  const std::vector<float> obs(4, 0.3f);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(agent.select_action(obs, 0, ActionMode::eval, rng), 6u);
  }
  // epsilon = 1: uniform over actions regardless of the policy.
  std::vector<int> counts(9, 0);
  const int n = 18000;
  for (int i = 0; i < n; ++i) ++counts[SacAgent::select_action(agent.policy(), obs, 1.0, ActionMode::train, rng)];
  for (int cnt : counts) EXPECT_NEAR(cnt, n / 9.0, 5.0 * std::sqrt(n / 9.0));
  // epsilon = 0: samples the softmax.
  std::fill(counts.begin(), counts.end(), 0);
  for (int i = 0; i < n; ++i) ++counts[SacAgent::select_action(agent.policy(), obs, 0.0, ActionMode::train, rng)];
  const double p6 = std::exp(5.0) / (8.0 + std::exp(5.0));
  EXPECT_NEAR(counts[6] / double(n), p6, 0.01);
}

TEST(Checkpointing, RestoreReproducesAgent) {
  auto c = small_config();
  SacAgent a(4, 9, c, 1);
  for (int i = 0; i < 3; ++i) a.update_on_batch(make_batch(4, 8, static_cast<std::uint64_t>(i)));
  Checkpoint ckpt;
  ckpt.layout_version = 7;
  a.store(ckpt);
  const Checkpoint back = decode_checkpoint(encode_checkpoint(ckpt), 7);
  SacAgent b(4, 9, c, 99);
  b.restore(back);
  EXPECT_EQ(a.policy(), b.policy());
  EXPECT_EQ(a.target_q1(), b.target_q1());
  EXPECT_EQ(a.log_alpha(), b.log_alpha());
  EXPECT_EQ(a.update_count(), b.update_count());
  const auto batch = make_batch(4, 8, 17);
  EXPECT_EQ(a.update_on_batch(batch), b.update_on_batch(batch));
  EXPECT_EQ(a.q2(), b.q2());

  auto other = c;
  other.q_hidden = {8};
  SacAgent wrong(4, 9, other, 1);
  EXPECT_THROW(wrong.restore(back), Error);
}

}  // namespace
}  // namespace articnav
