#include <benchmark/benchmark.h>

#include <random>

#include "articnav/envmdp.hpp"
#include "articnav/features.hpp"
#include "articnav/neuralnet.hpp"
#include "articnav/replay.hpp"
#include "articnav/sacd.hpp"

namespace {

using namespace articnav;

const Scenario& roundabout() {
  static const Scenario s = generate_roundabout(make_roundabout_spec(16, 4), 1.0, "bench");
  return s;
}

TractorTrailerState start_state(const Scenario& s) {
  EnvConfig cfg;
  cfg.jitter = false;
  RoundaboutEnv env({{std::make_shared<const Scenario>(s), 0}}, cfg);
  env.reset(0, 0);
  for (int i = 0; i < 60; ++i) env.step(0);
  return env.state();
}

void BM_SensorRays(benchmark::State& st) {
  const Scenario& s = roundabout();
  const auto state = start_state(s);
  const VehicleSpec spec;
  for (auto _ : st) {
    benchmark::DoNotOptimize(sensor_rays(state, spec, s.boundaries, 50.0));
  }
}
BENCHMARK(BM_SensorRays);

void BM_BuildObservation(benchmark::State& st) {
  const Scenario& s = roundabout();
  const auto state = start_state(s);
  const VehicleSpec spec;
  const FeatureConfig fc;
  RouteTracker tracker(s.routes[0]);
  advance_tracker(tracker, state, spec, fc);
  for (auto _ : st) {
    benchmark::DoNotOptimize(build_observation(state, tracker, s, spec, fc));
  }
}
BENCHMARK(BM_BuildObservation);

void BM_EnvStep(benchmark::State& st) {
  RoundaboutEnv env(std::make_shared<const Scenario>(roundabout()), EnvConfig{});
  std::uint64_t seed = 0;
  env.reset(0, seed);
  for (auto _ : st) {
    if (env.done()) env.reset(0, ++seed);
    benchmark::DoNotOptimize(env.step(0));
  }
}
BENCHMARK(BM_EnvStep);

std::vector<std::size_t> sizes_for(std::int64_t width) {
  if (width == 0) return {kObservationSize, 512, 512, 1024, kSteeringActions.size()};
  return {kObservationSize, static_cast<std::size_t>(width), static_cast<std::size_t>(width),
          kSteeringActions.size()};
}

// Arg: hidden width (0 = 512/512/1024), batch.
void BM_MlpForwardBackward(benchmark::State& st) {
  Mlp net(sizes_for(st.range(0)), OutputHead::linear);
  std::mt19937_64 rng(1);
  net.initialize(rng);
  const Eigen::MatrixXf x = Eigen::MatrixXf::Random(kObservationSize, st.range(1));
  const Eigen::MatrixXf g = Eigen::MatrixXf::Random(kSteeringActions.size(), st.range(1));
  Mlp::Cache cache;
  for (auto _ : st) {
    benchmark::DoNotOptimize(net.forward(x, &cache));
    benchmark::DoNotOptimize(net.backward(cache, g));
  }
  st.SetItemsProcessed(st.iterations() * st.range(1));
}
BENCHMARK(BM_MlpForwardBackward)->Args({64, 256})->Args({0, 1})->Args({0, 256})->Unit(benchmark::kMicrosecond);

ReplayBatch random_batch(std::size_t n, std::mt19937_64& rng) {
  ReplayBatch b;
  b.observations = (Eigen::MatrixXf::Random(kObservationSize, n).array() + 1.0f) * 0.5f;
  b.next_observations = (Eigen::MatrixXf::Random(kObservationSize, n).array() + 1.0f) * 0.5f;
  std::uniform_int_distribution<std::size_t> a(0, kSteeringActions.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    b.actions.push_back(a(rng));
    b.indices.push_back(i);
  }
  b.rewards = Eigen::VectorXd::Random(n) * 100.0;
  b.dones = Eigen::VectorXd::Zero(n);
  b.weights = Eigen::VectorXd::Ones(n);
  return b;
}

void BM_SacUpdate(benchmark::State& st) {
  SacConfig c;
  const auto hidden = sizes_for(st.range(0));
  c.q_hidden = c.policy_hidden = std::vector<std::size_t>(hidden.begin() + 1, hidden.end() - 1);
  c.batch_size = 256;
  SacAgent agent(kObservationSize, kSteeringActions.size(), c, 1);
  std::mt19937_64 rng(2);
  const ReplayBatch batch = random_batch(c.batch_size, rng);
  for (auto _ : st) {
    benchmark::DoNotOptimize(agent.update_on_batch(batch));
  }
}
BENCHMARK(BM_SacUpdate)->Arg(64)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_ReplaySample(benchmark::State& st) {
  PrioritizedReplay buffer(100000, kObservationSize, 0.6);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Transition t;
  t.observation.assign(kObservationSize, 0.5f);
  t.next_observation.assign(kObservationSize, 0.5f);
  std::vector<std::size_t> idx;
  std::vector<double> pri;
  for (std::size_t i = 0; i < 100000; ++i) {
    buffer.add(t);
    idx.push_back(i);
    pri.push_back(u(rng) + 1e-3);
  }
  buffer.update_priorities(idx, pri);
  for (auto _ : st) {
    benchmark::DoNotOptimize(buffer.sample(static_cast<std::size_t>(st.range(0)), 0.4, rng));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ReplaySample)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
