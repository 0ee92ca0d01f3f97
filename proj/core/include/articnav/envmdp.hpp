#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

#include "articnav/features.hpp"
#include "articnav/pid.hpp"
#include "articnav/scenario.hpp"
#include "articnav/vehicle.hpp"

namespace articnav {

enum class FailureCause { none, truck_kerb, trailer_kerb, divergence, timeout };

std::string_view to_string(FailureCause cause);
FailureCause failure_cause_from_string(std::string_view name);

struct StepInfo {
  std::size_t passed_waypoints = 0;
  double distance_to_center = 0.0;
  FailureCause failure_cause = FailureCause::none;
  double progress_fraction = 0.0;
  bool success = false;
};

struct StepResult {
  std::vector<float> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Episodic environment with a discrete action set. `task` selects among the
// environment's episode variants (routes, start states).
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t task_count() const = 0;
  virtual std::vector<float> reset(std::size_t task, std::uint64_t seed) = 0;
  virtual StepResult step(std::size_t action) = 0;
};

// Normalised steering values; index 0 is straight ahead.
inline constexpr std::array<double, 9> kSteeringActions{0.0, 0.2, -0.2, 0.4, -0.4,
                                                       0.6, -0.6, 0.8, -0.8};

// -1.5 * clip(d, 0, 4) / 4
double shaping_reward(double distance_to_center);

struct EnvConfig {
  double dt = 0.05;
  double target_speed = 30.0 / 3.6;
  double max_acceleration = 2.0;
  PidGains pid{6.2516, 11.2876, 0.8656};  // Ziegler-Nichols on the drivetrain below
  double drivetrain_time_constant = 0.3;
  int drivetrain_delay_steps = 2;
  bool jitter = true;
  double jitter_lateral = 0.3;
  double jitter_heading = 0.05;
  double divergence_distance = 8.0;
  double timeout_factor = 3.0;
  double waypoint_reward = 100.0;
  double failure_reward = -500.0;
  VehicleSpec vehicle;
  FeatureConfig features;

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

struct RouteTask {
  std::shared_ptr<const Scenario> scenario;
  std::size_t route_id = 0;
};

class RoundaboutEnv final : public Environment {
 public:
  RoundaboutEnv(std::vector<RouteTask> tasks, EnvConfig config);
  // Every route of one scenario.
  RoundaboutEnv(std::shared_ptr<const Scenario> scenario, EnvConfig config);

  std::size_t observation_size() const override { return kObservationSize; }
  std::size_t action_count() const override { return kSteeringActions.size(); }
  std::size_t task_count() const override { return tasks_.size(); }

  // Throws Error(invalid_argument) for an unknown task.
  std::vector<float> reset(std::size_t task, std::uint64_t seed) override;
  // Throws Error(episode_finished) once the episode is done.
  StepResult step(std::size_t action) override;

  const EnvConfig& config() const { return config_; }
  const TractorTrailerState& state() const { return state_; }
  const RouteTracker& tracker() const { return tracker_; }
  const Scenario& scenario() const { return *tasks_[task_].scenario; }
  const WaypointRoute& route() const { return tracker_.route(); }
  const RouteTask& task(std::size_t i) const { return tasks_.at(i); }
  std::size_t steps() const { return steps_; }
  std::size_t step_limit() const { return step_limit_; }
  bool done() const { return done_; }
  ObservationVector observation() const;

 private:
  std::vector<RouteTask> tasks_;
  EnvConfig config_;
  std::size_t task_ = 0;
  TractorTrailerState state_;
  RouteTracker tracker_;
  PidController pid_;
  Drivetrain drivetrain_;
  std::size_t steps_ = 0;
  std::size_t step_limit_ = 0;
  bool done_ = true;
};

// Closed-loop speed response from rest under the configured PID and
// drivetrain; one sample per control step.
std::vector<double> simulate_speed_response(const EnvConfig& config, double seconds);

// Ziegler-Nichols tuning against the configured drivetrain at target speed.
ZnResult tune_speed_pid(const EnvConfig& config);

}  // namespace articnav
