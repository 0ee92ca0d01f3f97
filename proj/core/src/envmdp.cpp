#include "articnav/envmdp.hpp"

#include <algorithm>
#include <cmath>

#include "articnav/error.hpp"

namespace articnav {

std::string_view to_string(FailureCause cause) {
  switch (cause) {
    case FailureCause::none: return "none";
    case FailureCause::truck_kerb: return "truck_kerb";
    case FailureCause::trailer_kerb: return "trailer_kerb";
    case FailureCause::divergence: return "divergence";
    case FailureCause::timeout: return "timeout";
  }
  return "none";
}

FailureCause failure_cause_from_string(std::string_view name) {
  for (auto c : {FailureCause::none, FailureCause::truck_kerb, FailureCause::trailer_kerb,
                 FailureCause::divergence, FailureCause::timeout}) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCategory::parse, "unknown failure cause '" + std::string(name) + "'");
}

double shaping_reward(double distance_to_center) {
  const double rd = std::clamp(distance_to_center, 0.0, 4.0) / 4.0;
  return rd * -1.5;
}

void EnvConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw Error(ErrorCategory::invalid_argument, "env config: " + m);
  };
  if (!(dt > 0.0) || dt > 0.1) fail("dt must be in (0, 0.1]");
  if (!(target_speed > 0.0)) fail("target_speed must be > 0");
  if (!(max_acceleration > 0.0)) fail("max_acceleration must be > 0");
  if (!(divergence_distance > 0.0)) fail("divergence_distance must be > 0");
  if (!(timeout_factor > 0.0)) fail("timeout_factor must be > 0");
  if (jitter_lateral < 0.0 || jitter_heading < 0.0) fail("jitter must be >= 0");
  if (!(drivetrain_time_constant > 0.0) || drivetrain_delay_steps < 0) fail("bad drivetrain");
  vehicle.validate();
}

RoundaboutEnv::RoundaboutEnv(std::vector<RouteTask> tasks, EnvConfig config)
    : tasks_(std::move(tasks)), config_(std::move(config)) {
  config_.validate();
  if (tasks_.empty()) throw Error(ErrorCategory::invalid_argument, "environment needs a route");
  for (const auto& t : tasks_) {
    if (!t.scenario || t.route_id >= t.scenario->routes.size()) {
      throw Error(ErrorCategory::invalid_argument, "route task refers to a missing route");
    }
  }
}

namespace {
std::vector<RouteTask> all_routes(std::shared_ptr<const Scenario> sc) {
  std::vector<RouteTask> out;
  for (std::size_t i = 0; i < sc->routes.size(); ++i) out.push_back({sc, i});
  return out;
}
}  // namespace

RoundaboutEnv::RoundaboutEnv(std::shared_ptr<const Scenario> scenario, EnvConfig config)
    : RoundaboutEnv(all_routes(std::move(scenario)), std::move(config)) {}

std::vector<float> RoundaboutEnv::reset(std::size_t task, std::uint64_t seed) {
  if (task >= tasks_.size()) {
    throw Error(ErrorCategory::invalid_argument, "invalid route id " + std::to_string(task));
  }
  task_ = task;
  const WaypointRoute& route = tasks_[task].scenario->routes[tasks_[task].route_id];
  const Waypoint& start = route.waypoints.front();
  double lateral = 0.0;
  double yaw = 0.0;
  if (config_.jitter) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lat(-config_.jitter_lateral, config_.jitter_lateral);
    std::uniform_real_distribution<double> head(-config_.jitter_heading, config_.jitter_heading);
    lateral = lat(rng);
    yaw = head(rng);
  }
  const double heading = wrap_angle(start.forward.angle() + yaw);
  const Point2 centre = start.position + perp(start.forward.vec()) * lateral;
  const VehicleSpec& v = config_.vehicle;
  state_ = {};
  state_.truck.heading = heading;
  state_.truck.position =
      centre - UnitVec2::from_angle(heading).vec() * (v.truck_length / 2.0 - v.truck_rear_overhang);
  state_.trailer_heading = heading;

  pid_ = PidController(config_.pid, config_.target_speed, config_.max_acceleration);
  drivetrain_ = Drivetrain(config_.drivetrain_time_constant, config_.drivetrain_delay_steps);
  // Waypoints within the pass radius of the spawn point are credited on the
  // first step.
  tracker_ = RouteTracker(route);
  steps_ = 0;
  step_limit_ = static_cast<std::size_t>(std::ceil(
      config_.timeout_factor * route.polyline_length() / (config_.target_speed * config_.dt)));
  done_ = false;
  const auto obs = observation();
  return {obs.begin(), obs.end()};
}

ObservationVector RoundaboutEnv::observation() const {
  return build_observation(state_, tracker_, scenario(), config_.vehicle, config_.features);
}

StepResult RoundaboutEnv::step(std::size_t action) {
  if (done_) throw Error(ErrorCategory::episode_finished, "step() called on a finished episode");
  if (action >= kSteeringActions.size()) {
    throw Error(ErrorCategory::invalid_argument, "action index out of range");
  }
  const VehicleSpec& v = config_.vehicle;
  const double wheel = kSteeringActions[action] * v.max_wheel_angle;
  const double command = pid_.update(state_.speed, config_.dt);
  const double accel = drivetrain_.apply(command, config_.dt);
  state_ = step_kinematics(state_, v, wheel, accel, config_.dt);
  ++steps_;

  StepResult r;
  r.info.passed_waypoints = advance_tracker(tracker_, state_, v, config_.features);
  const Point2 centre = truck_center(state_, v);
  r.info.distance_to_center = distance_to_route(centre, route());

  const Collision hit = check_collision(footprints(state_, v), scenario().boundaries);
  FailureCause cause = FailureCause::none;
  if (hit == Collision::trailer_kerb) {
    cause = FailureCause::trailer_kerb;
  } else if (hit == Collision::truck_kerb) {
    cause = FailureCause::truck_kerb;
  } else if (std::abs(state_.articulation()) > v.jackknife_limit ||
             r.info.distance_to_center > config_.divergence_distance) {
    cause = FailureCause::divergence;
  } else if (!tracker_.finished() && steps_ >= step_limit_) {
    cause = FailureCause::timeout;
  }
  r.info.failure_cause = cause;
  r.info.success = cause == FailureCause::none && tracker_.finished();
  r.info.progress_fraction = static_cast<double>(tracker_.current_index()) /
                             static_cast<double>(route().waypoints.size());
  r.reward = shaping_reward(r.info.distance_to_center) +
             (cause != FailureCause::none
                  ? config_.failure_reward
                  : config_.waypoint_reward * static_cast<double>(r.info.passed_waypoints));
  r.done = cause != FailureCause::none || r.info.success;
  done_ = r.done;
  const auto obs = observation();
  r.observation.assign(obs.begin(), obs.end());
  return r;
}

std::vector<double> simulate_speed_response(const EnvConfig& config, double seconds) {
  PidController pid(config.pid, config.target_speed, config.max_acceleration);
  SpeedPlant plant(Drivetrain(config.drivetrain_time_constant, config.drivetrain_delay_steps), 0.0);
  const int steps = static_cast<int>(std::lround(seconds / config.dt));
  std::vector<double> out;
  out.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    out.push_back(plant.step(pid.update(plant.speed(), config.dt), config.dt));
  }
  return out;
}

ZnResult tune_speed_pid(const EnvConfig& config) {
  auto plant = std::make_shared<SpeedPlant>(
      Drivetrain(config.drivetrain_time_constant, config.drivetrain_delay_steps),
      config.target_speed);
  ZnPlant zn;
  zn.reset = [plant] { plant->reset(); };
  zn.step = [plant](double u, double dt) { return plant->step(u, dt); };
  ZnOptions opt;
  opt.dt = config.dt;
  opt.setpoint_step = 0.01;
  opt.gain_max = 2.0 / config.dt * 10.0;
  return ziegler_nichols_tune(zn, opt);
}

}  // namespace articnav
