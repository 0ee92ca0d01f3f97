#pragma once

#include <deque>
#include <functional>

namespace articnav {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  bool operator==(const PidGains&) const = default;
};

// Positional PID on (target - measurement). The integral is clamped to
// +-output_limit/ki and frozen while the output saturates in the direction of
// the error.
class PidController {
 public:
  PidController() = default;
  PidController(PidGains gains, double target, double output_limit);

  double update(double measurement, double dt);
  void reset();

  const PidGains& gains() const { return gains_; }
  double target() const { return target_; }
  double output_limit() const { return output_limit_; }
  double integral() const { return integral_; }
  double integral_limit() const;

 private:
  PidGains gains_;
  double target_ = 0.0;
  double output_limit_ = 0.0;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

// First-order lag with a pure transport delay between the commanded and the
// applied longitudinal acceleration.
class Drivetrain {
 public:
  Drivetrain() = default;
  Drivetrain(double time_constant, int delay_steps);

  double apply(double command, double dt);
  void reset();
  double applied() const { return applied_; }

 private:
  double time_constant_ = 0.3;
  int delay_steps_ = 2;
  std::deque<double> queue_;
  double applied_ = 0.0;
};

// Longitudinal speed plant: drivetrain feeding an integrator, speed >= 0.
class SpeedPlant {
 public:
  SpeedPlant(Drivetrain drivetrain, double initial_speed)
      : drivetrain_(drivetrain), initial_drivetrain_(drivetrain),
        initial_speed_(initial_speed), speed_(initial_speed) {}
  double step(double command, double dt);
  void reset();
  double speed() const { return speed_; }

 private:
  Drivetrain drivetrain_;
  Drivetrain initial_drivetrain_;
  double initial_speed_;
  double speed_;
};

// A single-input single-output process: reset() restores the operating point,
// step(u, dt) returns the new measurement.
struct ZnPlant {
  std::function<void()> reset;
  std::function<double(double, double)> step;
  double operating_input = 0.0;  // input that holds the operating point
};

struct ZnOptions {
  double dt = 0.05;
  double window = 60.0;            // seconds per trial
  double setpoint_step = 0.05;     // step applied above the operating point
  double gain_min = 0.01;
  double gain_max = 1000.0;
  double sweep_factor = 1.25;
  double amplitude_tolerance = 0.05;
};

struct ZnResult {
  double ultimate_gain = 0.0;
  double ultimate_period = 0.0;
  PidGains gains;
};

// Classic Ziegler-Nichols closed-loop tuning: finds the proportional gain at
// which the loop oscillates with constant amplitude, then applies
// kp = 0.6 Ku, ki = 2 kp / Tu, kd = kp Tu / 8. Throws Error(no_oscillation)
// when no sustained oscillation appears within [gain_min, gain_max].
ZnResult ziegler_nichols_tune(const ZnPlant& plant, const ZnOptions& options = {});

}  // namespace articnav
