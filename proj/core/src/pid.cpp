#include "articnav/pid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "articnav/error.hpp"

namespace articnav {

PidController::PidController(PidGains gains, double target, double output_limit)
    : gains_(gains), target_(target), output_limit_(output_limit) {}

double PidController::integral_limit() const {
  return gains_.ki > 0.0 ? output_limit_ / gains_.ki : std::numeric_limits<double>::infinity();
}

double PidController::update(double measurement, double dt) {
  const double error = target_ - measurement;
  const double derivative = has_prev_ ? (error - prev_error_) / dt : 0.0;
  prev_error_ = error;
  has_prev_ = true;
  const double lim = integral_limit();
  const double candidate = std::clamp(integral_ + error * dt, -lim, lim);
  const double raw = gains_.kp * error + gains_.ki * candidate + gains_.kd * derivative;
  const double out = std::clamp(raw, -output_limit_, output_limit_);
  const bool winding_up = (raw > output_limit_ && error > 0.0) ||
                          (raw < -output_limit_ && error < 0.0);
  if (!winding_up) integral_ = candidate;
  return out;
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

Drivetrain::Drivetrain(double time_constant, int delay_steps)
    : time_constant_(time_constant), delay_steps_(delay_steps) {
  if (!(time_constant > 0.0) || delay_steps < 0) {
    throw Error(ErrorCategory::invalid_argument, "drivetrain: time constant must be > 0, delay >= 0");
  }
}

double Drivetrain::apply(double command, double dt) {
  double delayed = command;
  if (delay_steps_ > 0) {
    while (static_cast<int>(queue_.size()) < delay_steps_) queue_.push_back(0.0);
    queue_.push_back(command);
    delayed = queue_.front();
    queue_.pop_front();
  }
  applied_ += (delayed - applied_) * std::min(1.0, dt / time_constant_);
  return applied_;
}

void Drivetrain::reset() {
  queue_.clear();
  applied_ = 0.0;
}

double SpeedPlant::step(double command, double dt) {
  const double a = drivetrain_.apply(command, dt);
  speed_ = std::max(0.0, speed_ + a * dt);
  return speed_;
}

void SpeedPlant::reset() {
  drivetrain_ = initial_drivetrain_;
  speed_ = initial_speed_;
}

namespace {

struct Trial {
  double growth = 0.0;  // last / first peak-to-trough amplitude
  double period = 0.0;
  int peaks = 0;
};

Trial run_trial(const ZnPlant& plant, const ZnOptions& opt, double gain) {
  plant.reset();
  const int steps = static_cast<int>(std::lround(opt.window / opt.dt));
  double y = plant.step(plant.operating_input, opt.dt);
  const double setpoint = y + opt.setpoint_step;
  std::vector<double> ys;
  ys.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    y = plant.step(plant.operating_input + gain * (setpoint - y), opt.dt);
    if (!std::isfinite(y) || std::abs(y - setpoint) > 1e6 * opt.setpoint_step) {
      return {std::numeric_limits<double>::infinity(), 0.0, 0};
    }
    ys.push_back(y);
  }
  std::vector<std::size_t> peaks;
  std::vector<std::size_t> troughs;
  for (std::size_t k = 1; k + 1 < ys.size(); ++k) {
    if (ys[k] > ys[k - 1] && ys[k] >= ys[k + 1]) peaks.push_back(k);
    if (ys[k] < ys[k - 1] && ys[k] <= ys[k + 1]) troughs.push_back(k);
  }
  // Peak-to-trough amplitudes, skipping the first (transient) peak.
  std::vector<double> amps;
  std::vector<std::size_t> amp_peaks;
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    auto t = std::upper_bound(troughs.begin(), troughs.end(), peaks[i]);
    if (t == troughs.end()) break;
    amps.push_back(ys[peaks[i]] - ys[*t]);
    amp_peaks.push_back(peaks[i]);
  }
  Trial trial;
  trial.peaks = static_cast<int>(amp_peaks.size());
  const double noise = 1e-9 * opt.setpoint_step;
  if (amps.size() < 3 || amps.front() <= noise) return trial;
  trial.growth = amps.back() / amps.front();
  trial.period = (amp_peaks.back() - amp_peaks.front()) * opt.dt /
                 static_cast<double>(amp_peaks.size() - 1);
  return trial;
}

}  // namespace

ZnResult ziegler_nichols_tune(const ZnPlant& plant, const ZnOptions& opt) {
  const double tol = opt.amplitude_tolerance;
  auto sustained = [&](const Trial& t) { return std::abs(t.growth - 1.0) <= tol; };
  auto finish = [](double ku, double tu) {
    ZnResult r;
    r.ultimate_gain = ku;
    r.ultimate_period = tu;
    r.gains.kp = 0.6 * ku;
    r.gains.ki = 2.0 * r.gains.kp / tu;
    r.gains.kd = r.gains.kp * tu / 8.0;
    return r;
  };

  double lo = 0.0;
  double hi = 0.0;
  for (double k = opt.gain_min; k <= opt.gain_max; k *= opt.sweep_factor) {
    const Trial t = run_trial(plant, opt, k);
    if (sustained(t)) return finish(k, t.period);
    if (t.growth > 1.0) {
      hi = k;
      break;
    }
    lo = k;
  }
  if (hi == 0.0 || lo == 0.0) {
    throw Error(ErrorCategory::no_oscillation,
                "no sustained oscillation within the gain sweep; set PID gains manually");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = std::sqrt(lo * hi);
    const Trial t = run_trial(plant, opt, mid);
    if (sustained(t)) return finish(mid, t.period);
    (t.growth > 1.0 ? hi : lo) = mid;
  }
  throw Error(ErrorCategory::no_oscillation,
              "gain bisection did not reach constant-amplitude oscillation; set PID gains manually");
}

}  // namespace articnav
