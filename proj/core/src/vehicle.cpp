#include "articnav/vehicle.hpp"

#include <algorithm>
#include <cassert>

#include <spdlog/spdlog.h>

#include "articnav/error.hpp"

namespace articnav {

void VehicleSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw Error(ErrorCategory::invalid_argument,
                  std::string("vehicle spec: ") + name + " must be > 0");
    }
  };
  positive(truck_wheelbase, "truck_wheelbase");
  positive(truck_length, "truck_length");
  positive(truck_width, "truck_width");
  positive(trailer_length, "trailer_length");
  positive(trailer_body_length, "trailer_body_length");
  positive(trailer_width, "trailer_width");
  positive(max_wheel_angle, "max_wheel_angle");
  positive(jackknife_limit, "jackknife_limit");
  if (!(jackknife_limit < kPi / 2.0)) {
    throw Error(ErrorCategory::invalid_argument, "vehicle spec: jackknife_limit must be < pi/2");
  }
  if (!(max_wheel_angle < kPi / 2.0)) {
    throw Error(ErrorCategory::invalid_argument, "vehicle spec: max_wheel_angle must be < pi/2");
  }
  if (hitch_offset < 0.0 || truck_rear_overhang < 0.0 || trailer_front_overhang < 0.0) {
    throw Error(ErrorCategory::invalid_argument, "vehicle spec: offsets must be >= 0");
  }
}

Point2 hitch_point(const TractorTrailerState& s, const VehicleSpec& spec) {
  return s.truck.position - UnitVec2::from_angle(s.truck.heading).vec() * spec.hitch_offset;
}

Point2 trailer_axle_point(const TractorTrailerState& s, const VehicleSpec& spec) {
  return hitch_point(s, spec) -
         UnitVec2::from_angle(s.trailer_heading).vec() * spec.trailer_length;
}

Point2 trailer_coupling_point(const TractorTrailerState& s, const VehicleSpec& spec) {
  return trailer_axle_point(s, spec) +
         UnitVec2::from_angle(s.trailer_heading).vec() * spec.trailer_length;
}

Point2 truck_center(const TractorTrailerState& s, const VehicleSpec& spec) {
  return s.truck.position + UnitVec2::from_angle(s.truck.heading).vec() *
                                (spec.truck_length / 2.0 - spec.truck_rear_overhang);
}

std::array<double, 4> kinematic_rates(const TractorTrailerState& s, const VehicleSpec& spec) {
  const double v = s.speed;
  const double yaw_rate = v * std::tan(s.wheel_angle) / spec.truck_wheelbase;
  const double gamma = s.truck.heading - s.trailer_heading;
  const double trailer_rate =
      (v * std::sin(gamma) - spec.hitch_offset * yaw_rate * std::cos(gamma)) /
      spec.trailer_length;
  return {v * std::cos(s.truck.heading), v * std::sin(s.truck.heading), yaw_rate,
          trailer_rate};
}

TractorTrailerState step_kinematics(const TractorTrailerState& state, const VehicleSpec& spec,
                                    double commanded_wheel_angle, double acceleration,
                                    double dt) {
  if (!(dt > 0.0) || dt > 0.1) {
    spdlog::warn("step_kinematics: dt {} outside (0, 0.1]; clipped", dt);
    dt = std::clamp(dt, 1e-6, 0.1);
  }
  if (std::abs(commanded_wheel_angle) > spec.max_wheel_angle) {
    spdlog::warn("step_kinematics: wheel angle {} exceeds limit {}; clipped",
                 commanded_wheel_angle, spec.max_wheel_angle);
    commanded_wheel_angle =
        std::clamp(commanded_wheel_angle, -spec.max_wheel_angle, spec.max_wheel_angle);
  }
  TractorTrailerState next = state;
  next.wheel_angle = commanded_wheel_angle;
  const auto r = kinematic_rates(next, spec);
  next.truck.position.x += r[0] * dt;
  next.truck.position.y += r[1] * dt;
  next.truck.heading = wrap_angle(state.truck.heading + r[2] * dt);
  next.trailer_heading = wrap_angle(state.trailer_heading + r[3] * dt);
  next.speed = std::max(0.0, state.speed + acceleration * dt);
  assert(distance(hitch_point(next, spec), trailer_coupling_point(next, spec)) < 1e-9);
  return next;
}

Footprints footprints(const TractorTrailerState& s, const VehicleSpec& spec) {
  const UnitVec2 truck_axis = UnitVec2::from_angle(s.truck.heading);
  const UnitVec2 trailer_axis = UnitVec2::from_angle(s.trailer_heading);
  Footprints fp;
  fp.truck = {truck_center(s, spec), truck_axis, spec.truck_length / 2.0,
              spec.truck_width / 2.0};
  fp.trailer = {hitch_point(s, spec) + trailer_axis.vec() * (spec.trailer_front_overhang -
                                                             spec.trailer_body_length / 2.0),
                trailer_axis, spec.trailer_body_length / 2.0, spec.trailer_width / 2.0};
  return fp;
}

namespace {
bool rect_hits(const OrientedRect& rect, std::span<const Polyline> boundaries) {
  // Cheap bounding-circle reject before the exact segment test.
  const double reach = std::hypot(rect.half_length, rect.half_width);
  for (const Polyline& line : boundaries) {
    const std::size_t n = line.segment_count();
    for (std::size_t i = 0; i < n; ++i) {
      const auto [a, b] = line.segment(i);
      if (point_segment_distance(rect.center, a, b) > reach) continue;
      if (rect.intersects_segment(a, b)) return true;
    }
  }
  return false;
}
}  // namespace

Collision check_collision(const Footprints& fp, std::span<const Polyline> boundaries) {
  if (rect_hits(fp.trailer, boundaries)) return Collision::trailer_kerb;
  if (rect_hits(fp.truck, boundaries)) return Collision::truck_kerb;
  return Collision::none;
}

}  // namespace articnav
