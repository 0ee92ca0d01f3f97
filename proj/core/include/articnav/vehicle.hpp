#pragma once

#include <span>

#include "articnav/geom2d.hpp"

namespace articnav {

// Tractor with one semitrailer. The truck reference point is the centre of
// its rear axle; the hitch sits `hitch_offset` behind it (0 = on-axle).
struct VehicleSpec {
  double truck_wheelbase = 3.8;
  double truck_length = 6.0;
  double truck_width = 2.5;
  double truck_rear_overhang = 1.0;    // rear axle to rear bumper
  double trailer_length = 8.0;         // hitch to trailer axle
  double trailer_body_length = 10.0;
  double trailer_width = 2.5;
  double trailer_front_overhang = 1.0; // trailer body ahead of the hitch
  double hitch_offset = 0.0;
  double max_wheel_angle = 0.7;
  double jackknife_limit = 1.0;

  // Throws Error(invalid_argument) when an invariant does not hold.
  void validate() const;
  bool operator==(const VehicleSpec&) const = default;
};

struct Pose2 {
  Point2 position;
  double heading = 0.0;
  bool operator==(const Pose2&) const = default;
};

struct TractorTrailerState {
  Pose2 truck;                 // rear-axle centre
  double trailer_heading = 0.0;
  double speed = 0.0;
  double wheel_angle = 0.0;
  bool operator==(const TractorTrailerState&) const = default;

  double articulation() const { return wrap_angle(truck.heading - trailer_heading); }
};

Point2 hitch_point(const TractorTrailerState& s, const VehicleSpec& spec);
// The trailer's coupling point, derived from the trailer axle.
Point2 trailer_coupling_point(const TractorTrailerState& s, const VehicleSpec& spec);
Point2 trailer_axle_point(const TractorTrailerState& s, const VehicleSpec& spec);
// Geometric centre of the truck body; the reference for sensors and
// lane-centre distance.
Point2 truck_center(const TractorTrailerState& s, const VehicleSpec& spec);

// Explicit Euler step of the kinematic bicycle + trailer model. Out-of-range
// dt or wheel angles are clipped with a warning.
TractorTrailerState step_kinematics(const TractorTrailerState& state,
                                    const VehicleSpec& spec,
                                    double commanded_wheel_angle,
                                    double acceleration, double dt);

// Time derivative of (x, y, heading, trailer_heading) at a fixed wheel angle
// and speed; exposed for integrator cross-checks.
std::array<double, 4> kinematic_rates(const TractorTrailerState& state,
                                      const VehicleSpec& spec);

struct Footprints {
  OrientedRect truck;
  OrientedRect trailer;
};

Footprints footprints(const TractorTrailerState& state, const VehicleSpec& spec);

enum class Collision { none, truck_kerb, trailer_kerb };

// Trailer contact is reported in preference to truck contact.
Collision check_collision(const Footprints& fp, std::span<const Polyline> boundaries);

}  // namespace articnav
