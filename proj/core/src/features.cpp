#include "articnav/features.hpp"

#include <algorithm>
#include <limits>

#include "articnav/error.hpp"

namespace articnav {

const ObservationSlice& ObservationLayout::slice(std::string_view name) {
  for (const auto& s : kSlices) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCategory::invalid_argument, "unknown observation slice");
}

static_assert([] {
  std::size_t offset = 0;
  for (const auto& s : ObservationLayout::kSlices) {
    if (s.offset != offset) return false;
    offset += s.size;
  }
  return offset == ObservationLayout::kSize;
}());

std::size_t RouteTracker::advance(Point2 p, double pass_radius) {
  std::size_t passed = 0;
  const auto& wps = route_->waypoints;
  while (current_ < wps.size()) {
    const Waypoint& w = wps[current_];
    const Vec2 d = p - w.position;
    if (dot(d, w.forward.vec()) >= 0.0 || norm(d) <= pass_radius) {
      ++current_;
      ++passed;
    } else {
      break;
    }
  }
  return passed;
}

std::size_t RouteTracker::ahead(std::size_t n) const {
  const std::size_t last = route_->waypoints.size() - 1;
  return std::min(current_ + n - 1, last);
}

std::size_t advance_tracker(RouteTracker& tracker, const TractorTrailerState& state,
                            const VehicleSpec& spec, const FeatureConfig& config) {
  return tracker.advance(truck_center(state, spec), config.pass_radius);
}

std::array<double, kRayCount> sensor_rays(const TractorTrailerState& state,
                                          const VehicleSpec& spec,
                                          std::span<const Polyline> boundaries,
                                          double max_range) {
  std::array<double, kRayCount> out{};
  const Point2 centre = truck_center(state, spec);
  const double step = kPi / 12.0;
  for (std::size_t k = 0; k < kTruckRayCount; ++k) {
    const double angle = state.truck.heading + (static_cast<double>(k) - 6.0) * step;
    out[k] = raycast(centre, UnitVec2::from_angle(angle), boundaries, max_range);
  }
  const UnitVec2 axis = UnitVec2::from_angle(state.trailer_heading);
  const Vec2 left = perp(axis.vec());
  const UnitVec2 left_dir = *UnitVec2::normalized(left);
  const UnitVec2 right_dir = *UnitVec2::normalized(-left);
  const Point2 front = hitch_point(state, spec) + axis.vec() * spec.trailer_front_overhang;
  for (std::size_t i = 0; i < kTrailerRaysPerSide; ++i) {
    const double along = (static_cast<double>(i) + 0.5) / kTrailerRaysPerSide *
                         spec.trailer_body_length;
    const Point2 base = front - axis.vec() * along;
    const double hw = spec.trailer_width / 2.0;
    out[kTruckRayCount + i] = raycast(base + left * hw, left_dir, boundaries, max_range);
    out[kTruckRayCount + kTrailerRaysPerSide + i] =
        raycast(base - left * hw, right_dir, boundaries, max_range);
  }
  return out;
}

double distance_to_route(Point2 p, const WaypointRoute& route) {
  const auto& wps = route.waypoints;
  if (wps.size() == 1) return distance(p, wps.front().position);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
    best = std::min(best, point_segment_distance(p, wps[i].position, wps[i + 1].position));
  }
  return best;
}

namespace {

float unit_clamp(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }
float angle_norm(double radians) { return static_cast<float>(radians / kPi); }

double curvature_angle(const std::vector<Waypoint>& wps, std::size_t a, std::size_t c,
                       std::size_t b) {
  // Degenerate windows (clamped onto the centre) read as straight.
  return subtended_angle(wps[a].position, wps[c].position, wps[b].position).value_or(kPi);
}

}  // namespace

ObservationVector build_observation(const TractorTrailerState& state,
                                    const RouteTracker& tracker, const Scenario& scenario,
                                    const VehicleSpec& spec, const FeatureConfig& config) {
  ObservationVector obs{};
  const auto& wps = tracker.route().waypoints;
  const std::size_t last = wps.size() - 1;
  const std::size_t cur = std::min(tracker.current_index(), last);
  auto clamp_index = [&](std::ptrdiff_t i) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(last)));
  };
  auto ahead = [&](std::size_t n) { return std::min(cur + n - 1, last); };

  const auto rays = sensor_rays(state, spec, scenario.boundaries, config.ray_max_range);
  for (std::size_t i = 0; i < kRayCount; ++i) obs[i] = unit_clamp(rays[i] / config.ray_max_range);

  const UnitVec2 truck_fwd = UnitVec2::from_angle(state.truck.heading);
  const UnitVec2 trailer_fwd = UnitVec2::from_angle(state.trailer_heading);
  for (std::size_t k = 0; k < kHeadingLookaheads.size(); ++k) {
    const UnitVec2 wf = wps[ahead(kHeadingLookaheads[k])].forward;
    obs[29 + k] = angle_norm(signed_angle(truck_fwd, wf));
    obs[34 + k] = angle_norm(signed_angle(trailer_fwd, wf));
  }
  obs[39] = angle_norm(state.articulation());

  const Point2 centre = truck_center(state, spec);
  // Previous waypoint: the last one whose perpendicular line lies behind the
  // truck. The pass radius can mark waypoints just ahead as passed.
  std::size_t prev_index = cur == 0 ? 0 : cur - 1;
  while (prev_index > 0 &&
         dot(centre - wps[prev_index].position, wps[prev_index].forward.vec()) < 0.0) {
    --prev_index;
  }
  const Point2 prev = wps[prev_index].position;
  for (std::size_t k = 0; k < kHeadingLookaheads.size(); ++k) {
    const auto to_future = UnitVec2::normalized(wps[ahead(kHeadingLookaheads[k])].position - prev);
    const auto to_truck = UnitVec2::normalized(centre - prev);
    obs[40 + k] = (to_future && to_truck) ? angle_norm(signed_angle(*to_future, *to_truck)) : 0.0f;
  }

  const auto c = static_cast<std::ptrdiff_t>(cur);
  for (std::size_t k = 0; k < kCurvatureSpans.size(); ++k) {
    const auto d = static_cast<std::ptrdiff_t>(kCurvatureSpans[k]);
    obs[45 + k] = angle_norm(curvature_angle(wps, clamp_index(c - d), cur, clamp_index(c + d)));
    obs[49 + k] = angle_norm(curvature_angle(wps, cur, clamp_index(c + d), clamp_index(c + 2 * d)));
  }

  float last_radius = 1.0f;
  const std::size_t window = 2 * config.chord_step;
  std::vector<Point2> pts(window + 1);
  for (std::size_t j = 0; j < kRadiusWindows; ++j) {
    const std::size_t start = cur + j * config.chord_step;
    if (start + window <= last) {
      for (std::size_t i = 0; i <= window; ++i) pts[i] = wps[start + i].position;
      const CircleEstimate est = fit_circle_from_chords(pts, config.chord_step);
      last_radius = est.is_straight() ? 1.0f : unit_clamp(est.radius / config.radius_max);
    }
    obs[53 + j] = last_radius;
  }

  obs[63] = unit_clamp(state.speed / config.speed_norm);
  for (std::size_t k = 0; k < 2; ++k) {
    const Waypoint& w = wps[ahead(k + 1)];
    obs[64 + k] = unit_clamp(distance(centre, w.position) / config.waypoint_distance_norm);
    obs[66 + k] = unit_clamp(std::abs(dot(centre - w.position, w.forward.vec())) /
                             config.waypoint_distance_norm);
  }
  return obs;
}

}  // namespace articnav
