#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "articnav/scenario.hpp"
#include "articnav/vehicle.hpp"

namespace articnav {

inline constexpr std::size_t kTruckRayCount = 13;
inline constexpr std::size_t kTrailerRaysPerSide = 8;
inline constexpr std::size_t kRayCount = kTruckRayCount + 2 * kTrailerRaysPerSide;

struct ObservationSlice {
  std::string_view name;
  std::size_t offset;
  std::size_t size;
  float lower;
  float upper;
};

// Fixed observation layout. Bump kObservationLayoutVersion whenever a slice
// changes; checkpoints refuse a mismatched version.
struct ObservationLayout {
  static constexpr int kVersion = 1;
  static constexpr std::array<ObservationSlice, 12> kSlices{{
      {"truck_rays", 0, 13, 0.0f, 1.0f},
      {"trailer_rays", 13, 16, 0.0f, 1.0f},
      {"truck_wp_angles", 29, 5, -1.0f, 1.0f},
      {"trailer_wp_angles", 34, 5, -1.0f, 1.0f},
      {"articulation", 39, 1, -1.0f, 1.0f},
      {"lane_center_angles", 40, 5, -1.0f, 1.0f},
      {"curvature_current", 45, 4, 0.0f, 1.0f},
      {"curvature_future", 49, 4, 0.0f, 1.0f},
      {"radii", 53, 10, 0.0f, 1.0f},
      {"forward_speed", 63, 1, 0.0f, 1.0f},
      {"wp_hypot", 64, 2, 0.0f, 1.0f},
      {"perp_line_dist", 66, 2, 0.0f, 1.0f},
  }};
  static constexpr std::size_t kSize = 68;

  static const ObservationSlice& slice(std::string_view name);
};

inline constexpr int kObservationLayoutVersion = ObservationLayout::kVersion;
inline constexpr std::size_t kObservationSize = ObservationLayout::kSize;

using ObservationVector = std::array<float, kObservationSize>;

struct FeatureConfig {
  double ray_max_range = 50.0;
  double radius_max = 100.0;
  double speed_norm = 2.0 * 30.0 / 3.6;
  double waypoint_distance_norm = 20.0;
  std::size_t chord_step = 5;
  double pass_radius = 2.0;
  bool operator==(const FeatureConfig&) const = default;
};

inline constexpr std::array<std::size_t, 5> kHeadingLookaheads{1, 2, 5, 7, 10};
inline constexpr std::array<std::size_t, 4> kCurvatureSpans{5, 7, 10, 12};
inline constexpr std::size_t kRadiusWindows = 10;

// Tracks the next waypoint of a route that the truck has not yet passed.
class RouteTracker {
 public:
  RouteTracker() = default;
  explicit RouteTracker(const WaypointRoute& route) : route_(&route) {}

  const WaypointRoute& route() const { return *route_; }
  std::size_t current_index() const { return current_; }
  std::size_t remaining() const { return route_->waypoints.size() - current_; }
  bool finished() const { return current_ >= route_->waypoints.size(); }

  // A waypoint is passed once `p` lies in the half-plane ahead of its
  // perpendicular line, or within `pass_radius` of it. Returns the number of
  // waypoints passed by this call.
  std::size_t advance(Point2 p, double pass_radius);

  // Index of the waypoint `n` ahead (n = 1 is the current one), clamped to
  // the route.
  std::size_t ahead(std::size_t n) const;

 private:
  const WaypointRoute* route_ = nullptr;
  std::size_t current_ = 0;
};

std::size_t advance_tracker(RouteTracker& tracker, const TractorTrailerState& state,
                            const VehicleSpec& spec, const FeatureConfig& config);

// Raw sensor distances in metres: 13 truck rays (heading -90..+90 deg in
// 15 deg steps), then 8 left and 8 right trailer rays from front to rear.
std::array<double, kRayCount> sensor_rays(const TractorTrailerState& state,
                                          const VehicleSpec& spec,
                                          std::span<const Polyline> boundaries,
                                          double max_range);

ObservationVector build_observation(const TractorTrailerState& state,
                                    const RouteTracker& tracker, const Scenario& scenario,
                                    const VehicleSpec& spec, const FeatureConfig& config);

// Distance from p to the nearest point of the route polyline.
double distance_to_route(Point2 p, const WaypointRoute& route);

}  // namespace articnav
