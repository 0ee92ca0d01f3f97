#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "articnav/geom2d.hpp"

namespace articnav {

struct EntrySpec {
  double angle = 0.0;               // arm direction from the centre, radians
  double approach_length = 40.0;    // straight road length beyond the ring kerb
  bool operator==(const EntrySpec&) const = default;
};

struct RoundaboutSpec {
  double diameter = 16.0;           // central island kerb diameter
  double lane_width = 3.7;
  int lanes_per_carriageway = 2;
  std::vector<EntrySpec> entries;
  double fillet_radius = 8.0;       // kerb fillet joining arm and ring
  double kerb_chord_error = 0.02;   // max sagitta of the kerb discretisation

  double island_radius() const { return diameter / 2.0; }
  double ring_kerb_radius() const {
    return island_radius() + lanes_per_carriageway * lane_width;
  }
  // Lane 0 is the innermost circulating lane.
  double ring_lane_radius(int lane) const {
    return island_radius() + (lane + 0.5) * lane_width;
  }
  bool operator==(const RoundaboutSpec&) const = default;
};

// `count` entries evenly spaced starting at `rotation`.
RoundaboutSpec make_roundabout_spec(double diameter, int count,
                                    double rotation = 0.0);

// The five training/testing roundabouts: 16, 20, 32, 40 (three arms), 50 m.
std::vector<RoundaboutSpec> default_family();

struct Waypoint {
  Point2 position;
  UnitVec2 forward;
  bool operator==(const Waypoint&) const = default;
};

// Lane ids follow the ring: 0 is innermost. lane_sequence holds
// {approach lane, circulating lane, exit lane}.
struct WaypointRoute {
  std::vector<Waypoint> waypoints;
  int entry_index = 0;
  int exit_index = 0;
  std::vector<int> lane_sequence;

  double polyline_length() const;
  std::vector<Point2> positions() const;
  bool operator==(const WaypointRoute&) const = default;
};

struct Scenario {
  std::string name;
  RoundaboutSpec spec;
  double waypoint_spacing = 1.0;
  std::vector<Polyline> boundaries;
  std::vector<WaypointRoute> routes;
  bool operator==(const Scenario&) const = default;
};

// Throws Error(invalid_argument) for invalid specs or when approach roads
// overlap.
Scenario generate_roundabout(const RoundaboutSpec& spec, double waypoint_spacing,
                             std::string name = {});

// Routes for every entry: the outermost lane serves every non-U-turn exit;
// inner lanes serve exits more than a quarter turn around the ring.
std::vector<WaypointRoute> enumerate_routes(const Scenario& scenario);

// Analytic lane-centre length of a route (straights + fillets + ring arc).
double analytic_route_length(const RoundaboutSpec& spec, int entry_index,
                             int exit_index, int lane);

inline constexpr int kScenarioFormatVersion = 1;

std::string serialize_scenario(const Scenario& scenario);
Scenario parse_scenario(const std::string& text);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace articnav
