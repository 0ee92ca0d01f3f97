#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "articnav/envmdp.hpp"
#include "articnav/neuralnet.hpp"

namespace articnav {

// One control step. The pose is the truck body centre, not the rear axle.
struct TraceRow {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double trailer_heading = 0.0;
  double speed = 0.0;
  std::size_t action = 0;
  double reward = 0.0;
  double distance_to_center = 0.0;
  bool operator==(const TraceRow&) const = default;
};

struct EpisodeTrace {
  std::string scenario;
  std::size_t route_id = 0;
  std::uint64_t seed = 0;
  TraceRow start;  // pose after reset; t, action and reward are zero
  std::vector<TraceRow> rows;
  bool success = false;
  FailureCause failure_cause = FailureCause::none;
  double total_reward = 0.0;
  std::size_t steps = 0;
  bool operator==(const EpisodeTrace&) const = default;
};

struct RouteReport {
  std::string scenario;
  std::size_t route_id = 0;
  int entry_index = 0;
  int exit_index = 0;
  bool requires_deviation = false;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::map<FailureCause, std::size_t> outcomes;  // every cause, including none
  double mean_distance_to_center = 0.0;  // per-episode time average, then episode mean
  double mean_reward = 0.0;
};

struct EvalReport {
  std::vector<RouteReport> routes;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::map<FailureCause, std::size_t> outcomes;
  // Over routes that do not require deviation; NaN when there are none.
  double mean_distance_to_center = 0.0;
  std::size_t distance_episodes = 0;
};

// Chooses an action from the current observation; may inspect the
// environment (scripted policies). Must be safe to call from several threads.
using Policy = std::function<std::size_t(const std::vector<float>& observation, const RoundaboutEnv& env)>;

// Argmax of the policy network's output.
Policy greedy_policy(Mlp policy);
// Loads the "policy" network of a training checkpoint. Throws
// Error(layout_mismatch) when the observation layout differs.
Mlp load_policy(const std::filesystem::path& checkpoint);

inline constexpr double kMaxComfortableArticulation = 0.35;

double critical_radius(const VehicleSpec& vehicle);
// True when a circle fitted through three waypoints spanning one trailer length has a
// radius below critical_radius anywhere along the route.
bool requires_deviation(const WaypointRoute& route, const VehicleSpec& vehicle);

struct EvalOptions {
  std::size_t episodes_per_route = 30;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool keep_traces = true;
  // Keyed by "<scenario name>#<route id>"; replaces the geometric flag.
  std::map<std::string, bool> deviation_overrides;
};

struct EvalResult {
  EvalReport report;
  std::vector<EpisodeTrace> traces;  // route-major, episode order
};

// Seeds depend only on (seed, route position, episode), so results do not
// depend on the thread count.
EvalResult evaluate(const std::vector<RouteTask>& tasks, const EnvConfig& config, const Policy& policy,
                    const EvalOptions& options);

// Runs one episode and records it.
EpisodeTrace run_episode(RoundaboutEnv& env, std::size_t task, std::uint64_t seed, const Policy& policy);

std::string report_to_json(const EvalReport& report);
// One row per route plus a final "all" row.
std::string report_to_csv(const EvalReport& report);

// Trace CSV: '#'-prefixed key=value metadata lines (format, scenario, route,
// seed, start pose), the column header
//   t,x,y,heading,trailer_heading,speed,action,reward,distance_to_center
// one row per step, and a closing "# end" line with the terminal record.
std::string trace_to_csv(const EpisodeTrace& trace);
EpisodeTrace parse_trace_csv(const std::string& text);
void export_trace_csv(const EpisodeTrace& trace, const std::filesystem::path& path);
EpisodeTrace load_trace_csv(const std::filesystem::path& path);

// 10 px per metre, y up. Kerbs grey, route waypoints green, truck path yellow,
// start circle and end triangle red.
std::string trace_to_svg(const EpisodeTrace& trace, const Scenario& scenario);
void export_trace_svg(const EpisodeTrace& trace, const Scenario& scenario, const std::filesystem::path& path);

}  // namespace articnav
