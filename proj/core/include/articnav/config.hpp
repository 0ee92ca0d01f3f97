#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "articnav/envmdp.hpp"
#include "articnav/trainer.hpp"

namespace articnav {

// A roundabout given either by file or by generator parameters. An empty
// route list selects every route.
struct ScenarioSource {
  std::filesystem::path file;
  double diameter = 16.0;
  int arms = 4;
  double rotation = 0.0;
  std::vector<std::size_t> routes;
  bool operator==(const ScenarioSource&) const = default;
};

// Everything a training or evaluation run needs apart from output paths.
// JSON layout:
//   { "scenarios": [...], "waypoint_spacing": 1.0,
//     "env": {..., "pid": {...}}, "vehicle": {...}, "features": {...},
//     "sac": {...}, "train": {"seed", "checkpoint_interval", ...} }
// Every section and field is optional; unknown keys are errors.
struct RunConfig {
  std::vector<ScenarioSource> scenarios = training_scenarios();
  double waypoint_spacing = 1.0;
  EnvConfig env;
  TrainConfig train;

  static std::vector<ScenarioSource> training_scenarios();  // 16, 32 and 50 m
  static std::vector<ScenarioSource> testing_scenarios();   // 20 m and 40 m (three arms)
};

// Throws Error(parse) naming the offending field path (e.g. "sac.lr").
RunConfig parse_run_config(std::string_view json_text);
// Throws Error(file_not_found) or Error(parse).
RunConfig load_run_config(const std::filesystem::path& path);
// Fully resolved configuration as pretty-printed JSON; parses back to the
// same values.
std::string run_config_to_json(const RunConfig& config);

// Applies "dotted.path=value". The value is read as JSON when it parses,
// otherwise as a string. Throws Error(parse) for unknown paths or bad values.
void apply_override(RunConfig& config, std::string_view assignment);

// Generates or loads every scenario and returns the selected routes.
// Relative scenario files are resolved against base_dir.
std::vector<RouteTask> build_tasks(const std::vector<ScenarioSource>& sources, double waypoint_spacing,
                                   const std::filesystem::path& base_dir = {});

}  // namespace articnav
