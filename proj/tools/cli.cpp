#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "articnav/config.hpp"
#include "articnav/error.hpp"
#include "articnav/evalkit.hpp"
#include "articnav/trainer.hpp"

namespace articnav::cli {
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void use_stderr_logger() {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("artic-nav");
    l->set_pattern("[%H:%M:%S.%e] [%l] %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorCategory::io, "cannot write " + path.string());
}

std::vector<double> parse_numbers(const std::string& text, std::size_t count, const std::string& flag) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + cell + "' is not a number");
    }
  }
  if (v.size() != count) throw UsageError(flag + ": expected " + std::to_string(count) + " comma-separated numbers");
  return v;
}

// Config file (optional) plus overrides; flags applied by the caller win.
RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                         fs::path& base_dir) {
  RunConfig config;
  if (!config_path.empty()) {
    config = load_run_config(config_path);
    base_dir = fs::path(config_path).parent_path();
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

std::shared_ptr<const Scenario> scenario_from_flags(const std::string& file, double diameter, int entries,
                                                    double spacing) {
  if (!file.empty()) return std::make_shared<const Scenario>(load_scenario(file));
  return std::make_shared<const Scenario>(generate_roundabout(make_roundabout_spec(diameter, entries), spacing));
}

// ---------------------------------------------------------------- scenario

struct ScenarioGenArgs {
  double diameter = 16.0;
  int entries = 4;
  double rotation = 0.0;
  double spacing = 1.0;
  double lane_width = 3.7;
  std::string name;
  std::string output;
};

int scenario_gen(const ScenarioGenArgs& a) {
  RoundaboutSpec spec = make_roundabout_spec(a.diameter, a.entries, a.rotation);
  spec.lane_width = a.lane_width;
  std::string name = a.name;
  if (name.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "roundabout_%gm_%darm", a.diameter, a.entries);
    name = buf;
  }
  const Scenario s = generate_roundabout(spec, a.spacing, name);
  save_scenario(s, a.output);
  std::printf("wrote %s: %zu routes, %zu kerbs\n", a.output.c_str(), s.routes.size(), s.boundaries.size());
  for (std::size_t i = 0; i < s.routes.size(); ++i) {
    const auto& r = s.routes[i];
    std::printf("  route %zu: entry %d -> exit %d, %zu waypoints, %.1f m\n", i, r.entry_index, r.exit_index,
                r.waypoints.size(), r.polyline_length());
  }
  return 0;
}

// ------------------------------------------------------------- inspect-obs

struct InspectArgs {
  std::string scenario;
  double diameter = 16.0;
  int entries = 4;
  std::size_t route = 0;
  std::string pose;
  double speed = 0.0;
  bool json = false;
};

int inspect_obs(const InspectArgs& a) {
  const auto sc = scenario_from_flags(a.scenario, a.diameter, a.entries, 1.0);
  if (a.route >= sc->routes.size()) {
    throw UsageError("--route: scenario has " + std::to_string(sc->routes.size()) + " routes");
  }
  EnvConfig env;
  env.jitter = false;
  RoundaboutEnv probe({{sc, a.route}}, env);
  probe.reset(0, 0);
  TractorTrailerState state = probe.state();
  if (!a.pose.empty()) {
    const auto p = parse_numbers(a.pose, 4, "--pose");
    state.truck.position = {p[0], p[1]};
    state.truck.heading = p[2];
    state.trailer_heading = p[3];
  }
  state.speed = a.speed;
  RouteTracker tracker(sc->routes[a.route]);
  advance_tracker(tracker, state, env.vehicle, env.features);
  const ObservationVector obs = build_observation(state, tracker, *sc, env.vehicle, env.features);

  if (a.json) {
    nlohmann::json j;
    for (const auto& s : ObservationLayout::kSlices) {
      j[std::string(s.name)] = std::vector<float>(obs.begin() + s.offset, obs.begin() + s.offset + s.size);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("pose x=%.3f y=%.3f heading=%.4f trailer_heading=%.4f speed=%.2f next_waypoint=%zu\n",
              state.truck.position.x, state.truck.position.y, state.truck.heading, state.trailer_heading,
              state.speed, tracker.current_index());
  for (const auto& s : ObservationLayout::kSlices) {
    for (std::size_t i = 0; i < s.size; ++i) {
      const float v = obs[s.offset + i];
      const bool in = v >= s.lower && v <= s.upper;
      std::printf("%2zu %-18s[%zu] % .6f%s\n", s.offset + i, std::string(s.name).c_str(), i, v,
                  in ? "" : "  OUT OF BOUNDS");
    }
  }
  return 0;
}

// ---------------------------------------------------------------- pid-tune

struct PidArgs {
  std::string config;
  std::vector<std::string> overrides;
  double seconds = 10.0;
};

int pid_tune(const PidArgs& a) {
  fs::path base;
  RunConfig rc = resolve_config(a.config, a.overrides, base);
  const ZnResult zn = tune_speed_pid(rc.env);
  std::printf("ultimate gain Ku = %.6g\nultimate period Tu = %.6g s\n", zn.ultimate_gain, zn.ultimate_period);
  std::printf("gains kp = %.6g ki = %.6g kd = %.6g\n", zn.gains.kp, zn.gains.ki, zn.gains.kd);
  rc.env.pid = zn.gains;
  const auto speeds = simulate_speed_response(rc.env, a.seconds);
  const double target = rc.env.target_speed;
  std::size_t settled = speeds.size();
  for (std::size_t i = speeds.size(); i-- > 0;) {
    if (std::abs(speeds[i] - target) > 0.02 * target) break;
    settled = i;
  }
  const double peak = speeds.empty() ? 0.0 : *std::max_element(speeds.begin(), speeds.end());
  std::printf("closed loop: final %.3f m/s (target %.3f), overshoot %.2f%%, ", speeds.empty() ? 0.0 : speeds.back(),
              target, 100.0 * (peak - target) / target);
  if (settled < speeds.size()) {
    std::printf("within 2%% from t = %.2f s\n", static_cast<double>(settled + 1) * rc.env.dt);
  } else {
    std::printf("not settled within %.1f s\n", a.seconds);
  }
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

int train(const TrainArgs& a) {
  fs::path base;
  RunConfig rc = resolve_config(a.config, a.overrides, base);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.threads) rc.train.threads = *a.threads;
  rc.train.out_dir = a.out;
  const std::string resolved = run_config_to_json(rc);
  spdlog::info("resolved config:\n{}", resolved);
  rc.train.validate();
  rc.env.validate();
  const auto tasks = build_tasks(rc.scenarios, rc.waypoint_spacing, base);
  spdlog::info("{} routes, {} worker(s), {} thread(s)", tasks.size(), rc.train.sac.workers,
               resolve_thread_count(rc.train));
  write_file(fs::path(a.out) / "config.json", resolved);
  rc.train.metadata = resolved;

  const EnvConfig env = rc.env;
  Trainer trainer(rc.train, [&](std::size_t) { return std::make_unique<RoundaboutEnv>(tasks, env); });
  const TrainResult result = trainer.run();
  const double rate = result.episodes.empty() ? 0.0 : result.episodes.back().window_success_rate;
  std::printf("trained %llu env steps, %zu episodes, %llu updates; final window success rate %.3f\n",
              static_cast<unsigned long long>(result.env_steps), result.episodes.size(),
              static_cast<unsigned long long>(result.updates), rate);
  std::printf("outputs in %s\n", a.out.c_str());
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string scenarios;
  std::string config;
  std::vector<std::string> overrides;
  std::vector<std::string> deviation;
  std::size_t episodes = 30;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string traces = "both";
  std::string out;
};

int eval(const EvalArgs& a) {
  fs::path base;
  RunConfig rc = resolve_config(a.config, a.overrides, base);
  if (!a.scenarios.empty()) {
    if (!fs::is_directory(a.scenarios)) {
      throw Error(ErrorCategory::file_not_found, "scenario directory " + a.scenarios + " not found");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.scenarios)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCategory::file_not_found, "no *.json scenarios in " + a.scenarios);
    rc.scenarios.clear();
    for (const auto& f : files) rc.scenarios.push_back({f, 0.0, 0, 0.0, {}});
  } else if (a.config.empty()) {
    rc.scenarios = RunConfig::testing_scenarios();
  }
  spdlog::info("resolved config:\n{}", run_config_to_json(rc));
  rc.env.validate();

  EvalOptions opt;
  opt.episodes_per_route = a.episodes;
  opt.seed = a.seed;
  opt.threads = a.threads;
  opt.keep_traces = a.traces != "none";
  for (const auto& d : a.deviation) {
    const auto eq = d.rfind('=');
    if (eq == std::string::npos || d.find('#') == std::string::npos || (d.substr(eq + 1) != "0" && d.substr(eq + 1) != "1")) {
      throw UsageError("--deviation expects <scenario>#<route>=0|1, got '" + d + "'");
    }
    opt.deviation_overrides[d.substr(0, eq)] = d.substr(eq + 1) == "1";
  }
  spdlog::info("checkpoint {} episodes/route {} seed {} threads {}", a.checkpoint, a.episodes, a.seed, a.threads);

  const Mlp policy = load_policy(a.checkpoint);
  const auto tasks = build_tasks(rc.scenarios, rc.waypoint_spacing, base);
  const EvalResult result = evaluate(tasks, rc.env, greedy_policy(policy), opt);
  const EvalReport& rep = result.report;

  const fs::path out(a.out);
  write_file(out / "report.json", report_to_json(rep));
  write_file(out / "report.csv", report_to_csv(rep));
  if (opt.keep_traces) {
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
      const auto& t = result.traces[i];
      const auto& task = tasks[i / a.episodes];
      char stem[160];
      std::snprintf(stem, sizeof stem, "%s_r%02zu_e%02zu", t.scenario.c_str(), t.route_id, i % a.episodes);
      if (a.traces == "csv" || a.traces == "both") export_trace_csv(t, out / "traces" / (std::string(stem) + ".csv"));
      if (a.traces == "svg" || a.traces == "both") {
        export_trace_svg(t, *task.scenario, out / "traces" / (std::string(stem) + ".svg"));
      }
    }
  }

  std::printf("%-26s %5s %5s %4s %8s %8s %9s\n", "route", "entry", "exit", "dev", "success", "mean_d", "reward");
  for (const auto& r : rep.routes) {
    std::printf("%-22s #%-3zu %5d %5d %4s %8.3f %8.3f %9.1f\n", r.scenario.c_str(), r.route_id, r.entry_index,
                r.exit_index, r.requires_deviation ? "yes" : "no", r.success_rate, r.mean_distance_to_center,
                r.mean_reward);
  }
  std::printf("episodes %zu successes %zu success_rate %.4f\n", rep.episodes, rep.successes, rep.success_rate);
  std::printf("outcomes");
  for (const auto& [cause, n] : rep.outcomes) std::printf(" %s=%zu", std::string(to_string(cause)).c_str(), n);
  std::printf("\n");
  if (rep.distance_episodes) {
    std::printf("mean distance to centre (non-deviating routes, %zu episodes) %.4f m\n", rep.distance_episodes,
                rep.mean_distance_to_center);
  } else {
    std::printf("mean distance to centre: no non-deviating routes\n");
  }
  return 0;
}

// ------------------------------------------------------------------ replay

struct ReplayArgs {
  std::string trace;
  std::string scenario;
  double diameter = 16.0;
  int entries = 4;
  double spacing = 1.0;
  std::string output;
};

int replay(const ReplayArgs& a) {
  const EpisodeTrace t = load_trace_csv(a.trace);
  const auto sc = scenario_from_flags(a.scenario, a.diameter, a.entries, a.spacing);
  if (t.route_id >= sc->routes.size()) {
    throw Error(ErrorCategory::invalid_argument,
                "trace route " + std::to_string(t.route_id) + " does not exist in the scenario");
  }
  export_trace_svg(t, *sc, a.output);
  std::printf("wrote %s (%zu steps, %s)\n", a.output.c_str(), t.steps,
              t.success ? "success" : std::string(to_string(t.failure_cause)).c_str());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  use_stderr_logger();
  CLI::App app{"Tractor-trailer roundabout navigation: scenarios, training, evaluation", "artic-nav"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  ScenarioGenArgs gen;
  auto* scenario = app.add_subcommand("scenario", "Roundabout scenario files");
  scenario->require_subcommand(1);
  auto* gen_cmd = scenario->add_subcommand("gen", "Generate a roundabout and write it as a scenario file");
  gen_cmd->add_option("--diameter", gen.diameter, "Central island diameter in metres")->capture_default_str();
  gen_cmd->add_option("--entries", gen.entries, "Number of evenly spaced arms")->capture_default_str();
  gen_cmd->add_option("--rotation", gen.rotation, "Angle of the first arm in radians")->capture_default_str();
  gen_cmd->add_option("--spacing", gen.spacing, "Waypoint spacing in metres")->capture_default_str();
  gen_cmd->add_option("--lane-width", gen.lane_width, "Lane width in metres")->capture_default_str();
  gen_cmd->add_option("--name", gen.name, "Scenario name (default derived from the geometry)");
  gen_cmd->add_option("-o,--output", gen.output, "Output file")->required();

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect-obs", "Print the labelled observation vector for a pose");
  ins_cmd->add_option("--scenario", ins.scenario, "Scenario file (default: generated roundabout)");
  ins_cmd->add_option("--diameter", ins.diameter, "Diameter when generating")->capture_default_str();
  ins_cmd->add_option("--entries", ins.entries, "Arms when generating")->capture_default_str();
  ins_cmd->add_option("--route", ins.route, "Route index")->capture_default_str();
  ins_cmd->add_option("--pose", ins.pose, "Rear-axle pose \"x,y,heading,trailer_heading\" (default: route start)");
  ins_cmd->add_option("--speed", ins.speed, "Forward speed in m/s")->capture_default_str();
  ins_cmd->add_flag("--json", ins.json, "Emit JSON keyed by slice name");

  PidArgs pid;
  auto* pid_cmd = app.add_subcommand("pid-tune", "Ziegler-Nichols tuning of the speed controller");
  pid_cmd->add_option("--config", pid.config, "Run config file (JSON)");
  pid_cmd->add_option("--set", pid.overrides, "Override a config field, e.g. env.drivetrain_delay_steps=3");
  pid_cmd->add_option("--seconds", pid.seconds, "Length of the closed-loop check")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a discrete SAC agent");
  train_cmd->add_option("--config", tr.config, "Run config file (JSON); defaults apply when omitted");
  train_cmd->add_option("--out", tr.out, "Output directory for metrics and checkpoints")->required();
  train_cmd->add_option("--set", tr.overrides, "Override a config field, e.g. sac.lr=1e-3 (repeatable)");
  train_cmd->add_option("--seed", tr.seed, "Seed (overrides train.seed)");
  train_cmd->add_option("--threads", tr.threads, "Worker threads (0 = ARTIC_NAV_THREADS or hardware)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint's greedy policy");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Training checkpoint")->required();
  eval_cmd->add_option("--scenarios", ev.scenarios,
                       "Directory of scenario files (default: the 20 m and 40 m test roundabouts)");
  eval_cmd->add_option("--config", ev.config, "Run config file for env settings and scenarios");
  eval_cmd->add_option("--set", ev.overrides, "Override a config field (repeatable)");
  eval_cmd->add_option("--episodes", ev.episodes, "Episodes per route")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ev.seed, "Evaluation seed")->capture_default_str();
  eval_cmd->add_option("--threads", ev.threads, "Threads")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--traces", ev.traces, "Trace export")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "csv", "svg", "both"}));
  eval_cmd->add_option("--deviation", ev.deviation, "Override a route's deviation flag: <scenario>#<route>=0|1");
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();

  ReplayArgs rp;
  auto* replay_cmd = app.add_subcommand("replay", "Render a trace CSV as SVG");
  replay_cmd->add_option("--trace", rp.trace, "Trace CSV")->required();
  replay_cmd->add_option("--scenario", rp.scenario, "Scenario file (default: generated roundabout)");
  replay_cmd->add_option("--diameter", rp.diameter, "Diameter when generating")->capture_default_str();
  replay_cmd->add_option("--entries", rp.entries, "Arms when generating")->capture_default_str();
  replay_cmd->add_option("--spacing", rp.spacing, "Waypoint spacing when generating")->capture_default_str();
  replay_cmd->add_option("-o,--output", rp.output, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "usage-error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) return scenario_gen(gen);
    if (*ins_cmd) return inspect_obs(ins);
    if (*pid_cmd) return pid_tune(pid);
    if (*train_cmd) return train(tr);
    if (*eval_cmd) return eval(ev);
    if (*replay_cmd) return replay(rp);
  } catch (const UsageError& e) {
    std::cerr << "usage-error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << to_string(e.category()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace articnav::cli
