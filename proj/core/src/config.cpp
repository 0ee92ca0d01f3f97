#include "articnav/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "articnav/error.hpp"

namespace articnav {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCategory::parse, "config field '" + path + "': " + what);
}

void read_value(const json& j, double& out, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  out = j.get<double>();
}
void read_value(const json& j, bool& out, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  out = j.get<bool>();
}
void read_value(const json& j, int& out, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  out = j.get<int>();
}
template <class T>
  requires std::is_unsigned_v<T>
void read_value(const json& j, T& out, const std::string& path) {
  // Large step counts are commonly written as 1.5e6.
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (d >= 0.0 && std::floor(d) == d && d < 1.8e19) {
      out = static_cast<T>(d);
      return;
    }
  }
  if (!j.is_number_unsigned()) {
    fail(path, "expected a non-negative integer");
  }
  out = j.get<T>();
}
void read_value(const json& j, std::string& out, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  out = j.get<std::string>();
}
void read_value(const json& j, std::filesystem::path& out, const std::string& path) {
  std::string s;
  read_value(j, s, path);
  out = s;
}
void read_value(const json& j, AlphaMode& out, const std::string& path) {
  std::string s;
  read_value(j, s, path);
  try {
    out = alpha_mode_from_string(s);
  } catch (const Error&) {
    fail(path, "expected one of fixed, auto, anneal");
  }
}
void read_value(const json& j, ScenarioSource& out, const std::string& path);
template <class T>
void read_value(const json& j, std::vector<T>& out, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    read_value(j[i], v, path + "[" + std::to_string(i) + "]");
    out.push_back(std::move(v));
  }
}
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1), "expected an object");
  }

  template <class T>
  void operator()(const char* key, T& into) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    read_value(j_.at(key), into, path_ + key);
  }

  template <class F>
  void section(const char* key, F&& f) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Reader sub(j_.at(key), path_ + key + ".");
    f(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(path_ + item.key(), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json write_value(double v) { return v; }
json write_value(bool v) { return v; }
json write_value(int v) { return v; }
template <class T>
  requires std::is_unsigned_v<T>
json write_value(T v) {
  return v;
}
json write_value(const std::filesystem::path& v) { return v.string(); }
json write_value(AlphaMode v) { return std::string(to_string(v)); }
json write_value(ScenarioSource& s);
template <class T>
json write_value(std::vector<T>& v) {
  json a = json::array();
  for (auto& x : v) a.push_back(write_value(x));
  return a;
}

class Writer {
 public:
  template <class T>
  void operator()(const char* key, T& value) {
    j[key] = write_value(value);
  }
  template <class F>
  void section(const char* key, F&& f) {
    Writer sub;
    f(sub);
    j[key] = std::move(sub.j);
  }
  json j = json::object();
};

template <class V>
void visit_source(V& v, ScenarioSource& s) {
  v("file", s.file);
  v("diameter", s.diameter);
  v("arms", s.arms);
  v("rotation", s.rotation);
  v("routes", s.routes);
}

void read_value(const json& j, ScenarioSource& out, const std::string& path) {
  Reader r(j, path + ".");
  visit_source(r, out);
  r.finish();
}

json write_value(ScenarioSource& s) {
  Writer w;
  visit_source(w, s);
  if (s.file.empty()) {
    w.j.erase("file");
  } else {
    w.j.erase("diameter");
    w.j.erase("arms");
    w.j.erase("rotation");
  }
  return w.j;
}

template <class V>
void visit_run(V& v, RunConfig& c) {
  v("scenarios", c.scenarios);
  v("waypoint_spacing", c.waypoint_spacing);
  v.section("env", [&](auto& s) {
    EnvConfig& e = c.env;
    s("dt", e.dt);
    s("target_speed", e.target_speed);
    s("max_acceleration", e.max_acceleration);
    s.section("pid", [&](auto& p) {
      p("kp", e.pid.kp);
      p("ki", e.pid.ki);
      p("kd", e.pid.kd);
    });
    s("drivetrain_time_constant", e.drivetrain_time_constant);
    s("drivetrain_delay_steps", e.drivetrain_delay_steps);
    s("jitter", e.jitter);
    s("jitter_lateral", e.jitter_lateral);
    s("jitter_heading", e.jitter_heading);
    s("divergence_distance", e.divergence_distance);
    s("timeout_factor", e.timeout_factor);
    s("waypoint_reward", e.waypoint_reward);
    s("failure_reward", e.failure_reward);
  });
  v.section("vehicle", [&](auto& s) {
    VehicleSpec& k = c.env.vehicle;
    s("truck_wheelbase", k.truck_wheelbase);
    s("truck_length", k.truck_length);
    s("truck_width", k.truck_width);
    s("truck_rear_overhang", k.truck_rear_overhang);
    s("trailer_length", k.trailer_length);
    s("trailer_body_length", k.trailer_body_length);
    s("trailer_width", k.trailer_width);
    s("trailer_front_overhang", k.trailer_front_overhang);
    s("hitch_offset", k.hitch_offset);
    s("max_wheel_angle", k.max_wheel_angle);
    s("jackknife_limit", k.jackknife_limit);
  });
  v.section("features", [&](auto& s) {
    FeatureConfig& f = c.env.features;
    s("ray_max_range", f.ray_max_range);
    s("radius_max", f.radius_max);
    s("speed_norm", f.speed_norm);
    s("waypoint_distance_norm", f.waypoint_distance_norm);
    s("chord_step", f.chord_step);
    s("pass_radius", f.pass_radius);
  });
  v.section("sac", [&](auto& s) {
    SacConfig& a = c.train.sac;
    s("gamma", a.gamma);
    s("n_step", a.n_step);
    s("batch_size", a.batch_size);
    s("buffer_capacity", a.buffer_capacity);
    s("twin_q", a.twin_q);
    s("epsilon_initial", a.epsilon_initial);
    s("epsilon_final", a.epsilon_final);
    s("epsilon_timesteps", a.epsilon_timesteps);
    s("q_hidden", a.q_hidden);
    s("policy_hidden", a.policy_hidden);
    s("lr", a.lr);
    s("tau", a.tau);
    s("target_update_interval", a.target_update_interval);
    s("alpha_mode", a.alpha_mode);
    s("alpha_initial", a.alpha_initial);
    s("alpha_final", a.alpha_final);
    s("alpha_anneal_updates", a.alpha_anneal_updates);
    s("alpha_lr", a.alpha_lr);
    s("target_entropy_ratio", a.target_entropy_ratio);
    s("priority_alpha", a.priority_alpha);
    s("priority_beta_initial", a.priority_beta_initial);
    s("priority_beta_final", a.priority_beta_final);
    s("priority_epsilon", a.priority_epsilon);
    s("workers", a.workers);
    s("total_steps", a.total_steps);
    s("warmup_steps", a.warmup_steps);
    s("updates_per_step", a.updates_per_step);
  });
  v.section("train", [&](auto& s) {
    TrainConfig& t = c.train;
    s("seed", t.seed);
    s("checkpoint_interval", t.checkpoint_interval);
    s("metrics_window", t.metrics_window);
    s("log_every", t.log_every);
    s("threads", t.threads);
  });
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  visit_run(r, c);
  r.finish();
  c.env.validate();
  c.train.validate();
  if (!(c.waypoint_spacing > 0.0)) fail("waypoint_spacing", "must be > 0");
  return c;
}

json to_json(const RunConfig& config) {
  RunConfig copy = config;
  Writer w;
  visit_run(w, copy);
  return w.j;
}

}  // namespace

std::vector<ScenarioSource> RunConfig::training_scenarios() {
  return {{{}, 16.0, 4, 0.0, {}}, {{}, 32.0, 4, 0.0, {}}, {{}, 50.0, 4, 0.0, {}}};
}

std::vector<ScenarioSource> RunConfig::testing_scenarios() {
  return {{{}, 20.0, 4, 0.0, {}}, {{}, 40.0, 3, 0.0, {}}};
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i + 1 < std::min<std::size_t>(e.byte, text.size() + 1); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw Error(ErrorCategory::parse, "config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  return from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::file_not_found, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& config) { return to_json(config).dump(2); }

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCategory::parse, "override '" + std::string(assignment) + "': expected key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json root = to_json(config);
  json* node = &root;
  std::stringstream ss(key);
  std::string part;
  std::string walked;
  while (std::getline(ss, part, '.')) {
    walked += (walked.empty() ? "" : ".") + part;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        fail(walked, "expected an array index");
      }
      if (idx >= node->size()) fail(walked, "index out of range");
      node = &(*node)[idx];
    } else if (node->is_object() && node->contains(part)) {
      node = &(*node)[part];
    } else {
      fail(walked, "unknown field");
    }
  }
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  *node = std::move(value);
  config = from_json(root);
}

std::vector<RouteTask> build_tasks(const std::vector<ScenarioSource>& sources, double waypoint_spacing,
                                   const std::filesystem::path& base_dir) {
  std::vector<RouteTask> tasks;
  for (const auto& src : sources) {
    std::shared_ptr<const Scenario> sc;
    if (src.file.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "roundabout_%gm_%darm", src.diameter, src.arms);
      sc = std::make_shared<const Scenario>(
          generate_roundabout(make_roundabout_spec(src.diameter, src.arms, src.rotation), waypoint_spacing, name));
    } else {
      const auto path = src.file.is_relative() && !base_dir.empty() ? base_dir / src.file : src.file;
      sc = std::make_shared<const Scenario>(load_scenario(path));
    }
    if (src.routes.empty()) {
      for (std::size_t r = 0; r < sc->routes.size(); ++r) tasks.push_back({sc, r});
    } else {
      for (auto r : src.routes) {
        if (r >= sc->routes.size()) {
          throw Error(ErrorCategory::invalid_argument, "scenario '" + sc->name + "' has no route " + std::to_string(r));
        }
        tasks.push_back({sc, r});
      }
    }
  }
  if (tasks.empty()) throw Error(ErrorCategory::invalid_argument, "no scenarios configured");
  return tasks;
}

}  // namespace articnav
