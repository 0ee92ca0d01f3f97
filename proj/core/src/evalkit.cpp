#include "articnav/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "articnav/error.hpp"
#include "articnav/sacd.hpp"

namespace articnav {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

TraceRow row_from(const RoundaboutEnv& env) {
  const auto& s = env.state();
  const Point2 c = truck_center(s, env.config().vehicle);
  TraceRow r;
  r.t = static_cast<double>(env.steps()) * env.config().dt;
  r.x = c.x;
  r.y = c.y;
  r.heading = s.truck.heading;
  r.trailer_heading = s.trailer_heading;
  r.speed = s.speed;
  return r;
}

double episode_mean_distance(const EpisodeTrace& t) {
  if (t.rows.empty()) return t.start.distance_to_center;
  double sum = 0.0;
  for (const auto& r : t.rows) sum += r.distance_to_center;
  return sum / static_cast<double>(t.rows.size());
}

std::map<FailureCause, std::size_t> empty_outcomes() {
  std::map<FailureCause, std::size_t> m;
  for (auto c : {FailureCause::none, FailureCause::truck_kerb, FailureCause::trailer_kerb, FailureCause::divergence,
                 FailureCause::timeout}) {
    m[c] = 0;
  }
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

[[noreturn]] void trace_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCategory::parse, "trace line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  trace_error(line, "bad number '" + s + "'");
}

std::uint64_t to_uint(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  trace_error(line, "bad integer '" + s + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

constexpr const char* kTraceColumns = "t,x,y,heading,trailer_heading,speed,action,reward,distance_to_center";

}  // namespace

Policy greedy_policy(Mlp policy) {
  return [net = std::move(policy)](const std::vector<float>& obs, const RoundaboutEnv&) {
    std::mt19937_64 unused(0);
    return SacAgent::select_action(net, obs, 0.0, ActionMode::eval, unused);
  };
}

Mlp load_policy(const std::filesystem::path& checkpoint) {
  const Checkpoint ckpt = load_checkpoint(checkpoint, kObservationLayoutVersion);
  const auto it = ckpt.networks.find("policy");
  if (it == ckpt.networks.end()) {
    throw Error(ErrorCategory::corrupt_file, "checkpoint " + checkpoint.string() + " has no policy network");
  }
  if (it->second.input_size() != kObservationSize || it->second.output_size() != kSteeringActions.size()) {
    throw Error(ErrorCategory::layout_mismatch, "checkpoint policy does not match the observation/action layout");
  }
  return it->second;
}

double critical_radius(const VehicleSpec& vehicle) {
  return vehicle.trailer_length / std::sin(kMaxComfortableArticulation);
}

bool requires_deviation(const WaypointRoute& route, const VehicleSpec& vehicle) {
  const auto pts = route.positions();
  if (pts.size() < 3) return false;
  const double spacing = route.polyline_length() / static_cast<double>(pts.size() - 1);
  const auto step = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(vehicle.trailer_length / (2.0 * spacing))));
  const double r_crit = critical_radius(vehicle);
  for (std::size_t i = 0; i + 2 * step < pts.size(); ++i) {
    const auto c = fit_circle_from_chords(std::span<const Point2>(pts).subspan(i, 2 * step + 1), step);
    if (!c.is_straight() && c.radius < r_crit) return true;
  }
  return false;
}

EpisodeTrace run_episode(RoundaboutEnv& env, std::size_t task, std::uint64_t seed, const Policy& policy) {
  EpisodeTrace trace;
  std::vector<float> obs = env.reset(task, seed);
  trace.scenario = env.task(task).scenario->name;
  trace.route_id = env.task(task).route_id;
  trace.seed = seed;
  trace.start = row_from(env);
  trace.start.distance_to_center = distance_to_route(Point2{trace.start.x, trace.start.y}, env.route());
  while (!env.done()) {
    const std::size_t action = policy(obs, env);
    StepResult r = env.step(action);
    TraceRow row = row_from(env);
    row.action = action;
    row.reward = r.reward;
    row.distance_to_center = r.info.distance_to_center;
    trace.rows.push_back(row);
    trace.total_reward += r.reward;
    obs = std::move(r.observation);
    if (r.done) {
      trace.success = r.info.success;
      trace.failure_cause = r.info.failure_cause;
    }
  }
  trace.steps = trace.rows.size();
  return trace;
}

EvalResult evaluate(const std::vector<RouteTask>& tasks, const EnvConfig& config, const Policy& policy,
                    const EvalOptions& options) {
  if (tasks.empty()) throw Error(ErrorCategory::invalid_argument, "no routes to evaluate");
  const std::size_t n_routes = tasks.size();
  const std::size_t eps = options.episodes_per_route;
  std::vector<EpisodeTrace> traces(n_routes * eps);

  auto work = [&](std::size_t thread, std::size_t stride) {
    RoundaboutEnv env(tasks, config);
    for (std::size_t r = thread; r < n_routes; r += stride) {
      for (std::size_t e = 0; e < eps; ++e) {
        std::seed_seq seq{options.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(e)};
        std::array<std::uint32_t, 2> words{};
        seq.generate(words.begin(), words.end());
        const std::uint64_t seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
        traces[r * eps + e] = run_episode(env, r, seed, policy);
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, n_routes);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalResult result;
  EvalReport& rep = result.report;
  rep.outcomes = empty_outcomes();
  double distance_sum = 0.0;
  for (std::size_t r = 0; r < n_routes; ++r) {
    const auto& task = tasks[r];
    const auto& route = task.scenario->routes.at(task.route_id);
    RouteReport rr;
    rr.scenario = task.scenario->name;
    rr.route_id = task.route_id;
    rr.entry_index = route.entry_index;
    rr.exit_index = route.exit_index;
    const auto key = rr.scenario + "#" + std::to_string(rr.route_id);
    const auto ov = options.deviation_overrides.find(key);
    rr.requires_deviation =
        ov != options.deviation_overrides.end() ? ov->second : requires_deviation(route, config.vehicle);
    rr.outcomes = empty_outcomes();
    double dist = 0.0, reward = 0.0;
    for (std::size_t e = 0; e < eps; ++e) {
      const auto& t = traces[r * eps + e];
      ++rr.episodes;
      rr.successes += t.success ? 1 : 0;
      ++rr.outcomes[t.failure_cause];
      ++rep.outcomes[t.failure_cause];
      const double d = episode_mean_distance(t);
      dist += d;
      reward += t.total_reward;
      if (!rr.requires_deviation) {
        distance_sum += d;
        ++rep.distance_episodes;
      }
    }
    if (rr.episodes) {
      rr.success_rate = static_cast<double>(rr.successes) / static_cast<double>(rr.episodes);
      rr.mean_distance_to_center = dist / static_cast<double>(rr.episodes);
      rr.mean_reward = reward / static_cast<double>(rr.episodes);
    }
    rep.episodes += rr.episodes;
    rep.successes += rr.successes;
    rep.routes.push_back(std::move(rr));
  }
  rep.success_rate = rep.episodes ? static_cast<double>(rep.successes) / static_cast<double>(rep.episodes) : 0.0;
  rep.mean_distance_to_center = rep.distance_episodes
                                    ? distance_sum / static_cast<double>(rep.distance_episodes)
                                    : std::numeric_limits<double>::quiet_NaN();
  if (options.keep_traces) result.traces = std::move(traces);
  return result;
}

std::string report_to_json(const EvalReport& report) {
  auto outcomes = [](const std::map<FailureCause, std::size_t>& m) {
    json o = json::object();
    for (const auto& [k, v] : m) o[std::string(to_string(k))] = v;
    return o;
  };
  json j;
  j["episodes"] = report.episodes;
  j["successes"] = report.successes;
  j["success_rate"] = report.success_rate;
  j["outcomes"] = outcomes(report.outcomes);
  j["mean_distance_to_center"] =
      std::isnan(report.mean_distance_to_center) ? json(nullptr) : json(report.mean_distance_to_center);
  j["distance_episodes"] = report.distance_episodes;
  j["routes"] = json::array();
  for (const auto& r : report.routes) {
    j["routes"].push_back({{"scenario", r.scenario},
                           {"route", r.route_id},
                           {"entry", r.entry_index},
                           {"exit", r.exit_index},
                           {"requires_deviation", r.requires_deviation},
                           {"episodes", r.episodes},
                           {"successes", r.successes},
                           {"success_rate", r.success_rate},
                           {"outcomes", outcomes(r.outcomes)},
                           {"mean_distance_to_center", r.mean_distance_to_center},
                           {"mean_reward", r.mean_reward}});
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string s =
      "scenario,route,entry,exit,requires_deviation,episodes,successes,success_rate,none,truck_kerb,"
      "trailer_kerb,divergence,timeout,mean_distance_to_center,mean_reward\n";
  auto outcome_cols = [](const std::map<FailureCause, std::size_t>& m) {
    std::string c;
    for (auto k : {FailureCause::none, FailureCause::truck_kerb, FailureCause::trailer_kerb, FailureCause::divergence,
                   FailureCause::timeout}) {
      const auto it = m.find(k);
      c += "," + std::to_string(it == m.end() ? 0 : it->second);
    }
    return c;
  };
  for (const auto& r : report.routes) {
    s += r.scenario + "," + std::to_string(r.route_id) + "," + std::to_string(r.entry_index) + "," +
         std::to_string(r.exit_index) + "," + (r.requires_deviation ? "1" : "0") + "," + std::to_string(r.episodes) +
         "," + std::to_string(r.successes) + "," + num(r.success_rate) + outcome_cols(r.outcomes) + "," +
         num(r.mean_distance_to_center) + "," + num(r.mean_reward) + "\n";
  }
  s += "all,,,,," + std::to_string(report.episodes) + "," + std::to_string(report.successes) + "," +
       num(report.success_rate) + outcome_cols(report.outcomes) + "," +
       (std::isnan(report.mean_distance_to_center) ? std::string() : num(report.mean_distance_to_center)) + ",\n";
  return s;
}

std::string trace_to_csv(const EpisodeTrace& t) {
  std::string s = "# format=articnav-trace,version=1\n";
  s += "# scenario=" + t.scenario + "\n";
  s += "# route=" + std::to_string(t.route_id) + ",seed=" + std::to_string(t.seed) + "\n";
  s += "# start=" + num(t.start.x) + ";" + num(t.start.y) + ";" + num(t.start.heading) + ";" +
       num(t.start.trailer_heading) + ";" + num(t.start.speed) + ";" + num(t.start.distance_to_center) + "\n";
  s += std::string(kTraceColumns) + "\n";
  for (const auto& r : t.rows) {
    s += num(r.t) + "," + num(r.x) + "," + num(r.y) + "," + num(r.heading) + "," + num(r.trailer_heading) + "," +
         num(r.speed) + "," + std::to_string(r.action) + "," + num(r.reward) + "," + num(r.distance_to_center) + "\n";
  }
  s += "# end=success:" + std::string(t.success ? "1" : "0") + ";failure_cause:" +
       std::string(to_string(t.failure_cause)) + ";total_reward:" + num(t.total_reward) +
       ";steps:" + std::to_string(t.steps) + "\n";
  return s;
}

EpisodeTrace parse_trace_csv(const std::string& text) {
  EpisodeTrace t;
  std::stringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool header = false, end = false, format = false, start = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (end) trace_error(n, "content after the end record");
    if (line.rfind("# ", 0) == 0) {
      const std::string body = line.substr(2);
      if (body.rfind("format=", 0) == 0) {
        if (body != "format=articnav-trace,version=1") trace_error(n, "unsupported trace format");
        format = true;
      } else if (body.rfind("scenario=", 0) == 0) {
        t.scenario = body.substr(9);
      } else if (body.rfind("route=", 0) == 0) {
        const auto parts = split(body, ',');
        if (parts.size() != 2 || parts[1].rfind("seed=", 0) != 0) trace_error(n, "bad route line");
        t.route_id = to_uint(parts[0].substr(6), n);
        t.seed = to_uint(parts[1].substr(5), n);
      } else if (body.rfind("start=", 0) == 0) {
        const auto v = split(body.substr(6), ';');
        if (v.size() != 6) trace_error(n, "bad start pose");
        t.start.x = to_double(v[0], n);
        t.start.y = to_double(v[1], n);
        t.start.heading = to_double(v[2], n);
        t.start.trailer_heading = to_double(v[3], n);
        t.start.speed = to_double(v[4], n);
        t.start.distance_to_center = to_double(v[5], n);
        start = true;
      } else if (body.rfind("end=", 0) == 0) {
        const auto v = split(body.substr(4), ';');
        if (v.size() != 4) trace_error(n, "bad end record");
        auto value = [&](const std::string& kv, const std::string& key) {
          if (kv.rfind(key + ":", 0) != 0) trace_error(n, "expected " + key);
          return kv.substr(key.size() + 1);
        };
        t.success = value(v[0], "success") == "1";
        try {
          t.failure_cause = failure_cause_from_string(value(v[1], "failure_cause"));
        } catch (const Error&) {
          trace_error(n, "bad failure cause");
        }
        t.total_reward = to_double(value(v[2], "total_reward"), n);
        t.steps = to_uint(value(v[3], "steps"), n);
        end = true;
      } else {
        trace_error(n, "unknown metadata line");
      }
      continue;
    }
    if (!header) {
      if (line != kTraceColumns) trace_error(n, "unexpected column header");
      header = true;
      continue;
    }
    const auto c = split(line, ',');
    if (c.size() != 9) trace_error(n, "expected 9 columns");
    TraceRow r;
    r.t = to_double(c[0], n);
    r.x = to_double(c[1], n);
    r.y = to_double(c[2], n);
    r.heading = to_double(c[3], n);
    r.trailer_heading = to_double(c[4], n);
    r.speed = to_double(c[5], n);
    r.action = to_uint(c[6], n);
    r.reward = to_double(c[7], n);
    r.distance_to_center = to_double(c[8], n);
    if (!t.rows.empty() && !(r.t > t.rows.back().t)) trace_error(n, "rows must be strictly ordered in t");
    t.rows.push_back(r);
  }
  if (!format || !header || !start) trace_error(n, "missing header lines");
  if (!end) trace_error(n, "missing end record");
  if (t.steps != t.rows.size()) trace_error(n, "step count does not match the rows");
  return t;
}

void export_trace_csv(const EpisodeTrace& trace, const std::filesystem::path& path) {
  write_text(path, trace_to_csv(trace));
}

EpisodeTrace load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::file_not_found, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(ss.str());
}

std::string trace_to_svg(const EpisodeTrace& trace, const Scenario& scenario) {
  constexpr double kScale = 10.0;
  constexpr double kMargin = 5.0;
  double min_x = trace.start.x, max_x = trace.start.x, min_y = trace.start.y, max_y = trace.start.y;
  auto grow = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& b : scenario.boundaries) {
    for (const auto& p : b.points()) grow(p.x, p.y);
  }
  for (const auto& r : trace.rows) grow(r.x, r.y);
  min_x -= kMargin;
  min_y -= kMargin;
  max_x += kMargin;
  max_y += kMargin;
  auto sx = [&](double x) { return px((x - min_x) * kScale); };
  auto sy = [&](double y) { return px((max_y - y) * kScale); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px((max_x - min_x) * kScale) +
                  "\" height=\"" + px((max_y - min_y) * kScale) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<g id=\"kerbs\" fill=\"none\" stroke=\"#555555\" stroke-width=\"2\">\n";
  for (const auto& b : scenario.boundaries) {
    s += b.closed() ? "<polygon points=\"" : "<polyline points=\"";
    for (const auto& p : b.points()) s += sx(p.x) + "," + sy(p.y) + " ";
    s += "\"/>\n";
  }
  s += "</g>\n";
  if (trace.route_id < scenario.routes.size()) {
    s += "<g id=\"route\" fill=\"#2ca02c\">\n";
    for (const auto& w : scenario.routes[trace.route_id].waypoints) {
      s += "<circle cx=\"" + sx(w.position.x) + "\" cy=\"" + sy(w.position.y) + "\" r=\"2\"/>\n";
    }
    s += "</g>\n";
  }
  s += "<g id=\"path\" fill=\"#f2c200\">\n";
  for (const auto& r : trace.rows) {
    s += "<circle cx=\"" + sx(r.x) + "\" cy=\"" + sy(r.y) + "\" r=\"1.5\"/>\n";
  }
  s += "</g>\n";
  s += "<circle id=\"start\" cx=\"" + sx(trace.start.x) + "\" cy=\"" + sy(trace.start.y) +
       "\" r=\"6\" fill=\"#d62728\"/>\n";
  const TraceRow& last = trace.rows.empty() ? trace.start : trace.rows.back();
  // Triangle pointing along the final heading.
  const double h = last.heading;
  const Point2 tip{last.x + 1.2 * std::cos(h), last.y + 1.2 * std::sin(h)};
  const Point2 left{last.x - 0.8 * std::cos(h) - 0.8 * std::sin(h), last.y - 0.8 * std::sin(h) + 0.8 * std::cos(h)};
  const Point2 right{last.x - 0.8 * std::cos(h) + 0.8 * std::sin(h), last.y - 0.8 * std::sin(h) - 0.8 * std::cos(h)};
  s += "<polygon id=\"end\" points=\"" + sx(tip.x) + "," + sy(tip.y) + " " + sx(left.x) + "," + sy(left.y) + " " +
       sx(right.x) + "," + sy(right.y) + "\" fill=\"#d62728\"/>\n";
  s += "</svg>\n";
  return s;
}

void export_trace_svg(const EpisodeTrace& trace, const Scenario& scenario, const std::filesystem::path& path) {
  write_text(path, trace_to_svg(trace, scenario));
}

}  // namespace articnav
