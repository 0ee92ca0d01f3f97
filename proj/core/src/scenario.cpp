#include "articnav/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "articnav/error.hpp"

namespace articnav {

namespace {

using nlohmann::json;

struct LinePiece {
  Point2 a, b;
};
struct ArcPiece {
  Point2 center;
  double radius;
  double start;  // polar angle of the start point about center
  double sweep;  // signed; negative is clockwise
};
using Piece = std::variant<LinePiece, ArcPiece>;

double piece_length(const Piece& p) {
  if (const auto* l = std::get_if<LinePiece>(&p)) return distance(l->a, l->b);
  const auto& a = std::get<ArcPiece>(p);
  return a.radius * std::abs(a.sweep);
}

Point2 piece_point(const Piece& p, double s) {
  if (const auto* l = std::get_if<LinePiece>(&p)) {
    const double len = distance(l->a, l->b);
    return l->a + (l->b - l->a) * (s / len);
  }
  const auto& a = std::get<ArcPiece>(p);
  const double phi = a.start + std::copysign(s / a.radius, a.sweep);
  return a.center + Vec2{std::cos(phi), std::sin(phi)} * a.radius;
}

UnitVec2 piece_tangent(const Piece& p, double s) {
  if (const auto* l = std::get_if<LinePiece>(&p)) {
    return *UnitVec2::normalized(l->b - l->a);
  }
  const auto& a = std::get<ArcPiece>(p);
  const double phi = a.start + std::copysign(s / a.radius, a.sweep);
  const Vec2 radial{std::cos(phi), std::sin(phi)};
  return *UnitVec2::normalized(a.sweep >= 0 ? perp(radial) : -perp(radial));
}

// Arc-length parameterised chain of lines and arcs.
class Path {
 public:
  void add(Piece p) {
    const double len = piece_length(p);
    if (len <= 0.0) return;
    starts_.push_back(total_);
    total_ += len;
    pieces_.push_back(std::move(p));
  }
  double length() const { return total_; }

  Point2 at(double s) const {
    const auto [i, local] = locate(s);
    return piece_point(pieces_[i], local);
  }
  UnitVec2 tangent(double s) const {
    const auto [i, local] = locate(s);
    return piece_tangent(pieces_[i], local);
  }

 private:
  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, total_);
    auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
    std::size_t i = static_cast<std::size_t>(it - starts_.begin()) - 1;
    return {i, std::min(s - starts_[i], piece_length(pieces_[i]))};
  }

  std::vector<Piece> pieces_;
  std::vector<double> starts_;
  double total_ = 0.0;
};

double wrap_positive(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0 ? a + 2.0 * kPi : a;
}

// Shared fillet construction for one roundabout.
struct ArmGeometry {
  double road_half_width;  // lanes * lane_width
  double fillet_offset;    // road_half_width + fillet_radius
  double fillet_x;         // fillet centre along the arm axis
  double tangent_angle;    // angular half-width of an arm opening on the ring
};

ArmGeometry arm_geometry(const RoundaboutSpec& spec) {
  ArmGeometry g{};
  g.road_half_width = spec.lanes_per_carriageway * spec.lane_width;
  g.fillet_offset = g.road_half_width + spec.fillet_radius;
  const double hyp = spec.ring_kerb_radius() + spec.fillet_radius;
  g.fillet_x = std::sqrt(hyp * hyp - g.fillet_offset * g.fillet_offset);
  g.tangent_angle = std::atan2(g.fillet_offset, g.fillet_x);
  return g;
}

Point2 arm_to_world(double theta, Vec2 local) { return rotate(local, theta); }

void append_point(std::vector<Point2>& pts, Point2 p) {
  if (pts.empty() || distance(pts.back(), p) > 1e-9) pts.push_back(p);
}

void append_arc(std::vector<Point2>& pts, Point2 center, double radius,
                double start, double sweep, double chord_error) {
  const double ratio = 1.0 - chord_error / radius;
  const double max_step = ratio <= 0.0 ? kPi / 2.0 : 2.0 * std::acos(ratio);
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(sweep) / max_step)));
  for (int k = 0; k <= n; ++k) {
    const double phi = start + sweep * k / n;
    append_point(pts, center + Vec2{std::cos(phi), std::sin(phi)} * radius);
  }
}

void validate_spec(const RoundaboutSpec& spec) {
  auto fail = [](const std::string& m) {
    throw Error(ErrorCategory::invalid_argument, "roundabout spec: " + m);
  };
  if (!(spec.diameter > 0.0)) fail("diameter must be > 0");
  if (!(spec.lane_width > 0.0)) fail("lane_width must be > 0");
  if (spec.lanes_per_carriageway < 1 || spec.lanes_per_carriageway > 4) {
    fail("lanes_per_carriageway must be in [1, 4]");
  }
  if (!(spec.fillet_radius > 0.0)) fail("fillet_radius must be > 0");
  if (!(spec.kerb_chord_error > 0.0) || spec.kerb_chord_error > 0.25) {
    fail("kerb_chord_error must be in (0, 0.25]");
  }
  if (spec.entries.size() < 2 || spec.entries.size() > 8) {
    fail("need between 2 and 8 entries");
  }
  for (const auto& e : spec.entries) {
    if (!(e.approach_length > 0.0)) fail("approach_length must be > 0");
    if (!std::isfinite(e.angle)) fail("entry angle must be finite");
  }
  if (spec.ring_kerb_radius() <= spec.lanes_per_carriageway * spec.lane_width) {
    fail("central island too small for the approach road width");
  }
}

// Entry indices sorted counterclockwise by angle.
std::vector<int> ccw_order(const RoundaboutSpec& spec) {
  std::vector<int> order(spec.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return wrap_positive(spec.entries[a].angle) < wrap_positive(spec.entries[b].angle);
  });
  return order;
}

std::vector<Polyline> build_boundaries(const RoundaboutSpec& spec) {
  const ArmGeometry g = arm_geometry(spec);
  const double rk = spec.ring_kerb_radius();
  const double rf = spec.fillet_radius;
  const double err = spec.kerb_chord_error;
  std::vector<Polyline> out;

  std::vector<Point2> island;
  append_arc(island, {0, 0}, spec.island_radius(), 0.0, 2.0 * kPi, err);
  island.pop_back();  // closing point equals the first
  out.emplace_back(std::move(island), true);

  const auto order = ccw_order(spec);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& ei = spec.entries[order[k]];
    const auto& ej = spec.entries[order[(k + 1) % order.size()]];
    const double ti = ei.angle;
    double gap = wrap_positive(ej.angle - ti);
    const double tj = ti + gap;
    std::vector<Point2> pts;
    append_point(pts, arm_to_world(ti, {rk + ei.approach_length, g.road_half_width}));
    append_point(pts, arm_to_world(ti, {g.fillet_x, g.road_half_width}));
    append_arc(pts, arm_to_world(ti, {g.fillet_x, g.fillet_offset}), rf,
               ti - kPi / 2.0, -(kPi / 2.0 - g.tangent_angle), err);
    append_arc(pts, {0, 0}, rk, ti + g.tangent_angle, gap - 2.0 * g.tangent_angle, err);
    append_arc(pts, arm_to_world(tj, {g.fillet_x, -g.fillet_offset}), rf,
               tj + kPi - g.tangent_angle, -(kPi / 2.0 - g.tangent_angle), err);
    append_point(pts, arm_to_world(tj, {ej.approach_length + rk, -g.road_half_width}));
    out.emplace_back(std::move(pts), false);
  }
  return out;
}

Path route_path(const RoundaboutSpec& spec, int entry, int exit, int lane) {
  const ArmGeometry g = arm_geometry(spec);
  const double rk = spec.ring_kerb_radius();
  const double offset = (lane + 0.5) * spec.lane_width;
  const double fillet = g.fillet_offset - offset;
  const double ring = spec.ring_lane_radius(lane);
  const auto& ee = spec.entries[entry];
  const auto& ex = spec.entries[exit];
  const double te = ee.angle;
  const double sweep = wrap_positive(ex.angle - te);
  const double tx = te + sweep;

  Path path;
  path.add(LinePiece{arm_to_world(te, {rk + ee.approach_length, offset}),
                     arm_to_world(te, {g.fillet_x, offset})});
  path.add(ArcPiece{arm_to_world(te, {g.fillet_x, g.fillet_offset}), fillet,
                    te - kPi / 2.0, -(kPi / 2.0 - g.tangent_angle)});
  path.add(ArcPiece{{0, 0}, ring, te + g.tangent_angle, sweep - 2.0 * g.tangent_angle});
  path.add(ArcPiece{arm_to_world(tx, {g.fillet_x, -g.fillet_offset}), fillet,
                    tx + kPi - g.tangent_angle, -(kPi / 2.0 - g.tangent_angle)});
  path.add(LinePiece{arm_to_world(tx, {g.fillet_x, -offset}),
                     arm_to_world(tx, {rk + ex.approach_length, -offset})});
  return path;
}

// Samples the path so consecutive waypoints are exactly `spacing` apart
// (Euclidean). Each forward vector points at the next waypoint.
std::vector<Waypoint> sample_waypoints(const Path& path, double spacing) {
  std::vector<Point2> pts{path.at(0.0)};
  double s = 0.0;
  while (true) {
    const Point2 prev = pts.back();
    double lo = s + spacing;
    if (lo > path.length()) break;
    double hi = std::min(path.length(), s + 2.0 * spacing);
    if (distance(prev, path.at(hi)) < spacing) break;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      (distance(prev, path.at(mid)) < spacing ? lo : hi) = mid;
    }
    // Place the point exactly at `spacing` along the prev->candidate chord.
    const Point2 cand = path.at(hi);
    const Vec2 dir = UnitVec2::normalized(cand - prev)->vec();
    pts.push_back(prev + dir * spacing);
    s = hi;
  }
  std::vector<Waypoint> wps;
  wps.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const UnitVec2 fwd = i + 1 < pts.size()
                             ? *UnitVec2::normalized(pts[i + 1] - pts[i])
                             : path.tangent(s);
    wps.push_back({pts[i], fwd});
  }
  return wps;
}

}  // namespace

RoundaboutSpec make_roundabout_spec(double diameter, int count, double rotation) {
  RoundaboutSpec spec;
  spec.diameter = diameter;
  for (int i = 0; i < count; ++i) {
    spec.entries.push_back({rotation + 2.0 * kPi * i / count, 40.0});
  }
  return spec;
}

std::vector<RoundaboutSpec> default_family() {
  return {make_roundabout_spec(16.0, 4), make_roundabout_spec(20.0, 4, kPi / 4.0),
          make_roundabout_spec(32.0, 4, kPi / 8.0), make_roundabout_spec(40.0, 3),
          make_roundabout_spec(50.0, 4, kPi / 6.0)};
}

double WaypointRoute::polyline_length() const {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    len += distance(waypoints[i].position, waypoints[i + 1].position);
  }
  return len;
}

std::vector<Point2> WaypointRoute::positions() const {
  std::vector<Point2> out;
  out.reserve(waypoints.size());
  for (const auto& w : waypoints) out.push_back(w.position);
  return out;
}

double analytic_route_length(const RoundaboutSpec& spec, int entry_index,
                             int exit_index, int lane) {
  const ArmGeometry g = arm_geometry(spec);
  const double rk = spec.ring_kerb_radius();
  const double fillet = g.fillet_offset - (lane + 0.5) * spec.lane_width;
  const double sweep =
      wrap_positive(spec.entries[exit_index].angle - spec.entries[entry_index].angle);
  return (rk + spec.entries[entry_index].approach_length - g.fillet_x) +
         (rk + spec.entries[exit_index].approach_length - g.fillet_x) +
         2.0 * fillet * (kPi / 2.0 - g.tangent_angle) +
         spec.ring_lane_radius(lane) * (sweep - 2.0 * g.tangent_angle);
}

Scenario generate_roundabout(const RoundaboutSpec& spec, double waypoint_spacing,
                             std::string name) {
  validate_spec(spec);
  if (!(waypoint_spacing > 0.0) || waypoint_spacing > 5.0) {
    throw Error(ErrorCategory::invalid_argument, "waypoint spacing must be in (0, 5]");
  }
  const ArmGeometry g = arm_geometry(spec);
  const auto order = ccw_order(spec);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double gap = wrap_positive(spec.entries[order[(k + 1) % order.size()]].angle -
                                     spec.entries[order[k]].angle);
    if (gap <= 1e-9) {
      throw Error(ErrorCategory::invalid_argument, "entry angles must be distinct");
    }
    if (gap <= 2.0 * g.tangent_angle + 1e-6) {
      throw Error(ErrorCategory::invalid_argument,
                  "approach roads of entries " + std::to_string(order[k]) + " and " +
                      std::to_string(order[(k + 1) % order.size()]) + " overlap");
    }
  }
  Scenario sc;
  sc.name = name.empty() ? "roundabout-" + std::to_string(static_cast<int>(spec.diameter)) + "m"
                         : std::move(name);
  sc.spec = spec;
  sc.waypoint_spacing = waypoint_spacing;
  sc.boundaries = build_boundaries(spec);
  sc.routes = enumerate_routes(sc);
  return sc;
}

std::vector<WaypointRoute> enumerate_routes(const Scenario& scenario) {
  const auto& spec = scenario.spec;
  const int n = static_cast<int>(spec.entries.size());
  const int outer = spec.lanes_per_carriageway - 1;
  const auto order = ccw_order(spec);
  std::vector<WaypointRoute> routes;
  for (int entry = 0; entry < n; ++entry) {
    const int pos = static_cast<int>(std::find(order.begin(), order.end(), entry) - order.begin());
    for (int j = 1; j < n; ++j) {
      const int exit = order[(pos + j) % n];
      const double sweep = wrap_positive(spec.entries[exit].angle - spec.entries[entry].angle);
      for (int lane = outer; lane >= 0; --lane) {
        if (lane != outer && sweep <= kPi / 2.0 + 1e-3) continue;
        WaypointRoute r;
        r.entry_index = entry;
        r.exit_index = exit;
        r.lane_sequence = {lane, lane, lane};
        r.waypoints = sample_waypoints(route_path(spec, entry, exit, lane),
                                       scenario.waypoint_spacing);
        routes.push_back(std::move(r));
      }
    }
  }
  return routes;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCategory::parse, "scenario field '" + field + "': " + what);
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) field_error(path + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    field_error(path + key, "wrong type");
  }
}

double get_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number()) {
    field_error(path + key, "missing or not a number");
  }
  return j.at(key).get<double>();
}

Point2 get_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    field_error(path, "expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string serialize_scenario(const Scenario& sc) {
  json j;
  j["format"] = "articnav-scenario";
  j["version"] = kScenarioFormatVersion;
  j["name"] = sc.name;
  j["waypoint_spacing"] = sc.waypoint_spacing;
  json spec;
  spec["diameter"] = sc.spec.diameter;
  spec["lane_width"] = sc.spec.lane_width;
  spec["lanes_per_carriageway"] = sc.spec.lanes_per_carriageway;
  spec["fillet_radius"] = sc.spec.fillet_radius;
  spec["kerb_chord_error"] = sc.spec.kerb_chord_error;
  spec["entries"] = json::array();
  for (const auto& e : sc.spec.entries) {
    spec["entries"].push_back({{"angle", e.angle}, {"approach_length", e.approach_length}});
  }
  j["spec"] = std::move(spec);
  j["boundaries"] = json::array();
  for (const auto& b : sc.boundaries) {
    json pts = json::array();
    for (const auto& p : b.points()) pts.push_back({p.x, p.y});
    j["boundaries"].push_back({{"closed", b.closed()}, {"points", std::move(pts)}});
  }
  j["routes"] = json::array();
  for (const auto& r : sc.routes) {
    json wps = json::array();
    for (const auto& w : r.waypoints) {
      wps.push_back({w.position.x, w.position.y, w.forward.x(), w.forward.y()});
    }
    j["routes"].push_back({{"entry_index", r.entry_index},
                           {"exit_index", r.exit_index},
                           {"lane_sequence", r.lane_sequence},
                           {"waypoints", std::move(wps)}});
  }
  return j.dump(1) + "\n";
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCategory::parse, "scenario parse error at line " + std::to_string(line) +
                                          ", column " + std::to_string(col) + ": " + e.what());
  }
  if (!j.is_object()) field_error("<root>", "expected an object");
  if (get_field<std::string>(j, "format", "") != "articnav-scenario") {
    field_error("format", "expected 'articnav-scenario'");
  }
  const int version = get_field<int>(j, "version", "");
  if (version != kScenarioFormatVersion) {
    throw Error(ErrorCategory::unsupported_version,
                "unsupported scenario version " + std::to_string(version) + " (expected " +
                    std::to_string(kScenarioFormatVersion) + ")");
  }
  Scenario sc;
  sc.name = get_field<std::string>(j, "name", "");
  sc.waypoint_spacing = get_number(j, "waypoint_spacing", "");
  if (!(sc.waypoint_spacing > 0.0)) field_error("waypoint_spacing", "must be > 0");

  if (!j.contains("spec")) field_error("spec", "missing");
  const json& js = j["spec"];
  sc.spec.diameter = get_number(js, "diameter", "spec.");
  sc.spec.lane_width = get_number(js, "lane_width", "spec.");
  sc.spec.lanes_per_carriageway = get_field<int>(js, "lanes_per_carriageway", "spec.");
  sc.spec.fillet_radius = get_number(js, "fillet_radius", "spec.");
  sc.spec.kerb_chord_error = get_number(js, "kerb_chord_error", "spec.");
  if (!(sc.spec.diameter > 0.0)) field_error("spec.diameter", "must be > 0");
  if (!(sc.spec.lane_width > 0.0)) field_error("spec.lane_width", "must be > 0");
  if (sc.spec.lanes_per_carriageway < 1) field_error("spec.lanes_per_carriageway", "must be >= 1");
  if (!js.contains("entries") || !js["entries"].is_array()) field_error("spec.entries", "missing");
  for (std::size_t i = 0; i < js["entries"].size(); ++i) {
    const std::string p = "spec.entries[" + std::to_string(i) + "].";
    const json& je = js["entries"][i];
    EntrySpec e{get_number(je, "angle", p), get_number(je, "approach_length", p)};
    if (!(e.approach_length > 0.0)) field_error(p + "approach_length", "must be > 0");
    sc.spec.entries.push_back(e);
  }

  if (!j.contains("boundaries") || !j["boundaries"].is_array()) field_error("boundaries", "missing");
  for (std::size_t i = 0; i < j["boundaries"].size(); ++i) {
    const std::string p = "boundaries[" + std::to_string(i) + "].";
    const json& jb = j["boundaries"][i];
    const bool closed = get_field<bool>(jb, "closed", p);
    if (!jb.contains("points") || !jb["points"].is_array()) field_error(p + "points", "missing");
    std::vector<Point2> pts;
    for (std::size_t k = 0; k < jb["points"].size(); ++k) {
      pts.push_back(get_point(jb["points"][k], p + "points[" + std::to_string(k) + "]"));
    }
    try {
      sc.boundaries.emplace_back(std::move(pts), closed);
    } catch (const Error& e) {
      field_error(p + "points", e.what());
    }
  }

  if (!j.contains("routes") || !j["routes"].is_array()) field_error("routes", "missing");
  for (std::size_t i = 0; i < j["routes"].size(); ++i) {
    const std::string p = "routes[" + std::to_string(i) + "].";
    const json& jr = j["routes"][i];
    WaypointRoute r;
    r.entry_index = get_field<int>(jr, "entry_index", p);
    r.exit_index = get_field<int>(jr, "exit_index", p);
    r.lane_sequence = get_field<std::vector<int>>(jr, "lane_sequence", p);
    if (!jr.contains("waypoints") || !jr["waypoints"].is_array() || jr["waypoints"].empty()) {
      field_error(p + "waypoints", "missing or empty");
    }
    for (std::size_t k = 0; k < jr["waypoints"].size(); ++k) {
      const std::string wp = p + "waypoints[" + std::to_string(k) + "]";
      const json& jw = jr["waypoints"][k];
      if (!jw.is_array() || jw.size() != 4) field_error(wp, "expected [x, y, fx, fy]");
      for (const auto& v : jw) {
        if (!v.is_number()) field_error(wp, "non-numeric entry");
      }
      const auto fwd = UnitVec2::from_components(jw[2].get<double>(), jw[3].get<double>());
      if (!fwd) field_error(wp, "forward vector is not unit length");
      r.waypoints.push_back({{jw[0].get<double>(), jw[1].get<double>()}, *fwd});
    }
    sc.routes.push_back(std::move(r));
  }
  return sc;
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << serialize_scenario(scenario);
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::file_not_found, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace articnav
