#include "articnav/geom2d.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "articnav/error.hpp"

namespace articnav {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_argument: return "invalid-argument";
    case ErrorCategory::malformed_route: return "malformed-route";
    case ErrorCategory::parse: return "parse-error";
    case ErrorCategory::unsupported_version: return "unsupported-version";
    case ErrorCategory::layout_mismatch: return "layout-mismatch";
    case ErrorCategory::corrupt_file: return "corrupt-file";
    case ErrorCategory::file_not_found: return "file-not-found";
    case ErrorCategory::io: return "io-error";
    case ErrorCategory::non_finite: return "non-finite";
    case ErrorCategory::episode_finished: return "episode-finished";
    case ErrorCategory::no_oscillation: return "no-oscillation";
    case ErrorCategory::empty_buffer: return "empty-buffer";
  }
  return "unknown";
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

std::optional<UnitVec2> UnitVec2::normalized(Vec2 v) {
  const double n = norm(v);
  if (!(n > 1e-12) || !std::isfinite(n)) return std::nullopt;
  return UnitVec2(v.x / n, v.y / n);
}

Polyline::Polyline(std::vector<Point2> points, bool closed)
    : points_(std::move(points)), closed_(closed) {
  if (points_.size() < 2) {
    throw Error(ErrorCategory::invalid_argument,
                "polyline needs at least 2 points");
  }
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    if (!(distance(points_[i], points_[i + 1]) > 1e-9)) {
      throw Error(ErrorCategory::invalid_argument,
                  "polyline has coincident consecutive points at index " +
                      std::to_string(i));
    }
  }
  if (closed_ && !(distance(points_.back(), points_.front()) > 1e-9)) {
    throw Error(ErrorCategory::invalid_argument,
                "closed polyline repeats its first point");
  }
}

double signed_angle(UnitVec2 a, UnitVec2 b) {
  const double angle = std::atan2(cross(a.vec(), b.vec()), dot(a.vec(), b.vec()));
  return angle <= -kPi ? kPi : angle;
}

std::optional<double> subtended_angle(Point2 end_a, Point2 center,
                                      Point2 end_b) {
  const auto u = UnitVec2::normalized(end_a - center);
  const auto v = UnitVec2::normalized(end_b - center);
  if (!u || !v) return std::nullopt;
  return std::abs(std::atan2(cross(u->vec(), v->vec()), dot(u->vec(), v->vec())));
}

std::optional<double> ray_segment_hit(Point2 origin, UnitVec2 direction,
                                      Point2 a, Point2 b) {
  const Vec2 d = direction.vec();
  const Vec2 e = b - a;
  const Vec2 w = a - origin;
  const double det = cross(d, e);
  if (std::abs(det) <= kDeterminantTolerance) {
    // Parallel. Only a collinear overlap can hit.
    if (std::abs(cross(w, d)) > 1e-9) return std::nullopt;
    const double ta = dot(a - origin, d);
    const double tb = dot(b - origin, d);
    if (ta < 0.0 && tb < 0.0) return std::nullopt;
    if (ta <= 0.0 || tb <= 0.0) return 0.0;  // origin on the segment
    return std::min(ta, tb);
  }
  const double t = cross(w, e) / det;
  const double u = cross(w, d) / det;
  constexpr double kEndpointSlack = 1e-12;
  if (t < 0.0 || u < -kEndpointSlack || u > 1.0 + kEndpointSlack) {
    return std::nullopt;
  }
  return t;
}

double raycast(Point2 origin, UnitVec2 direction,
               std::span<const Polyline> boundaries, double max_range) {
  double best = max_range;
  for (const Polyline& line : boundaries) {
    const auto& pts = line.points();
    const std::size_t n = line.segment_count();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 a = pts[i];
      const Point2 b = pts[(i + 1) % pts.size()];
      if (auto t = ray_segment_hit(origin, direction, a, b); t && *t < best) {
        best = *t;
      }
    }
  }
  return best;
}

CircleEstimate fit_circle_from_chords(std::span<const Point2> points,
                                      std::size_t chord_step) {
  if (chord_step == 0 || points.size() < 2 * chord_step + 1) {
    throw Error(ErrorCategory::invalid_argument,
                "circle fit needs at least 2*chord_step+1 points");
  }
  const Point2 p0 = points[0];
  const Point2 p1 = points[chord_step];
  const Point2 p2 = points[2 * chord_step];
  const auto c1 = UnitVec2::normalized(p1 - p0);
  const auto c2 = UnitVec2::normalized(p2 - p1);
  if (!c1 || !c2) {
    throw Error(ErrorCategory::malformed_route, "circle fit on coincident points");
  }
  // Bisector directions are the chord directions rotated by 90 degrees, so
  // the angle between bisectors equals the angle between chords.
  const double s = cross(c1->vec(), c2->vec());
  if (std::abs(s) < std::sin(kParallelBisectorTolerance)) {
    return CircleEstimate::make_straight();
  }
  const Point2 m1 = (p0 + p1) * 0.5;
  const Point2 m2 = (p1 + p2) * 0.5;
  const Vec2 n1 = perp(c1->vec());
  const Vec2 n2 = perp(c2->vec());
  // m1 + a n1 = m2 + b n2
  const double a = cross(m2 - m1, n2) / cross(n1, n2);
  const Point2 center = m1 + n1 * a;
  const double radius = distance(center, p1);
  if (!std::isfinite(radius) || !(radius > 0.0)) {
    return CircleEstimate::make_straight();
  }
  return CircleEstimate::make_finite(center, radius);
}

Point2 closest_point_on_segment(Point2 p, Point2 a, Point2 b) {
  const Vec2 e = b - a;
  const double len2 = dot(e, e);
  if (len2 <= 0.0) return a;
  const double t = std::clamp(dot(p - a, e) / len2, 0.0, 1.0);
  return a + e * t;
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  return distance(p, closest_point_on_segment(p, a, b));
}

namespace {
int orientation(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}
bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}
}  // namespace

bool segments_intersect(Point2 a0, Point2 a1, Point2 b0, Point2 b1) {
  const int o1 = orientation(a0, a1, b0);
  const int o2 = orientation(a0, a1, b1);
  const int o3 = orientation(b0, b1, a0);
  const int o4 = orientation(b0, b1, a1);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a0, a1, b0)) return true;
  if (o2 == 0 && on_segment(a0, a1, b1)) return true;
  if (o3 == 0 && on_segment(b0, b1, a0)) return true;
  if (o4 == 0 && on_segment(b0, b1, a1)) return true;
  return false;
}

std::array<Point2, 4> OrientedRect::corners() const {
  const Vec2 l = axis.vec() * half_length;
  const Vec2 w = perp(axis.vec()) * half_width;
  return {center - l - w, center + l - w, center + l + w, center - l + w};
}

bool OrientedRect::contains(Point2 p) const {
  const Vec2 d = p - center;
  return std::abs(dot(d, axis.vec())) <= half_length &&
         std::abs(cross(axis.vec(), d)) <= half_width;
}

bool OrientedRect::intersects_segment(Point2 a, Point2 b) const {
  if (contains(a) || contains(b)) return true;
  const auto c = corners();
  for (std::size_t i = 0; i < 4; ++i) {
    if (segments_intersect(a, b, c[i], c[(i + 1) % 4])) return true;
  }
  return false;
}

}  // namespace articnav
