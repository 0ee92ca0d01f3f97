#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace articnav {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr bool operator==(const Vec2&) const = default;
};

using Point2 = Vec2;

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
// Counterclockwise perpendicular.
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Wraps into (-pi, pi].
double wrap_angle(double angle);

// A direction with unit Euclidean norm.
class UnitVec2 {
 public:
  UnitVec2() = default;
  static UnitVec2 from_angle(double angle) {
    return UnitVec2(std::cos(angle), std::sin(angle));
  }
  // nullopt when v is (numerically) zero.
  static std::optional<UnitVec2> normalized(Vec2 v);
  // Keeps the components bit-exact; nullopt unless |norm - 1| <= 1e-9.
  static std::optional<UnitVec2> from_components(double x, double y) {
    if (!(std::abs(std::hypot(x, y) - 1.0) <= 1e-9)) return std::nullopt;
    return UnitVec2(x, y);
  }

  double x() const { return x_; }
  double y() const { return y_; }
  Vec2 vec() const { return {x_, y_}; }
  double angle() const { return std::atan2(y_, x_); }
  bool operator==(const UnitVec2&) const = default;

 private:
  UnitVec2(double x, double y) : x_(x), y_(y) {}
  double x_ = 1.0;
  double y_ = 0.0;
};

inline Vec2 operator*(double s, UnitVec2 u) { return u.vec() * s; }

class Polyline {
 public:
  Polyline() = default;
  // Throws Error(invalid_argument) on fewer than two points or coincident
  // consecutive points.
  Polyline(std::vector<Point2> points, bool closed);

  const std::vector<Point2>& points() const { return points_; }
  bool closed() const { return closed_; }
  std::size_t segment_count() const {
    return closed_ ? points_.size() : points_.size() - 1;
  }
  std::array<Point2, 2> segment(std::size_t i) const {
    return {points_[i], points_[(i + 1) % points_.size()]};
  }
  bool operator==(const Polyline&) const = default;

 private:
  std::vector<Point2> points_;
  bool closed_ = false;
};

struct CircleEstimate {
  enum class Kind { finite, straight };
  Kind kind = Kind::straight;
  Point2 center;
  double radius = 0.0;

  static CircleEstimate make_straight() { return {}; }
  static CircleEstimate make_finite(Point2 c, double r) {
    return {Kind::finite, c, r};
  }
  bool is_straight() const { return kind == Kind::straight; }
};

inline constexpr double kDeterminantTolerance = 1e-12;
inline constexpr double kParallelBisectorTolerance = 1e-6;

// Angle from a to b, positive counterclockwise, in (-pi, pi].
double signed_angle(UnitVec2 a, UnitVec2 b);

// Interior angle at `center` in [0, pi]; nullopt when an end point coincides
// with the center (malformed route).
std::optional<double> subtended_angle(Point2 end_a, Point2 center,
                                      Point2 end_b);

// Distance along the ray to the nearest boundary segment, clipped to
// max_range. Grazing hits at segment end points count.
double raycast(Point2 origin, UnitVec2 direction,
               std::span<const Polyline> boundaries, double max_range);

// Ray parameter of the hit with one segment, if any.
std::optional<double> ray_segment_hit(Point2 origin, UnitVec2 direction,
                                      Point2 a, Point2 b);

// Circle through points[0], points[chord_step], points[2 * chord_step] from
// the intersection of the two chords' perpendicular bisectors. Throws
// Error(invalid_argument) when fewer than 2 * chord_step + 1 points.
CircleEstimate fit_circle_from_chords(std::span<const Point2> points,
                                      std::size_t chord_step);

Point2 closest_point_on_segment(Point2 p, Point2 a, Point2 b);
double point_segment_distance(Point2 p, Point2 a, Point2 b);
// Closed-segment intersection test (touching counts).
bool segments_intersect(Point2 a0, Point2 a1, Point2 b0, Point2 b1);

struct OrientedRect {
  Point2 center;
  UnitVec2 axis;  // length direction
  double half_length = 0.0;
  double half_width = 0.0;

  // Counterclockwise from rear-right.
  std::array<Point2, 4> corners() const;
  bool contains(Point2 p) const;
  bool intersects_segment(Point2 a, Point2 b) const;
};

}  // namespace articnav
