#pragma once

#include <span>
#include <vector>

namespace vtp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

struct Box {
  double xmin, xmax, ymin, ymax;
};

// Polygons are vertex lists with an implicit closing edge.

double signed_area(std::span<const Vec2> poly);
double polygon_area(std::span<const Vec2> poly);
Vec2 polygon_centroid(std::span<const Vec2> poly);
Box bounding_box(std::span<const Vec2> poly);

// Even-odd rule point test.
bool contains(std::span<const Vec2> poly, Vec2 pt);

// Segment-pair sweep over the closed polyline; adjacent edges sharing a vertex
// are not counted as intersecting.
bool is_simple(std::span<const Vec2> poly);

// Sutherland-Hodgman clip against an axis-aligned rectangle. The input may be
// non-convex; the output can contain zero-area bridges along the clip lines,
// but its signed area equals the area of the intersection.
std::vector<Vec2> clip_to_box(std::span<const Vec2> poly, const Box& box);

// max(y) - min(y) over the crossings of the polyline with the line x = const;
// zero when the line misses the polygon.
double extent_at_x(std::span<const Vec2> poly, double x);

}  // namespace vtp
