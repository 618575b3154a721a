#include "vtp/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vtp {

double signed_area(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double polygon_area(std::span<const Vec2> poly) { return std::abs(signed_area(poly)); }

Vec2 polygon_centroid(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    const double cr = a.x * b.y - b.x * a.y;
    a2 += cr;
    cx += (a.x + b.x) * cr;
    cy += (a.y + b.y) * cr;
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

Box bounding_box(std::span<const Vec2> poly) {
  Box b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec2& p : poly) {
    b.xmin = std::min(b.xmin, p.x);
    b.xmax = std::max(b.xmax, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

bool contains(std::span<const Vec2> poly, Vec2 pt) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if ((a.y > pt.y) != (b.y > pt.y)) {
      const double xc = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (pt.x < xc) inside = !inside;
    }
  }
  return inside;
}

namespace {

double orient(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

}  // namespace

bool is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto seg_xmin = [&](std::size_t i) { return std::min(poly[i].x, poly[(i + 1) % n].x); };
  auto seg_xmax = [&](std::size_t i) { return std::max(poly[i].x, poly[(i + 1) % n].x); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return seg_xmin(a) < seg_xmin(b) || (seg_xmin(a) == seg_xmin(b) && a < b);
  });
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    const double xmax_i = seg_xmax(i);
    for (std::size_t oj = oi + 1; oj < n; ++oj) {
      const std::size_t j = order[oj];
      if (seg_xmin(j) > xmax_i) break;
      const std::size_t diff = i > j ? i - j : j - i;
      if (diff == 1 || diff == n - 1) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

namespace {

// keep points with sign * (coord(p) - bound) >= 0
template <typename Coord>
std::vector<Vec2> clip_half(const std::vector<Vec2>& in, Coord coord, double bound, double sign) {
  std::vector<Vec2> out;
  const std::size_t n = in.size();
  if (n == 0) return out;
  out.reserve(n + 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 cur = in[i];
    const Vec2 prev = in[(i + n - 1) % n];
    const double dc = sign * (coord(cur) - bound);
    const double dp = sign * (coord(prev) - bound);
    if (dc >= 0.0) {
      if (dp < 0.0) {
        const double s = dp / (dp - dc);
        out.push_back(prev + s * (cur - prev));
      }
      out.push_back(cur);
    } else if (dp >= 0.0) {
      const double s = dp / (dp - dc);
      out.push_back(prev + s * (cur - prev));
    }
  }
  return out;
}

}  // namespace

std::vector<Vec2> clip_to_box(std::span<const Vec2> poly, const Box& box) {
  std::vector<Vec2> work(poly.begin(), poly.end());
  auto cx = [](Vec2 p) { return p.x; };
  auto cy = [](Vec2 p) { return p.y; };
  work = clip_half(work, cx, box.xmin, 1.0);
  work = clip_half(work, cx, box.xmax, -1.0);
  work = clip_half(work, cy, box.ymin, 1.0);
  work = clip_half(work, cy, box.ymax, -1.0);
  return work;
}

double extent_at_x(std::span<const Vec2> poly, double x) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    if ((a.x <= x && b.x > x) || (b.x <= x && a.x > x)) {
      const double y = a.y + (x - a.x) * (b.y - a.y) / (b.x - a.x);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  return hi > lo ? hi - lo : 0.0;
}

}  // namespace vtp
