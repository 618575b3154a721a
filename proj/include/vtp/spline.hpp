#pragma once

#include <span>
#include <vector>

#include "vtp/polygon.hpp"

namespace vtp {

// Closed C2 cubic spline through the knots with uniform parameter spacing:
// knot i sits at parameter i, the curve has period n. Linear in the knots.
class PeriodicSpline {
 public:
  explicit PeriodicSpline(std::span<const Vec2> knots);

  Vec2 operator()(double s) const;
  std::size_t knot_count() const { return knots_.size(); }

  // `count` points at parameters s_k = n k / count.
  std::vector<Vec2> sample(int count) const;

 private:
  std::vector<Vec2> knots_;
  std::vector<Vec2> second_;  // second derivatives at the knots
};

}  // namespace vtp
