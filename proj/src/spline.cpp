#include "vtp/spline.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "vtp/error.hpp"

namespace vtp {

PeriodicSpline::PeriodicSpline(std::span<const Vec2> knots) : knots_(knots.begin(), knots.end()) {
  const auto n = static_cast<Eigen::Index>(knots_.size());
  if (n < 3) throw Error(ErrorCode::InvalidParams, "periodic spline needs at least 3 knots");
  // Circulant [1 4 1] system for the second derivatives.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 4.0;
    a(i, (i + 1) % n) += 1.0;
    a(i, (i + n - 1) % n) += 1.0;
    const Vec2 prev = knots_[static_cast<std::size_t>((i + n - 1) % n)];
    const Vec2 cur = knots_[static_cast<std::size_t>(i)];
    const Vec2 next = knots_[static_cast<std::size_t>((i + 1) % n)];
    rhs(i, 0) = 6.0 * (next.x - 2.0 * cur.x + prev.x);
    rhs(i, 1) = 6.0 * (next.y - 2.0 * cur.y + prev.y);
  }
  const Eigen::MatrixXd z = a.partialPivLu().solve(rhs);
  second_.resize(knots_.size());
  for (Eigen::Index i = 0; i < n; ++i) second_[static_cast<std::size_t>(i)] = {z(i, 0), z(i, 1)};
}

Vec2 PeriodicSpline::operator()(double s) const {
  const auto n = static_cast<double>(knots_.size());
  s = std::fmod(s, n);
  if (s < 0.0) s += n;
  auto i = static_cast<std::size_t>(std::floor(s));
  if (i >= knots_.size()) i = knots_.size() - 1;
  const double t = s - static_cast<double>(i);
  const std::size_t j = (i + 1) % knots_.size();
  const double u = 1.0 - t;
  const double ci = (u * u * u - u) / 6.0;
  const double cj = (t * t * t - t) / 6.0;
  return {u * knots_[i].x + t * knots_[j].x + ci * second_[i].x + cj * second_[j].x,
          u * knots_[i].y + t * knots_[j].y + ci * second_[i].y + cj * second_[j].y};
}

std::vector<Vec2> PeriodicSpline::sample(int count) const {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(count));
  const auto n = static_cast<double>(knots_.size());
  for (int k = 0; k < count; ++k) out.push_back((*this)(n * k / count));
  return out;
}

}  // namespace vtp
