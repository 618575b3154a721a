#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vtp/error.hpp"
#include "vtp/geometry.hpp"
#include "vtp/params.hpp"
#include "vtp/polygon.hpp"
#include "vtp/spline.hpp"

using namespace vtp;

namespace {

std::vector<Vec2> circle(int n, double r, Vec2 c = {}) {
  std::vector<Vec2> pts;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return pts;
}

}  // namespace

TEST_CASE("shoelace area, orientation and centroid") {
  const std::vector<Vec2> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  CHECK(signed_area(square) == doctest::Approx(4.0));
  std::vector<Vec2> cw(square.rbegin(), square.rend());
  CHECK(signed_area(cw) == doctest::Approx(-4.0));
  CHECK(polygon_area(cw) == doctest::Approx(4.0));

  const std::vector<Vec2> tri{{0, 0}, {3, 0}, {0, 3}};
  CHECK(polygon_area(tri) == doctest::Approx(4.5));
  const Vec2 c = polygon_centroid(tri);
  CHECK(c.x == doctest::Approx(1.0));
  CHECK(c.y == doctest::Approx(1.0));

  const Box b = bounding_box(tri);
  CHECK(b.xmin == 0.0);
  CHECK(b.xmax == 3.0);
  CHECK(b.ymax == 3.0);
}

TEST_CASE("point containment and simplicity") {
  const std::vector<Vec2> l_shape{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  CHECK(contains(l_shape, {0.5, 0.5}));
  CHECK(contains(l_shape, {0.5, 1.5}));
  CHECK_FALSE(contains(l_shape, {1.5, 1.5}));
  CHECK_FALSE(contains(l_shape, {3.0, 0.5}));
  CHECK(is_simple(l_shape));

  const std::vector<Vec2> bowtie{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  CHECK_FALSE(is_simple(bowtie));
}

TEST_CASE("clipping preserves the intersection area") {
  const std::vector<Vec2> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  CHECK(polygon_area(clip_to_box(square, {1, 3, 1, 3})) == doctest::Approx(1.0));
  CHECK(polygon_area(clip_to_box(square, {-1, 3, -1, 3})) == doctest::Approx(4.0));
  CHECK(clip_to_box(square, {5, 6, 5, 6}).empty());

  const std::vector<Vec2> u_shape{{0, 0}, {3, 0}, {3, 3}, {2, 3}, {2, 1}, {1, 1}, {1, 3}, {0, 3}};
  CHECK(signed_area(clip_to_box(u_shape, {0, 3, 2, 3})) == doctest::Approx(2.0));
  CHECK(signed_area(clip_to_box(u_shape, {0.5, 2.5, 0, 2})) == doctest::Approx(2.0 + 0.5 + 0.5));
}

TEST_CASE("extent across a vertical line") {
  const auto c = circle(2000, 1.0);
  CHECK(extent_at_x(c, 0.0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(extent_at_x(c, 0.6) == doctest::Approx(1.6).epsilon(1e-4));
  CHECK(extent_at_x(c, 1.5) == 0.0);
}

TEST_CASE("periodic spline interpolates its knots and is linear in them") {
  const auto knots = circle(12, 1.0, {0.3, -0.2});
  PeriodicSpline s(knots);
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const Vec2 p = s(static_cast<double>(i));
    CHECK(p.x == doctest::Approx(knots[i].x));
    CHECK(p.y == doctest::Approx(knots[i].y));
  }
  const Vec2 wrapped = s(12.0 + 0.37);
  const Vec2 base = s(0.37);
  CHECK(wrapped.x == doctest::Approx(base.x));
  CHECK(wrapped.y == doctest::Approx(base.y));

  std::vector<Vec2> scaled;
  for (const Vec2& k : knots) scaled.push_back(2.5 * k);
  PeriodicSpline t(scaled);
  for (double u : {0.1, 3.7, 9.25}) {
    CHECK(t(u).x == doctest::Approx(2.5 * s(u).x));
    CHECK(t(u).y == doctest::Approx(2.5 * s(u).y));
  }
}

TEST_CASE("spline through circle knots converges to the circle area") {
  double previous_error = 1.0;
  for (int n : {8, 16, 32, 64}) {
    const double a = polygon_area(PeriodicSpline(circle(n, 1.0)).sample(4096));
    const double error = std::abs(a - std::numbers::pi);
    CHECK(error < previous_error);
    previous_error = error;
  }
  CHECK(previous_error < 1e-5);
}

TEST_CASE("parameter vector and JSON round trips") {
  PlateParams p = PlateParams::reference();
  p.outline.p[3] = 1.1;
  p.thickness.t[5] = 0.9;
  p.material.rho *= 1.05;
  const auto v = p.to_vector();
  REQUIRE(v.size() == kParamCount);
  CHECK(PlateParams::from_vector(v) == p);
  CHECK(plate_params_from_json(to_json(p)) == p);
  CHECK(param_names()[0] == "p0");
  CHECK(param_names()[20] == "t0");
  CHECK(param_names()[28] == "rho");
}

TEST_CASE("validation rejects out-of-domain parameters") {
  CHECK_NOTHROW(validate(PlateParams::reference()));
  auto expect_invalid = [](PlateParams p) {
    try {
      validate(p);
      FAIL("expected InvalidParams");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidParams);
    }
  };
  PlateParams p = PlateParams::reference();
  p.outline.p[0] = 2.0;
  expect_invalid(p);
  p = PlateParams::reference();
  p.thickness.t[1] = std::nan("");
  expect_invalid(p);
  p = PlateParams::reference();
  p.material.rho = -1.0;
  expect_invalid(p);
  p = PlateParams::reference();
  p.material.nu_lr = 5.0;
  expect_invalid(p);
}

TEST_CASE("Huber shear modulus reduces to the isotropic value") {
  MaterialParams m = MaterialParams::sitka_spruce();
  m.e_long = m.e_rad = m.e_tan = 70e9;
  m.nu_lr = m.nu_lt = m.nu_rt = 0.3;
  CHECK(m.g_lr() == doctest::Approx(70e9 / 2.6));
  CHECK(m.nu_rl() == doctest::Approx(0.3));
}

TEST_CASE("reference outline is a simple counter-clockwise violin-sized plate") {
  const PlateGeometry g = realize(PlateParams::reference());
  CHECK(g.boundary.size() == static_cast<std::size_t>(kDefaultBoundarySamples));
  CHECK(is_simple(g.boundary));
  CHECK(signed_area(g.boundary) > 0.0);
  const Box b = bounding_box(g.boundary);
  CHECK(b.xmax - b.xmin == doctest::Approx(0.356).epsilon(0.05));
  CHECK(area(g) > 0.03);
  CHECK(area(g) < 0.06);
  CHECK(mean_bout_width(g) > 0.1);
  CHECK(g.thickness_at({0.0, 0.0}) > 0.0);
}

TEST_CASE("uniform outline scale k scales the area by k squared") {
  const double a0 = area(realize(PlateParams::reference()));
  for (double k : {0.8, 0.9, 1.1, 1.2}) {
    PlateParams p = PlateParams::reference();
    p.outline.p.fill(k);
    CHECK(area(realize(p)) == doctest::Approx(k * k * a0).epsilon(1e-9));
  }
}

TEST_CASE("thickness field is homogeneous of degree one") {
  const ReferencePlate& ref = ReferencePlate::violin();
  ThicknessParams t = ThicknessParams::ones();
  t.t = {1.1, 0.9, 1.0, 1.05, 0.95, 1.2, 0.85, 1.0};
  ThicknessParams t2 = t;
  for (double& v : t2.t) v *= 1.3;
  ThicknessField a(ref.thickness, t), b(ref.thickness, t2);
  for (Vec2 pt : {Vec2{0, 0}, Vec2{0.1, 0.05}, Vec2{-0.12, -0.04}}) {
    CHECK(b.at(pt) == doctest::Approx(1.3 * a.at(pt)));
  }
  ThicknessField u(ThicknessBasis::uniform(0.003), ThicknessParams::ones());
  CHECK(u.at({0.07, -0.02}) == doctest::Approx(0.003));
}

TEST_CASE("self-intersecting outlines are reported") {
  PlateParams p = PlateParams::reference();
  for (std::size_t i = 0; i < kOutlineCount; i += 2) p.outline.p[i] = 0.05;
  for (std::size_t i = 1; i < kOutlineCount; i += 2) p.outline.p[i] = 1.95;
  try {
    realize(p);
    FAIL("expected a geometry error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SelfIntersectingOutline);
  }
}

TEST_CASE("perturbation with zero sigma is the identity and seeds are reproducible") {
  const PlateParams ref = PlateParams::reference();
  CHECK(perturb(ref, FamilySelector::all(), 0.0, 7) == ref);
  CHECK(perturb(ref, FamilySelector::all(), 0.05, 7) == perturb(ref, FamilySelector::all(), 0.05, 7));
  CHECK_FALSE(perturb(ref, FamilySelector::all(), 0.05, 7) == perturb(ref, FamilySelector::all(), 0.05, 8));

  const PlateParams only_outline = perturb(ref, FamilySelector{} | Family::Outline, 0.05, 3);
  CHECK(only_outline.thickness.t == ref.thickness.t);
  CHECK(only_outline.material.rho == ref.material.rho);
  CHECK_FALSE(only_outline.outline.p == ref.outline.p);
}

TEST_CASE("perturbation deltas have the requested mean and spread") {
  const PlateParams ref = PlateParams::reference();
  const double sigma = 0.05;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const PlateParams p = perturb(ref, FamilySelector::all(), sigma, seed);
    const auto v = p.to_vector(), v0 = ref.to_vector();
    for (std::size_t i = 0; i < kOutlineCount + kThicknessCount; ++i) {
      const double d = v[i] / v0[i] - 1.0;
      sum += d;
      sum_sq += d * d;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double sd = std::sqrt(sum_sq / static_cast<double>(count) - mean * mean);
  CHECK(std::abs(mean) < 4.0 * sigma / std::sqrt(static_cast<double>(count)));
  CHECK(sd == doctest::Approx(sigma).epsilon(0.03));
}

TEST_CASE("geometry JSON carries the boundary and a thickness grid") {
  const nlohmann::json j = geometry_to_json(realize(PlateParams::reference()), 16);
  CHECK(j.at("boundary").size() == static_cast<std::size_t>(kDefaultBoundarySamples));
  CHECK(j.contains("thickness"));
  CHECK(j.contains("control_points"));
}
