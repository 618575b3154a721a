#include "vtp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vtp/error.hpp"
#include "vtp/spline.hpp"

namespace vtp {

ThicknessBasis ThicknessBasis::uniform(double thickness) {
  ThicknessBasis b;
  b.amplitude.fill(0.0);
  b.sigma_x = 1.0;
  b.sigma_y = 1.0;
  b.floor = thickness;
  return b;
}

ThicknessField::ThicknessField(ThicknessBasis basis, ThicknessParams scales)
    : basis_(basis), scales_(scales) {
  floor_scale_ = std::accumulate(scales_.t.begin(), scales_.t.end(), 0.0) / kThicknessCount;
}

double ThicknessField::at(Vec2 pt) const {
  double h = floor_scale_ * basis_.floor;
  const double ix = 1.0 / (2.0 * basis_.sigma_x * basis_.sigma_x);
  const double iy = 1.0 / (2.0 * basis_.sigma_y * basis_.sigma_y);
  for (std::size_t j = 0; j < kThicknessCount; ++j) {
    const double a = basis_.amplitude[j];
    if (a == 0.0) continue;
    const double dx = pt.x - basis_.centers[j].x;
    const double dy = pt.y - basis_.centers[j].y;
    h += scales_.t[j] * a * std::exp(-(dx * dx * ix + dy * dy * iy));
  }
  return h;
}

namespace {

// Half-widths (mm) at stations measured from the lower end of the body; the
// outline runs along the y < 0 side, round the upper end and back.
constexpr double kBodyLength = 356.0;
constexpr std::array<std::array<double, 2>, 9> kHalfProfile{{{8, 50},
                                                               {36, 93},
                                                               {80, 104},
                                                               {128, 90},
                                                               {168, 63},
                                                               {206, 59},
                                                               {252, 81},
                                                               {300, 78},
                                                               {340, 50}}};

ReferencePlate build_violin() {
  std::array<Vec2, kOutlineCount> pts{};
  std::size_t k = 0;
  pts[k++] = {0.0, 0.0};
  for (const auto& s : kHalfProfile) pts[k++] = {s[0], -s[1]};
  pts[k++] = {kBodyLength, 0.0};
  for (auto it = kHalfProfile.rbegin(); it != kHalfProfile.rend(); ++it) pts[k++] = {(*it)[0], (*it)[1]};
  for (auto& p : pts) p = 1e-3 * p;

  // Centre on the centroid of the spline outline itself.
  const PeriodicSpline spline(pts);
  const auto dense = spline.sample(4000);
  const Vec2 c = polygon_centroid(dense);
  for (auto& p : pts) p = p - c;

  ReferencePlate ref;
  ref.control_points = pts;

  const Box box = bounding_box(dense);
  const double len = box.xmax - box.xmin;
  const double half_width = 0.5 * (box.ymax - box.ymin);
  ThicknessBasis& tb = ref.thickness;
  const std::array<double, 4> col_amp{0.60e-3, 0.95e-3, 0.95e-3, 0.60e-3};
  for (std::size_t col = 0; col < 4; ++col) {
    for (std::size_t row = 0; row < 2; ++row) {
      const std::size_t j = 2 * col + row;
      tb.centers[j] = {box.xmin - c.x + len * (2.0 * static_cast<double>(col) + 1.0) / 8.0,
                       (row == 0 ? -0.5 : 0.5) * half_width};
      tb.amplitude[j] = col_amp[col];
    }
  }
  tb.sigma_x = 60e-3;
  tb.sigma_y = 40e-3;
  tb.floor = 2.2e-3;
  ref.material = MaterialParams::sitka_spruce();
  return ref;
}

}  // namespace

const ReferencePlate& ReferencePlate::violin() {
  static const ReferencePlate ref = build_violin();
  return ref;
}

PlateGeometry PlateGeometry::from_polygon(std::vector<Vec2> polygon, ThicknessField field,
                                          MaterialParams material) {
  if (signed_area(polygon) < 0.0) std::reverse(polygon.begin(), polygon.end());
  PlateGeometry g;
  g.boundary = std::move(polygon);
  g.thickness = field;
  g.material = material;
  return g;
}

PlateGeometry realize(const PlateParams& params, const ReferencePlate& ref, int boundary_samples) {
  validate(params);
  if (boundary_samples < 3 * static_cast<int>(kOutlineCount)) {
    throw Error(ErrorCode::InvalidParams, "boundary sampling must be at least 60 points");
  }
  PlateGeometry g;
  for (std::size_t i = 0; i < kOutlineCount; ++i) {
    g.control_points[i] = params.outline.p[i] * ref.control_points[i];
  }
  g.boundary = PeriodicSpline(g.control_points).sample(boundary_samples);
  if (!is_simple(g.boundary) || signed_area(g.boundary) <= 0.0) {
    throw Error(ErrorCode::SelfIntersectingOutline, "scaled outline spline self-intersects");
  }
  g.thickness = ThicknessField(ref.thickness, params.thickness);
  g.material = params.material;

  double min_h = std::numeric_limits<double>::infinity();
  for (const Vec2& p : g.boundary) min_h = std::min(min_h, g.thickness_at(p));
  const Box box = bounding_box(g.boundary);
  constexpr int kProbe = 24;
  for (int i = 0; i <= kProbe; ++i) {
    for (int j = 0; j <= kProbe; ++j) {
      const Vec2 p{box.xmin + (box.xmax - box.xmin) * i / kProbe, box.ymin + (box.ymax - box.ymin) * j / kProbe};
      if (contains(g.boundary, p)) min_h = std::min(min_h, g.thickness_at(p));
    }
  }
  if (!(min_h > 0.0)) {
    throw Error(ErrorCode::NonPositiveThickness, "scaled thickness field is not positive on the plate");
  }
  return g;
}

double area(const PlateGeometry& geometry) { return polygon_area(geometry.boundary); }

double mean_bout_width(const PlateGeometry& geometry, const ReferencePlate& ref) {
  // Stations 80, 190 and 270 mm from the lower end of the reference body.
  const double x0 = ref.control_points[0].x;
  double sum = 0.0;
  for (double station : {80e-3, 190e-3, 270e-3}) sum += extent_at_x(geometry.boundary, x0 + station);
  return sum / 3.0;
}

namespace {

bool component_ok(const PlateParams& p, std::size_t idx) {
  if (idx < kOutlineCount) {
    const double v = p.outline.p[idx];
    return v > 0.0 && v < 2.0;
  }
  if (idx < kOutlineCount + kThicknessCount) return p.thickness.t[idx - kOutlineCount] > 0.0;
  return p.material.is_valid();
}

}  // namespace

PlateParams perturb(const PlateParams& params, FamilySelector which, const FamilySigma& sigma,
                    std::uint64_t seed) {
  if (sigma.outline < 0.0 || sigma.thickness < 0.0 || sigma.material < 0.0) {
    throw Error(ErrorCode::InvalidParams, "sigma must be non-negative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v = params.to_vector();
  const std::vector<double> base = v;

  auto family_of = [](std::size_t idx) {
    if (idx < kOutlineCount) return Family::Outline;
    if (idx < kOutlineCount + kThicknessCount) return Family::Thickness;
    return Family::Material;
  };
  auto sigma_of = [&](Family f) {
    switch (f) {
      case Family::Outline: return sigma.outline;
      case Family::Thickness: return sigma.thickness;
      case Family::Material: return sigma.material;
    }
    return 0.0;
  };

  for (std::size_t idx = 0; idx < kParamCount; ++idx) {
    const Family f = family_of(idx);
    if (!which.has(f)) continue;
    const double s = sigma_of(f);
    int draws = 0;
    for (;;) {
      v[idx] = base[idx] * (1.0 + s * normal(rng));
      if (component_ok(PlateParams::from_vector(v), idx)) break;
      if (++draws > kMaxRedraws) {
        throw Error(ErrorCode::PerturbationInfeasible,
                    "component " + param_names()[idx] + " exceeded the redraw cap");
      }
    }
  }
  return PlateParams::from_vector(v);
}

PlateParams perturb(const PlateParams& params, FamilySelector which, double sigma, std::uint64_t seed) {
  return perturb(params, which, FamilySigma{sigma, sigma, sigma}, seed);
}

nlohmann::json geometry_to_json(const PlateGeometry& geometry, int thickness_grid) {
  nlohmann::json boundary = nlohmann::json::array();
  for (const Vec2& p : geometry.boundary) boundary.push_back({p.x, p.y});
  nlohmann::json cps = nlohmann::json::array();
  for (const Vec2& p : geometry.control_points) cps.push_back({p.x, p.y});

  const Box box = bounding_box(geometry.boundary);
  nlohmann::json xs = nlohmann::json::array();
  nlohmann::json ys = nlohmann::json::array();
  nlohmann::json values = nlohmann::json::array();
  const int n = std::max(thickness_grid, 2);
  for (int i = 0; i < n; ++i) xs.push_back(box.xmin + (box.xmax - box.xmin) * i / (n - 1));
  for (int j = 0; j < n; ++j) ys.push_back(box.ymin + (box.ymax - box.ymin) * j / (n - 1));
  for (int j = 0; j < n; ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      const Vec2 p{xs[static_cast<std::size_t>(i)].get<double>(), ys[static_cast<std::size_t>(j)].get<double>()};
      if (contains(geometry.boundary, p)) {
        row.push_back(geometry.thickness_at(p));
      } else {
        row.push_back(nullptr);
      }
    }
    values.push_back(std::move(row));
  }
  return {{"boundary", std::move(boundary)},
          {"control_points", std::move(cps)},
          {"area", area(geometry)},
          {"thickness", {{"x", std::move(xs)}, {"y", std::move(ys)}, {"values", std::move(values)}}}};
}

}  // namespace vtp
