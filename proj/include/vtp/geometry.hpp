#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "vtp/params.hpp"
#include "vtp/polygon.hpp"

namespace vtp {

// Eight Gaussian bumps on a 2 x 4 grid plus a floor. Lengths in metres.
struct ThicknessBasis {
  std::array<Vec2, kThicknessCount> centers{};
  std::array<double, kThicknessCount> amplitude{};
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double floor = 0.0;

  static ThicknessBasis uniform(double thickness);
};

// thickness(x) = mean(t) * floor + sum_j t_j * amplitude_j * g_j(x).
// Homogeneous of degree one in t, so scaling every t_j by k scales the field
// by k everywhere.
class ThicknessField {
 public:
  ThicknessField() = default;
  ThicknessField(ThicknessBasis basis, ThicknessParams scales);

  double at(Vec2 pt) const;
  const ThicknessBasis& basis() const { return basis_; }
  const ThicknessParams& scales() const { return scales_; }

 private:
  ThicknessBasis basis_{};
  ThicknessParams scales_ = ThicknessParams::ones();
  double floor_scale_ = 1.0;
};

// Synthetic full-size violin top. Coordinates are centred on the centroid of
// the reference outline; the long (grain) axis is x.
struct ReferencePlate {
  std::array<Vec2, kOutlineCount> control_points{};
  ThicknessBasis thickness;
  MaterialParams material = MaterialParams::sitka_spruce();

  static const ReferencePlate& violin();
};

struct PlateGeometry {
  std::vector<Vec2> boundary;  // counter-clockwise, implicitly closed
  std::array<Vec2, kOutlineCount> control_points{};
  ThicknessField thickness;
  MaterialParams material;

  double thickness_at(Vec2 pt) const { return thickness.at(pt); }

  // Geometry from an explicit polygon (test plates, e.g. squares).
  static PlateGeometry from_polygon(std::vector<Vec2> polygon, ThicknessField field,
                                    MaterialParams material);
};

inline constexpr int kDefaultBoundarySamples = 256;

// Periodic cubic spline through the scaled control points, sampled uniformly
// in the spline parameter. Throws InvalidParams, SelfIntersectingOutline or
// NonPositiveThickness.
PlateGeometry realize(const PlateParams& params, const ReferencePlate& ref = ReferencePlate::violin(),
                      int boundary_samples = kDefaultBoundarySamples);

double area(const PlateGeometry& geometry);

// Mean width across the lower bout, waist and upper bout stations.
double mean_bout_width(const PlateGeometry& geometry, const ReferencePlate& ref = ReferencePlate::violin());

enum class Family : std::uint8_t { Outline = 1, Thickness = 2, Material = 4 };

struct FamilySelector {
  std::uint8_t bits = 0;

  static FamilySelector none() { return {0}; }
  static FamilySelector all() { return {7}; }
  FamilySelector operator|(Family f) const { return {static_cast<std::uint8_t>(bits | static_cast<std::uint8_t>(f))}; }
  bool has(Family f) const { return (bits & static_cast<std::uint8_t>(f)) != 0; }
};

inline FamilySelector operator|(Family a, Family b) { return FamilySelector{} | a | b; }

struct FamilySigma {
  double outline = 0.0;
  double thickness = 0.0;
  double material = 0.0;
};

inline constexpr int kMaxRedraws = 100;

// Multiplies each selected component by (1 + delta), delta ~ N(0, sigma^2).
// Draws that break a component invariant are redrawn; more than kMaxRedraws
// redraws of one component throws PerturbationInfeasible.
PlateParams perturb(const PlateParams& params, FamilySelector which, const FamilySigma& sigma,
                    std::uint64_t seed);
PlateParams perturb(const PlateParams& params, FamilySelector which, double sigma, std::uint64_t seed);

nlohmann::json geometry_to_json(const PlateGeometry& geometry, int thickness_grid = 32);

}  // namespace vtp
