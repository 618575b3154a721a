#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace vtp {

inline constexpr std::size_t kOutlineCount = 20;
inline constexpr std::size_t kThicknessCount = 8;
inline constexpr std::size_t kMaterialCount = 7;
inline constexpr std::size_t kParamCount = kOutlineCount + kThicknessCount + kMaterialCount;
inline constexpr std::size_t kModeCount = 10;

// Multiplicative radial scales of the 20 outline control points.
struct OutlineParams {
  std::array<double, kOutlineCount> p;
  static OutlineParams ones();
};

// Multiplicative scales of the 8 thickness basis coefficients.
struct ThicknessParams {
  std::array<double, kThicknessCount> t;
  static ThicknessParams ones();
};

// Wood constants in the longitudinal (grain), radial and tangential axes.
// SI units: kg/m^3 and Pa.
struct MaterialParams {
  double rho = 0.0;
  double e_long = 0.0;
  double e_rad = 0.0;
  double e_tan = 0.0;
  double nu_lr = 0.0;
  double nu_lt = 0.0;
  double nu_rt = 0.0;

  static MaterialParams sitka_spruce();

  std::array<double, kMaterialCount> to_array() const;
  static MaterialParams from_array(std::span<const double> v);

  // nu_rl from the reciprocity relation nu_rl / e_rad = nu_lr / e_long.
  double nu_rl() const { return nu_lr * e_rad / e_long; }

  // Plate shear modulus in the grain/radial plane. The seven wood constants
  // carry no shear modulus, so it is estimated with Huber's geometric-mean
  // rule, which reduces to E / (2 (1 + nu)) for isotropic input.
  double g_lr() const;

  bool is_valid(std::string* reason = nullptr) const;
};

struct PlateParams {
  OutlineParams outline = OutlineParams::ones();
  ThicknessParams thickness = ThicknessParams::ones();
  MaterialParams material = MaterialParams::sitka_spruce();

  static PlateParams reference() { return {}; }

  // Flat layout: p[0..19], t[0..7], then the material in member order.
  std::vector<double> to_vector() const;
  static PlateParams from_vector(std::span<const double> v);

  bool operator==(const PlateParams& other) const { return to_vector() == other.to_vector(); }
};

// Names of the flat parameter entries, e.g. "p3", "t0", "rho".
const std::array<std::string, kParamCount>& param_names();

// Throws Error(InvalidParams) with a field-level message when a component is
// out of its domain (outline scales outside (0, 2), non-finite values,
// inadmissible material).
void validate(const PlateParams& params);

nlohmann::json to_json(const PlateParams& params);
nlohmann::json to_json(const MaterialParams& material);
PlateParams plate_params_from_json(const nlohmann::json& j);
MaterialParams material_from_json(const nlohmann::json& j);

}  // namespace vtp
