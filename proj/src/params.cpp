#include "vtp/params.hpp"

#include <cmath>
#include <sstream>

#include "vtp/error.hpp"

namespace vtp {

OutlineParams OutlineParams::ones() {
  OutlineParams o;
  o.p.fill(1.0);
  return o;
}

ThicknessParams ThicknessParams::ones() {
  ThicknessParams t;
  t.t.fill(1.0);
  return t;
}

MaterialParams MaterialParams::sitka_spruce() {
  MaterialParams m;
  m.rho = 400.0;
  m.e_long = 10.8e9;
  m.e_rad = 0.078 * m.e_long;
  m.e_tan = 0.043 * m.e_long;
  m.nu_lr = 0.37;
  m.nu_lt = 0.47;
  m.nu_rt = 0.43;
  return m;
}

std::array<double, kMaterialCount> MaterialParams::to_array() const {
  return {rho, e_long, e_rad, e_tan, nu_lr, nu_lt, nu_rt};
}

MaterialParams MaterialParams::from_array(std::span<const double> v) {
  if (v.size() != kMaterialCount) {
    throw Error(ErrorCode::InvalidParams, "material vector must have 7 entries");
  }
  MaterialParams m;
  m.rho = v[0];
  m.e_long = v[1];
  m.e_rad = v[2];
  m.e_tan = v[3];
  m.nu_lr = v[4];
  m.nu_lt = v[5];
  m.nu_rt = v[6];
  return m;
}

double MaterialParams::g_lr() const {
  return std::sqrt(e_long * e_rad) / (2.0 * (1.0 + std::sqrt(nu_lr * nu_rl())));
}

bool MaterialParams::is_valid(std::string* reason) const {
  auto fail = [&](const char* why) {
    if (reason != nullptr) *reason = why;
    return false;
  };
  for (double v : to_array()) {
    if (!std::isfinite(v)) return fail("non-finite material constant");
  }
  if (rho <= 0.0) return fail("rho must be positive");
  if (e_long <= 0.0 || e_rad <= 0.0 || e_tan <= 0.0) return fail("moduli must be positive");
  for (double nu : {nu_lr, nu_lt, nu_rt}) {
    if (nu <= 0.0 || nu >= 0.5) return fail("Poisson ratios must lie in (0, 0.5)");
  }
  const double nu_rl_v = nu_rl();
  const double nu_tl = nu_lt * e_tan / e_long;
  const double nu_tr = nu_rt * e_tan / e_rad;
  if (nu_lr * nu_rl_v >= 1.0 || nu_lt * nu_tl >= 1.0 || nu_rt * nu_tr >= 1.0) {
    return fail("orthotropic compliance not positive definite");
  }
  const double det = 1.0 - nu_lr * nu_rl_v - nu_rt * nu_tr - nu_lt * nu_tl -
                     2.0 * nu_rl_v * nu_tr * nu_lt;
  if (det <= 0.0) return fail("orthotropic compliance not positive definite");
  return true;
}

std::vector<double> PlateParams::to_vector() const {
  std::vector<double> v;
  v.reserve(kParamCount);
  v.insert(v.end(), outline.p.begin(), outline.p.end());
  v.insert(v.end(), thickness.t.begin(), thickness.t.end());
  const auto m = material.to_array();
  v.insert(v.end(), m.begin(), m.end());
  return v;
}

PlateParams PlateParams::from_vector(std::span<const double> v) {
  if (v.size() != kParamCount) {
    throw Error(ErrorCode::InvalidParams, "parameter vector must have 35 entries");
  }
  PlateParams out;
  for (std::size_t i = 0; i < kOutlineCount; ++i) out.outline.p[i] = v[i];
  for (std::size_t i = 0; i < kThicknessCount; ++i) out.thickness.t[i] = v[kOutlineCount + i];
  out.material = MaterialParams::from_array(v.subspan(kOutlineCount + kThicknessCount));
  return out;
}

const std::array<std::string, kParamCount>& param_names() {
  static const std::array<std::string, kParamCount> names = [] {
    std::array<std::string, kParamCount> n;
    for (std::size_t i = 0; i < kOutlineCount; ++i) n[i] = "p" + std::to_string(i);
    for (std::size_t i = 0; i < kThicknessCount; ++i) n[kOutlineCount + i] = "t" + std::to_string(i);
    const char* mat[] = {"rho", "e_long", "e_rad", "e_tan", "nu_lr", "nu_lt", "nu_rt"};
    for (std::size_t i = 0; i < kMaterialCount; ++i) n[kOutlineCount + kThicknessCount + i] = mat[i];
    return n;
  }();
  return names;
}

void validate(const PlateParams& params) {
  for (std::size_t i = 0; i < kOutlineCount; ++i) {
    const double p = params.outline.p[i];
    if (!std::isfinite(p) || p <= 0.0 || p >= 2.0) {
      std::ostringstream os;
      os << "p[" << i << "] = " << p << " outside (0, 2)";
      throw Error(ErrorCode::InvalidParams, os.str());
    }
  }
  for (std::size_t i = 0; i < kThicknessCount; ++i) {
    if (!std::isfinite(params.thickness.t[i])) {
      throw Error(ErrorCode::InvalidParams, "t[" + std::to_string(i) + "] is not finite");
    }
  }
  std::string reason;
  if (!params.material.is_valid(&reason)) {
    throw Error(ErrorCode::InvalidParams, "m: " + reason);
  }
}

nlohmann::json to_json(const MaterialParams& m) {
  return {{"rho", m.rho},     {"e_long", m.e_long}, {"e_rad", m.e_rad}, {"e_tan", m.e_tan},
          {"nu_lr", m.nu_lr}, {"nu_lt", m.nu_lt},   {"nu_rt", m.nu_rt}};
}

nlohmann::json to_json(const PlateParams& params) {
  return {{"p", params.outline.p}, {"t", params.thickness.t}, {"m", to_json(params.material)}};
}

MaterialParams material_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParams, "m: expected an object");
  MaterialParams m;
  auto field = [&](const char* key, double& dst) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw Error(ErrorCode::InvalidParams, std::string("m.") + key + ": missing or not a number");
    }
    dst = j.at(key).get<double>();
  };
  field("rho", m.rho);
  field("e_long", m.e_long);
  field("e_rad", m.e_rad);
  field("e_tan", m.e_tan);
  field("nu_lr", m.nu_lr);
  field("nu_lt", m.nu_lt);
  field("nu_rt", m.nu_rt);
  return m;
}

namespace {

template <std::size_t N>
std::array<double, N> fixed_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::InvalidParams, std::string(key) + ": missing or not an array");
  }
  const auto& arr = j.at(key);
  if (arr.size() != N) {
    std::ostringstream os;
    os << key << ": expected " << N << " entries, got " << arr.size();
    throw Error(ErrorCode::InvalidParams, os.str());
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!arr[i].is_number()) {
      throw Error(ErrorCode::InvalidParams, std::string(key) + "[" + std::to_string(i) + "]: not a number");
    }
    out[i] = arr[i].get<double>();
  }
  return out;
}

}  // namespace

PlateParams plate_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParams, "params: expected an object");
  PlateParams out;
  out.outline.p = fixed_array<kOutlineCount>(j, "p");
  out.thickness.t = fixed_array<kThicknessCount>(j, "t");
  if (!j.contains("m")) throw Error(ErrorCode::InvalidParams, "m: missing");
  out.material = material_from_json(j.at("m"));
  return out;
}

}  // namespace vtp
