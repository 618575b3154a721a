#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/optimizer.hpp"

namespace vtp {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;

  std::string to_csv() const;
  std::vector<double> column(const std::string& name) const;
};

struct StudyReport {
  std::string id;
  nlohmann::json config;
  nlohmann::json summary;
  std::map<std::string, Table> tables;
  nlohmann::json outlines = nlohmann::json::object();  // name -> [[x, y], ...]

  nlohmann::json to_json() const;
  // report.json, one CSV per table and outlines.json.
  void write(const std::filesystem::path& dir) const;
};

struct StudyContext {
  const SurrogateModel* model = nullptr;
  ReferencePlate ref = ReferencePlate::violin();
  OracleConfig oracle;
  unsigned workers = 1;
  std::uint64_t seed = 1;
  bool allow_unreliable = false;
  NelderMeadOptions nelder_mead;
};

inline constexpr std::array<double, 3> kRatioTargets{2.3 * 0.95, 2.3, 2.3 * 1.05};
inline constexpr std::array<double, 4> kEquivalenceSigmas{0.01, 0.02, 0.05, 0.1};
inline constexpr double kTieSlack = 0.10;

// ε1 over the outline from the reference for each α, with oracle
// cross-validation and the signed width/f52 correlation.
StudyReport study_ratio(const StudyContext& ctx, const std::vector<double>& alphas = {kRatioTargets.begin(),
                                                                                      kRatioTargets.end()});

// ε2 over the outline for every mode and both signs of β = f_i (1 ± delta).
StudyReport study_single_modes(const StudyContext& ctx, double delta = 0.05);

// Perturb one family by σ, re-optimize the other towards the reference
// spectrum under ε3 and ε4; means over replicates.
StudyReport study_equivalence(const StudyContext& ctx,
                              const std::vector<double>& sigmas = {kEquivalenceSigmas.begin(),
                                                                   kEquivalenceSigmas.end()},
                              int replicates = 20);

// Perturb the material by σ and optimize ε3 over thickness, outline and both.
StudyReport study_material(const StudyContext& ctx, double sigma = 0.2, int replicates = 20);

// 11 x 11 grid of density and grain modulus multipliers in [0.9, 1.1];
// ε3 optimized over outline and thickness in every cell.
StudyReport study_density_modulus_grid(const StudyContext& ctx, int steps = 11, double span = 0.1);

// Longitudinal wave speed √(e/ρ) in m/s.
double wave_speed(double rho, double e_long);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double correlation = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json outline_polyline(const PlateParams& params, const ReferencePlate& ref, int samples = 256);

}  // namespace vtp
