#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtp/eigen_oracle.hpp"
#include "vtp/geometry.hpp"
#include "vtp/params.hpp"
#include "vtp/surrogate.hpp"

namespace vtp {

using Spectrum = std::array<double, kModeCount>;

enum class LossKind { RatioTarget, ModeTarget, SpectrumMeanAbs, MeanShift };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::RatioTarget;
  double alpha = 0.0;  // f5/f2 target
  double beta = 0.0;   // target frequency for `mode`
  int mode = 1;        // 1-based
  Spectrum f_ref{};

  static LossSpec ratio(double alpha);
  static LossSpec mode_target(int mode, double beta);
  static LossSpec spectrum(const Spectrum& f_ref);
  static LossSpec mean_shift(const Spectrum& f_ref);

  void validate() const;
};

// (α − f5/f2)², (β − f_i)², mean |f − f_ref|/f_ref, |mean f − mean f_ref|/mean f_ref.
double loss_eval(const LossSpec& spec, const Spectrum& freqs);

nlohmann::json to_json(const LossSpec& spec);
LossSpec loss_spec_from_json(const nlohmann::json& j);

// x = lb + (ub − lb)·sin²(z): every real z lands in [lb, ub].
struct BoxTransform {
  Eigen::VectorXd lb, ub;

  Eigen::VectorXd to_box(const Eigen::VectorXd& z) const;
  Eigen::VectorXd from_box(const Eigen::VectorXd& x) const;
};

struct NelderMeadOptions {
  long budget = 0;  // 0 means 200 · dimension
  double size_tolerance = 1e-6;
  double spread_tolerance = 1e-10;
  double step_fraction = 0.05;  // initial step as a fraction of the box half-width
  double floor = -std::numeric_limits<double>::infinity();  // stop once a loss this low is seen
};

enum class Termination { Converged, BudgetExhausted, StartOptimal };
std::string to_string(Termination t);

struct TracePoint {
  long evaluation = 0;
  double loss = 0.0;
  double best = 0.0;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double loss = 0.0;
  long evaluations = 0;
  long budget = 0;
  Termination status = Termination::Converged;
  std::vector<TracePoint> trace;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using TraceSink = std::function<void(const TracePoint&)>;

// Bounded Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5)
// in sine-squared coordinates. Stops when both the simplex size and the loss
// spread fall below tolerance, or when the budget is spent. Returns the best
// point evaluated. Throws ObjectiveNaN if the objective returns NaN.
MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& x0, const Eigen::VectorXd& lb,
                        const Eigen::VectorXd& ub, const NelderMeadOptions& options = {},
                        const TraceSink& sink = {});

struct FreeVars {
  std::vector<int> indices;  // into PlateParams::to_vector()

  static FreeVars outline();
  static FreeVars thickness();
  static FreeVars outline_and_thickness();
  static FreeVars material();
  static FreeVars all();
  // "outline", "thickness", "outline+thickness", "material", "all", or a comma list of names/indices.
  static FreeVars parse(const std::string& text);

  std::size_t size() const { return indices.size(); }
  std::string describe() const;
};

struct DesignOptions {
  NelderMeadOptions nelder_mead;
  bool allow_unreliable = false;
};

struct OptimizationRun {
  LossSpec spec;
  FreeVars free;
  PlateParams start;
  Eigen::VectorXd lower, upper;
  long budget = 0;
  std::vector<TracePoint> trace;
  PlateParams best;
  double best_loss = 0.0;
  double start_loss = 0.0;
  Prediction predicted;
  long evaluations = 0;
  Termination status = Termination::Converged;
  std::uint64_t seed = 0;
};

// Minimizes loss_eval(spec, model.predict(·)) over the free variables within
// ±20% of their start values. Throws GateFailed for an unreliable model
// unless the options allow it.
OptimizationRun optimize_design(const SurrogateModel& model, const LossSpec& spec, const PlateParams& start,
                                const FreeVars& free, const DesignOptions& options = {}, const TraceSink& sink = {});

struct CrossValidation {
  Spectrum predicted{};
  Spectrum oracle{};
  Spectrum relative_error{};  // |oracle − predicted| / oracle
  double f52_predicted = 0.0;
  double f52_oracle = 0.0;
  double f52_error = 0.0;
  double max_error = 0.0;
};

CrossValidation cross_validate(const OptimizationRun& run, const OracleConfig& oracle = {},
                               const ReferencePlate& ref = ReferencePlate::violin());
CrossValidation compare_spectra(const Spectrum& predicted, const Spectrum& oracle);

nlohmann::json to_json(const OptimizationRun& run);
nlohmann::json to_json(const CrossValidation& cv);
nlohmann::json to_json(const TracePoint& p);

}  // namespace vtp
