#include "vtp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vtp/error.hpp"

namespace vtp {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::RatioTarget: return "ratio";
    case LossKind::ModeTarget: return "mode";
    case LossKind::SpectrumMeanAbs: return "spectrum";
    case LossKind::MeanShift: return "mean_shift";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "ratio" || name == "e1") return LossKind::RatioTarget;
  if (name == "mode" || name == "e2") return LossKind::ModeTarget;
  if (name == "spectrum" || name == "e3") return LossKind::SpectrumMeanAbs;
  if (name == "mean_shift" || name == "e4") return LossKind::MeanShift;
  throw Error(ErrorCode::InvalidParams, "unknown loss kind '" + name + "'");
}

LossSpec LossSpec::ratio(double alpha) {
  LossSpec s;
  s.kind = LossKind::RatioTarget;
  s.alpha = alpha;
  return s;
}

LossSpec LossSpec::mode_target(int mode, double beta) {
  LossSpec s;
  s.kind = LossKind::ModeTarget;
  s.mode = mode;
  s.beta = beta;
  return s;
}

LossSpec LossSpec::spectrum(const Spectrum& f_ref) {
  LossSpec s;
  s.kind = LossKind::SpectrumMeanAbs;
  s.f_ref = f_ref;
  return s;
}

LossSpec LossSpec::mean_shift(const Spectrum& f_ref) {
  LossSpec s;
  s.kind = LossKind::MeanShift;
  s.f_ref = f_ref;
  return s;
}

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::RatioTarget:
      if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidParams, "alpha must be positive");
      break;
    case LossKind::ModeTarget:
      if (mode < 1 || mode > static_cast<int>(kModeCount)) {
        throw Error(ErrorCode::InvalidParams, "mode must be in 1..10");
      }
      if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidParams, "beta must be positive");
      break;
    case LossKind::SpectrumMeanAbs:
    case LossKind::MeanShift:
      for (double f : f_ref) {
        if (!(f > 0.0) || !std::isfinite(f)) throw Error(ErrorCode::InvalidParams, "f_ref entries must be positive");
      }
      break;
  }
}

double loss_eval(const LossSpec& spec, const Spectrum& freqs) {
  switch (spec.kind) {
    case LossKind::RatioTarget: {
      const double d = spec.alpha - freqs[4] / freqs[1];
      return d * d;
    }
    case LossKind::ModeTarget: {
      const double d = spec.beta - freqs[static_cast<std::size_t>(spec.mode - 1)];
      return d * d;
    }
    case LossKind::SpectrumMeanAbs: {
      double sum = 0.0;
      for (std::size_t i = 0; i < kModeCount; ++i) sum += std::abs(freqs[i] - spec.f_ref[i]) / spec.f_ref[i];
      return sum / static_cast<double>(kModeCount);
    }
    case LossKind::MeanShift: {
      const double mean = std::accumulate(freqs.begin(), freqs.end(), 0.0) / kModeCount;
      const double mean_ref = std::accumulate(spec.f_ref.begin(), spec.f_ref.end(), 0.0) / kModeCount;
      return std::abs(mean - mean_ref) / mean_ref;
    }
  }
  return 0.0;
}

nlohmann::json to_json(const LossSpec& spec) {
  nlohmann::json j = {{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case LossKind::RatioTarget: j["alpha"] = spec.alpha; break;
    case LossKind::ModeTarget:
      j["mode"] = spec.mode;
      j["beta"] = spec.beta;
      break;
    default: j["f_ref"] = spec.f_ref;
  }
  return j;
}

LossSpec loss_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParams, "loss spec must be an object");
  LossSpec s;
  try {
    s.kind = loss_kind_from_string(j.at("kind").get<std::string>());
    switch (s.kind) {
      case LossKind::RatioTarget: s.alpha = j.at("alpha").get<double>(); break;
      case LossKind::ModeTarget:
        s.mode = j.at("mode").get<int>();
        s.beta = j.at("beta").get<double>();
        break;
      default: {
        const auto& f = j.at("f_ref");
        if (!f.is_array() || f.size() != kModeCount) {
          throw Error(ErrorCode::InvalidParams, "f_ref: expected 10 entries");
        }
        for (std::size_t i = 0; i < kModeCount; ++i) s.f_ref[i] = f[i].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("loss spec: ") + e.what());
  }
  s.validate();
  return s;
}

Eigen::VectorXd BoxTransform::to_box(const Eigen::VectorXd& z) const {
  return lb + ((ub - lb).array() * z.array().sin().square()).matrix();
}

Eigen::VectorXd BoxTransform::from_box(const Eigen::VectorXd& x) const {
  Eigen::VectorXd z(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double width = ub(i) - lb(i);
    const double u = width > 0.0 ? std::clamp((x(i) - lb(i)) / width, 0.0, 1.0) : 0.5;
    z(i) = std::asin(std::sqrt(u));
  }
  return z;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::StartOptimal: return "start_optimal";
  }
  return "unknown";
}

namespace {

struct Vertex {
  Eigen::VectorXd z;
  double f = 0.0;
};

class BudgetSpent : public std::exception {};
class FloorReached : public std::exception {};

}  // namespace

MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& x0, const Eigen::VectorXd& lb,
                        const Eigen::VectorXd& ub, const NelderMeadOptions& options, const TraceSink& sink) {
  const Eigen::Index n = x0.size();
  if (n < 1) throw Error(ErrorCode::InvalidParams, "nothing to optimize");
  if (lb.size() != n || ub.size() != n) throw Error(ErrorCode::InvalidParams, "bounds do not match the start point");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lb(i) <= x0(i) && x0(i) <= ub(i))) {
      throw Error(ErrorCode::InvalidParams, "start point outside its bounds at coordinate " + std::to_string(i));
    }
  }
  const BoxTransform box{lb, ub};
  MinimizeResult result;
  result.budget = options.budget > 0 ? options.budget : 200 * static_cast<long>(n);

  auto evaluate = [&](const Eigen::VectorXd& z) {
    if (result.evaluations >= result.budget) throw BudgetSpent();
    const Eigen::VectorXd x = box.to_box(z);
    const double f = objective(x);
    if (std::isnan(f)) throw Error(ErrorCode::ObjectiveNaN, "objective returned NaN");
    ++result.evaluations;
    if (result.evaluations == 1 || f < result.loss) {
      result.loss = f;
      result.x = x;
    }
    const TracePoint p{result.evaluations, f, result.loss};
    result.trace.push_back(p);
    if (sink) sink(p);
    if (f <= options.floor) throw FloorReached();
    return f;
  };

  std::vector<Vertex> simplex;
  try {
    const Eigen::VectorXd z0 = box.from_box(x0);
    simplex.push_back({z0, evaluate(z0)});
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd x = x0;
      const double step = options.step_fraction * 0.5 * (ub(i) - lb(i));
      x(i) = x0(i) + step <= ub(i) ? x0(i) + step : x0(i) - step;
      const Eigen::VectorXd z = box.from_box(x);
      simplex.push_back({z, evaluate(z)});
    }
    auto by_loss = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    std::stable_sort(simplex.begin(), simplex.end(), by_loss);

    for (;;) {
      double size = 0.0, spread = 0.0;
      for (std::size_t k = 1; k < simplex.size(); ++k) {
        size = std::max(size, (simplex[k].z - simplex[0].z).cwiseAbs().maxCoeff());
        spread = std::max(spread, std::abs(simplex[k].f - simplex[0].f));
      }
      if (size < options.size_tolerance && spread < options.spread_tolerance) {
        result.status = Termination::Converged;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (Eigen::Index k = 0; k < n; ++k) centroid += simplex[static_cast<std::size_t>(k)].z;
      centroid /= static_cast<double>(n);
      Vertex& worst = simplex.back();
      const double f_best = simplex.front().f;
      const double f_second = simplex[simplex.size() - 2].f;

      const Eigen::VectorXd zr = centroid + (centroid - worst.z);
      const double fr = evaluate(zr);
      bool shrink = false;
      if (fr < f_best) {
        const Eigen::VectorXd ze = centroid + 2.0 * (centroid - worst.z);
        const double fe = evaluate(ze);
        worst = fe < fr ? Vertex{ze, fe} : Vertex{zr, fr};
      } else if (fr < f_second) {
        worst = {zr, fr};
      } else if (fr < worst.f) {
        const Eigen::VectorXd zc = centroid + 0.5 * (zr - centroid);
        const double fc = evaluate(zc);
        if (fc <= fr) {
          worst = {zc, fc};
        } else {
          shrink = true;
        }
      } else {
        const Eigen::VectorXd zcc = centroid + 0.5 * (worst.z - centroid);
        const double fcc = evaluate(zcc);
        if (fcc < worst.f) {
          worst = {zcc, fcc};
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (std::size_t k = 1; k < simplex.size(); ++k) {
          simplex[k].z = simplex[0].z + 0.5 * (simplex[k].z - simplex[0].z);
          simplex[k].f = evaluate(simplex[k].z);
        }
      }
      std::stable_sort(simplex.begin(), simplex.end(), by_loss);
    }
  } catch (const BudgetSpent&) {
    result.status = Termination::BudgetExhausted;
  } catch (const FloorReached&) {
    result.status = result.evaluations == 1 ? Termination::StartOptimal : Termination::Converged;
  }
  return result;
}

FreeVars FreeVars::outline() {
  FreeVars f;
  for (std::size_t i = 0; i < kOutlineCount; ++i) f.indices.push_back(static_cast<int>(i));
  return f;
}

FreeVars FreeVars::thickness() {
  FreeVars f;
  for (std::size_t i = 0; i < kThicknessCount; ++i) f.indices.push_back(static_cast<int>(kOutlineCount + i));
  return f;
}

FreeVars FreeVars::outline_and_thickness() {
  FreeVars f = outline();
  for (int i : thickness().indices) f.indices.push_back(i);
  return f;
}

FreeVars FreeVars::material() {
  FreeVars f;
  for (std::size_t i = 0; i < kMaterialCount; ++i)
    f.indices.push_back(static_cast<int>(kOutlineCount + kThicknessCount + i));
  return f;
}

FreeVars FreeVars::all() {
  FreeVars f;
  for (std::size_t i = 0; i < kParamCount; ++i) f.indices.push_back(static_cast<int>(i));
  return f;
}

FreeVars FreeVars::parse(const std::string& text) {
  if (text == "outline") return outline();
  if (text == "thickness") return thickness();
  if (text == "outline+thickness" || text == "both") return outline_and_thickness();
  if (text == "material") return material();
  if (text == "all") return all();
  FreeVars f;
  std::stringstream ss(text);
  std::string item;
  const auto& names = param_names();
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto it = std::find(names.begin(), names.end(), item);
    int index = -1;
    if (it != names.end()) {
      index = static_cast<int>(it - names.begin());
    } else {
      try {
        std::size_t used = 0;
        index = std::stoi(item, &used);
        if (used != item.size()) index = -1;
      } catch (const std::exception&) {
        index = -1;
      }
    }
    if (index < 0 || index >= static_cast<int>(kParamCount)) {
      throw Error(ErrorCode::InvalidParams, "unknown free variable '" + item + "'");
    }
    if (std::find(f.indices.begin(), f.indices.end(), index) != f.indices.end()) {
      throw Error(ErrorCode::InvalidParams, "free variable '" + item + "' listed twice");
    }
    f.indices.push_back(index);
  }
  if (f.indices.empty()) throw Error(ErrorCode::InvalidParams, "no free variables selected");
  return f;
}

std::string FreeVars::describe() const {
  const auto same = [&](const FreeVars& other) { return indices == other.indices; };
  if (same(outline())) return "outline";
  if (same(thickness())) return "thickness";
  if (same(outline_and_thickness())) return "outline+thickness";
  if (same(material())) return "material";
  if (same(all())) return "all";
  std::string s;
  for (int i : indices) {
    if (!s.empty()) s += ',';
    s += param_names()[static_cast<std::size_t>(i)];
  }
  return s;
}

OptimizationRun optimize_design(const SurrogateModel& model, const LossSpec& spec, const PlateParams& start,
                                const FreeVars& free, const DesignOptions& options, const TraceSink& sink) {
  if (!options.allow_unreliable) model.require_reliable();
  spec.validate();
  validate(start);
  if (free.indices.empty()) throw Error(ErrorCode::InvalidParams, "no free variables selected");

  OptimizationRun run;
  run.spec = spec;
  run.free = free;
  run.start = start;
  const std::vector<double> base = start.to_vector();
  const auto nv = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd x0(nv);
  run.lower.resize(nv);
  run.upper.resize(nv);
  for (Eigen::Index k = 0; k < nv; ++k) {
    const double v = base[static_cast<std::size_t>(free.indices[static_cast<std::size_t>(k)])];
    x0(k) = v;
    run.lower(k) = std::min((1.0 - kTrainingBox) * v, (1.0 + kTrainingBox) * v);
    run.upper(k) = std::max((1.0 - kTrainingBox) * v, (1.0 + kTrainingBox) * v);
  }
  auto assemble = [&](const Eigen::VectorXd& x) {
    std::vector<double> v = base;
    for (Eigen::Index k = 0; k < nv; ++k) v[static_cast<std::size_t>(free.indices[static_cast<std::size_t>(k)])] = x(k);
    return PlateParams::from_vector(v);
  };
  auto objective = [&](const Eigen::VectorXd& x) { return loss_eval(spec, model.predict(assemble(x)).freqs_hz); };

  NelderMeadOptions nm = options.nelder_mead;
  const long cap = 200 * static_cast<long>(nv);
  if (nm.budget > cap) {
    throw Error(ErrorCode::InvalidParams, "budget " + std::to_string(nm.budget) + " exceeds 200 evaluations per free variable (" +
                                              std::to_string(cap) + ")");
  }
  run.budget = nm.budget > 0 ? nm.budget : cap;
  nm.budget = run.budget;
  nm.floor = 0.0;
  MinimizeResult r = minimize(objective, x0, run.lower, run.upper, nm, sink);
  run.start_loss = r.trace.front().loss;
  run.trace = std::move(r.trace);
  run.evaluations = r.evaluations;
  run.best = assemble(r.x);
  run.best_loss = r.loss;
  run.status = r.status;
  run.predicted = model.predict(run.best);
  return run;
}

CrossValidation compare_spectra(const Spectrum& predicted, const Spectrum& oracle) {
  CrossValidation cv;
  cv.predicted = predicted;
  cv.oracle = oracle;
  for (std::size_t i = 0; i < kModeCount; ++i) {
    cv.relative_error[i] = std::abs(oracle[i] - predicted[i]) / oracle[i];
    cv.max_error = std::max(cv.max_error, cv.relative_error[i]);
  }
  cv.f52_predicted = predicted[4] / predicted[1];
  cv.f52_oracle = oracle[4] / oracle[1];
  cv.f52_error = std::abs(cv.f52_oracle - cv.f52_predicted) / cv.f52_oracle;
  return cv;
}

CrossValidation cross_validate(const OptimizationRun& run, const OracleConfig& oracle, const ReferencePlate& ref) {
  const ModalResult r = oracle_spectrum(run.best, oracle, ref);
  return compare_spectra(run.predicted.freqs_hz, r.freqs_hz);
}

nlohmann::json to_json(const TracePoint& p) {
  return {{"evaluation", p.evaluation}, {"loss", p.loss}, {"best", p.best}};
}

nlohmann::json to_json(const OptimizationRun& run) {
  nlohmann::json trace = nlohmann::json::array();
  for (const TracePoint& p : run.trace) trace.push_back({p.evaluation, p.loss, p.best});
  std::vector<std::string> names;
  for (int i : run.free.indices) names.push_back(param_names()[static_cast<std::size_t>(i)]);
  return {{"spec", to_json(run.spec)},
          {"free_vars", run.free.describe()},
          {"free_names", names},
          {"start", to_json(run.start)},
          {"lower", std::vector<double>(run.lower.data(), run.lower.data() + run.lower.size())},
          {"upper", std::vector<double>(run.upper.data(), run.upper.data() + run.upper.size())},
          {"budget", run.budget},
          {"evaluations", run.evaluations},
          {"status", to_string(run.status)},
          {"seed", run.seed},
          {"trace_columns", {"evaluation", "loss", "best"}},
          {"trace", trace},
          {"result",
           {{"params", to_json(run.best)},
            {"loss", run.best_loss},
            {"start_loss", run.start_loss},
            {"freqs_hz", run.predicted.freqs_hz},
            {"f52", run.predicted.f52()},
            {"in_training_box", run.predicted.in_training_box}}}};
}

nlohmann::json to_json(const CrossValidation& cv) {
  return {{"predicted_hz", cv.predicted},        {"oracle_hz", cv.oracle},
          {"relative_error", cv.relative_error}, {"f52_predicted", cv.f52_predicted},
          {"f52_oracle", cv.f52_oracle},         {"f52_error", cv.f52_error},
          {"max_error", cv.max_error}};
}

}  // namespace vtp
