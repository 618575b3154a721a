#include "vtp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "vtp/error.hpp"
#include "vtp/parallel.hpp"
#include "vtp/rng.hpp"

namespace vtp {

namespace {

const SurrogateModel& gated_model(const StudyContext& ctx) {
  if (ctx.model == nullptr) throw Error(ErrorCode::NotTrained, "study needs a trained surrogate");
  if (!ctx.allow_unreliable) ctx.model->require_reliable();
  return *ctx.model;
}

DesignOptions design_options(const StudyContext& ctx) {
  DesignOptions o;
  o.nelder_mead = ctx.nelder_mead;
  o.allow_unreliable = true;
  return o;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double safe_area(const PlateParams& params, const ReferencePlate& ref) {
  try {
    return area(realize(params, ref));
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double safe_width(const PlateParams& params, const ReferencePlate& ref) {
  try {
    return mean_bout_width(realize(params, ref), ref);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

bool touches_bounds(const OptimizationRun& run) {
  const auto v = run.best.to_vector();
  for (std::size_t k = 0; k < run.free.size(); ++k) {
    const double x = v[static_cast<std::size_t>(run.free.indices[k])];
    const double width = run.upper(static_cast<Eigen::Index>(k)) - run.lower(static_cast<Eigen::Index>(k));
    if (x - run.lower(static_cast<Eigen::Index>(k)) < 1e-3 * width ||
        run.upper(static_cast<Eigen::Index>(k)) - x < 1e-3 * width) {
      return true;
    }
  }
  return false;
}

// Mean distance between the realized control points and the reference ones.
double control_point_displacement(const PlateParams& params, const ReferencePlate& ref) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kOutlineCount; ++i) {
    const Vec2 c = ref.control_points[i];
    sum += std::abs(params.outline.p[i] - 1.0) * std::hypot(c.x, c.y);
  }
  return sum / static_cast<double>(kOutlineCount);
}

nlohmann::json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

std::string fmt_key(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string Table::to_csv() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << '\n';
  }
  return os.str();
}

std::vector<double> Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorCode::InvalidParams, "no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    out.push_back(row[c].is_number() ? row[c].get<double>() : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json tables_json = nlohmann::json::object();
  for (const auto& [name, table] : tables) tables_json[name] = {{"columns", table.columns}, {"rows", table.rows}};
  return {{"study", id}, {"config", config}, {"summary", summary}, {"tables", tables_json}};
}

void StudyReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
  };
  put(dir / "report.json", to_json().dump(2) + "\n");
  for (const auto& [name, table] : tables) put(dir / (name + ".csv"), table.to_csv());
  if (!outlines.empty()) put(dir / "outlines.json", outlines.dump() + "\n");
}

double wave_speed(double rho, double e_long) {
  if (!(rho > 0.0) || !(e_long > 0.0)) throw Error(ErrorCode::InvalidParams, "density and modulus must be positive");
  return std::sqrt(e_long / rho);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidParams, "linear fit needs paired samples");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateVariance, "linear fit on a constant series");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.correlation = sxy / std::sqrt(sxx * syy);
  fit.r_squared = fit.correlation * fit.correlation;
  return fit;
}

nlohmann::json outline_polyline(const PlateParams& params, const ReferencePlate& ref, int samples) {
  const PlateGeometry g = realize(params, ref, samples);
  nlohmann::json pts = nlohmann::json::array();
  for (const Vec2& p : g.boundary) pts.push_back({p.x, p.y});
  return pts;
}

StudyReport study_ratio(const StudyContext& ctx, const std::vector<double>& alphas) {
  const SurrogateModel& model = gated_model(ctx);
  const PlateParams start = PlateParams::reference();
  const Prediction ref_pred = model.predict(start);
  const ModalResult ref_oracle = oracle_spectrum(start, ctx.oracle, ctx.ref);

  struct Outcome {
    OptimizationRun run;
    CrossValidation cv;
  };
  std::vector<Outcome> out(alphas.size());
  parallel_for(alphas.size(), ctx.workers, [&](std::size_t k) {
    out[k].run = optimize_design(model, LossSpec::ratio(alphas[k]), start, FreeVars::outline(), design_options(ctx));
    out[k].cv = cross_validate(out[k].run, ctx.oracle, ctx.ref);
  });

  StudyReport report;
  report.id = "ratio";
  report.config = {{"alphas", alphas},
                   {"free_vars", "outline"},
                   {"oracle_resolution", ctx.oracle.resolution},
                   {"seed", ctx.seed}};
  Table& t = report.tables["ratio"];
  t.columns = {"alpha",  "f52_predicted", "f52_oracle", "f52_error", "target_gap", "boundary_limited",
               "width_m", "area_m2",      "loss",       "evaluations", "status"};
  const double ref_width = safe_width(start, ctx.ref);
  std::vector<double> widths{ref_width}, ratios{ref_pred.f52()};
  report.outlines["reference"] = outline_polyline(start, ctx.ref);
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const auto& o = out[k];
    const double gap = std::abs(o.run.predicted.f52() - alphas[k]);
    const bool limited = gap >= 0.01 && touches_bounds(o.run);
    const double width = safe_width(o.run.best, ctx.ref);
    t.rows.push_back({alphas[k], o.run.predicted.f52(), o.cv.f52_oracle, o.cv.f52_error, gap, limited, num(width),
                      num(safe_area(o.run.best, ctx.ref)), o.run.best_loss, o.run.evaluations,
                      to_string(o.run.status)});
    widths.push_back(width);
    ratios.push_back(o.run.predicted.f52());
    report.outlines["alpha_" + fmt_key(alphas[k])] = outline_polyline(o.run.best, ctx.ref);
    runs.push_back({{"alpha", alphas[k]}, {"run", to_json(o.run)}, {"cross_validation", to_json(o.cv)}});
  }
  double correlation = std::numeric_limits<double>::quiet_NaN();
  try {
    correlation = linear_fit(widths, ratios).correlation;
  } catch (const Error&) {
  }
  report.summary = {{"reference_f52_predicted", ref_pred.f52()},
                    {"reference_f52_oracle", ref_oracle.freqs_hz[4] / ref_oracle.freqs_hz[1]},
                    {"reference_width_m", num(ref_width)},
                    {"width_f52_correlation", num(correlation)},
                    {"f52_increases_with_width", correlation > 0.0},
                    {"runs", runs}};
  return report;
}

StudyReport study_single_modes(const StudyContext& ctx, double delta) {
  const SurrogateModel& model = gated_model(ctx);
  const PlateParams start = PlateParams::reference();
  const Prediction ref_pred = model.predict(start);
  constexpr int kRuns = 2 * static_cast<int>(kModeCount);
  std::vector<OptimizationRun> runs(kRuns);
  parallel_for(kRuns, ctx.workers, [&](std::size_t k) {
    const int mode = static_cast<int>(k / 2) + 1;
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    const double beta = ref_pred.freqs_hz[static_cast<std::size_t>(mode - 1)] * (1.0 + sign * delta);
    runs[k] = optimize_design(model, LossSpec::mode_target(mode, beta), start, FreeVars::outline(),
                              design_options(ctx));
  });

  StudyReport report;
  report.id = "single_modes";
  report.config = {{"delta", delta}, {"free_vars", "outline"}, {"seed", ctx.seed}};
  Table& t = report.tables["single_modes"];
  t.columns = {"mode", "sign", "beta_hz", "achieved_hz", "achieved_shift", "target_gap", "displacement_m",
               "evaluations", "budget", "status"};
  std::array<double, kModeCount> displacement{};
  std::array<double, kModeCount> achieved{};
  bool within_budget = true;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const OptimizationRun& r = runs[k];
    const auto mode = static_cast<std::size_t>(r.spec.mode);
    const double f = r.predicted.freqs_hz[mode - 1];
    const double f0 = ref_pred.freqs_hz[mode - 1];
    const double d = control_point_displacement(r.best, ctx.ref);
    displacement[mode - 1] += 0.5 * d;
    achieved[mode - 1] += 0.5 * std::abs(f / f0 - 1.0);
    within_budget = within_budget && r.evaluations <= r.budget;
    t.rows.push_back({static_cast<int>(mode), k % 2 == 0 ? "+" : "-", r.spec.beta, f, f / f0 - 1.0,
                      std::abs(f - r.spec.beta) / r.spec.beta, d, r.evaluations, r.budget, to_string(r.status)});
    report.outlines["mode" + std::to_string(mode) + (k % 2 == 0 ? "_up" : "_down")] = outline_polyline(r.best, ctx.ref);
  }
  report.outlines["reference"] = outline_polyline(start, ctx.ref);
  std::vector<int> order(kModeCount);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return displacement[a - 1] > displacement[b - 1]; });
  report.summary = {{"mean_displacement_m", displacement},
                    {"mean_abs_shift", achieved},
                    {"modes_by_displacement", order},
                    {"mode1_moves_more_than_mode2", displacement[0] > displacement[1]},
                    {"all_within_budget", within_budget}};
  return report;
}

StudyReport study_equivalence(const StudyContext& ctx, const std::vector<double>& sigmas, int replicates) {
  const SurrogateModel& model = gated_model(ctx);
  if (replicates < 1) throw Error(ErrorCode::InvalidParams, "replicates must be positive");
  const PlateParams ref = PlateParams::reference();
  const Spectrum f_ref = model.predict(ref).freqs_hz;
  const char* directions[] = {"thickness_compensation", "outline_compensation"};
  const char* errors[] = {"e3", "e4"};

  struct Task {
    std::size_t sigma;
    int replicate;
    int direction;
    int error;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < sigmas.size(); ++s)
    for (int r = 0; r < replicates; ++r)
      for (int d = 0; d < 2; ++d)
        for (int e = 0; e < 2; ++e) tasks.push_back({s, r, d, e});

  struct Outcome {
    std::uint64_t seed = 0;
    double start_loss = 0.0;
    double final_loss = 0.0;
    long evaluations = 0;
  };
  std::vector<Outcome> out(tasks.size());
  parallel_for(tasks.size(), ctx.workers, [&](std::size_t k) {
    const Task& task = tasks[k];
    const std::uint64_t seed = mix_seed(ctx.seed, task.sigma * 100000 + static_cast<std::size_t>(task.replicate));
    const bool thickness_free = task.direction == 0;
    const FamilySelector perturbed = FamilySelector{} | (thickness_free ? Family::Outline : Family::Thickness);
    const PlateParams start = perturb(ref, perturbed, sigmas[task.sigma], seed);
    const LossSpec spec = task.error == 0 ? LossSpec::spectrum(f_ref) : LossSpec::mean_shift(f_ref);
    const OptimizationRun run = optimize_design(
        model, spec, start, thickness_free ? FreeVars::thickness() : FreeVars::outline(), design_options(ctx));
    out[k] = {seed, run.start_loss, run.best_loss, run.evaluations};
  });

  StudyReport report;
  report.id = "equivalence";
  report.config = {{"sigmas", sigmas}, {"replicates", replicates}, {"seed", ctx.seed}, {"target", f_ref}};
  Table& rows = report.tables["equivalence_runs"];
  rows.columns = {"sigma", "replicate", "direction", "error", "seed", "start_loss", "final_loss", "evaluations"};
  std::map<std::tuple<std::size_t, int, int>, std::vector<double>> finals, starts;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& task = tasks[k];
    rows.rows.push_back({sigmas[task.sigma], task.replicate, directions[task.direction], errors[task.error],
                         out[k].seed, out[k].start_loss, out[k].final_loss, out[k].evaluations});
    finals[{task.sigma, task.direction, task.error}].push_back(out[k].final_loss);
    starts[{task.sigma, task.direction, task.error}].push_back(out[k].start_loss);
  }
  Table& agg = report.tables["equivalence"];
  agg.columns = {"sigma", "direction", "error", "mean_final", "std_final", "mean_start", "n"};
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [key, values] : finals) {
    const auto [s, d, e] = key;
    agg.rows.push_back({sigmas[s], directions[d], errors[e], mean(values), stddev(values), mean(starts[key]),
                        values.size()});
    means[directions[d]][errors[e]][fmt_key(sigmas[s])] = mean(values);
  }
  report.summary = {{"mean_final", means}};
  return report;
}

StudyReport study_material(const StudyContext& ctx, double sigma, int replicates) {
  const SurrogateModel& model = gated_model(ctx);
  if (replicates < 1) throw Error(ErrorCode::InvalidParams, "replicates must be positive");
  const PlateParams ref = PlateParams::reference();
  const Spectrum f_ref = model.predict(ref).freqs_hz;
  const char* modes[] = {"thickness", "outline", "outline+thickness"};
  const FreeVars free[] = {FreeVars::thickness(), FreeVars::outline(), FreeVars::outline_and_thickness()};

  struct Outcome {
    std::uint64_t seed = 0;
    double baseline = 0.0;
    std::array<double, 3> eps{};
    std::array<Spectrum, 3> spectra{};
    std::array<long, 3> evaluations{};
  };
  std::vector<Outcome> out(static_cast<std::size_t>(replicates));
  parallel_for(out.size() * 3, ctx.workers, [&](std::size_t k) {
    const std::size_t r = k / 3;
    const std::size_t m = k % 3;
    const std::uint64_t seed = mix_seed(ctx.seed, r);
    const PlateParams start = perturb(ref, FamilySelector{} | Family::Material, sigma, seed);
    const OptimizationRun run =
        optimize_design(model, LossSpec::spectrum(f_ref), start, free[m], design_options(ctx));
    Outcome& o = out[r];
    if (m == 0) {
      o.seed = seed;
      o.baseline = run.start_loss;
    }
    o.eps[m] = run.best_loss;
    o.spectra[m] = run.predicted.freqs_hz;
    o.evaluations[m] = run.evaluations;
  });

  StudyReport report;
  report.id = "material";
  report.config = {{"sigma", sigma}, {"replicates", replicates}, {"seed", ctx.seed}, {"target", f_ref}};
  Table& rows = report.tables["material_runs"];
  rows.columns = {"replicate", "seed", "mode", "e3", "evaluations"};
  for (std::size_t i = 1; i <= kModeCount; ++i) rows.columns.push_back("f" + std::to_string(i) + "_normalized");
  std::vector<double> baseline;
  std::array<std::vector<double>, 3> eps;
  std::array<std::array<std::vector<double>, kModeCount>, 3> normalized;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const Outcome& o = out[r];
    baseline.push_back(o.baseline);
    std::vector<nlohmann::json> base_row{static_cast<int>(r), o.seed, "baseline", o.baseline, 0};
    const Prediction unopt = model.predict(perturb(ref, FamilySelector{} | Family::Material, sigma, o.seed));
    for (std::size_t i = 0; i < kModeCount; ++i) base_row.push_back(unopt.freqs_hz[i] / f_ref[i]);
    rows.rows.push_back(base_row);
    for (int m = 0; m < 3; ++m) {
      eps[m].push_back(o.eps[m]);
      std::vector<nlohmann::json> row{static_cast<int>(r), o.seed, modes[m], o.eps[m], o.evaluations[m]};
      for (std::size_t i = 0; i < kModeCount; ++i) {
        const double v = o.spectra[m][i] / f_ref[i];
        normalized[m][i].push_back(v);
        row.push_back(v);
      }
      rows.rows.push_back(row);
    }
  }
  Table& agg = report.tables["material"];
  agg.columns = {"mode", "mean_e3", "std_e3", "n"};
  agg.rows.push_back({"baseline", mean(baseline), stddev(baseline), baseline.size()});
  nlohmann::json means = {{"baseline", mean(baseline)}};
  nlohmann::json spectra = nlohmann::json::object();
  for (int m = 0; m < 3; ++m) {
    agg.rows.push_back({modes[m], mean(eps[m]), stddev(eps[m]), eps[m].size()});
    means[modes[m]] = mean(eps[m]);
    std::vector<double> mean_spec, std_spec;
    for (std::size_t i = 0; i < kModeCount; ++i) {
      mean_spec.push_back(mean(normalized[m][i]));
      std_spec.push_back(stddev(normalized[m][i]));
    }
    spectra[modes[m]] = {{"mean", mean_spec}, {"std", std_spec}};
  }
  const double full = mean(eps[2]);
  report.summary = {{"mean_e3", means},
                    {"std_e3",
                     {{"baseline", stddev(baseline)},
                      {"thickness", stddev(eps[0])},
                      {"outline", stddev(eps[1])},
                      {"outline+thickness", stddev(eps[2])}}},
                    {"reduction_factor", full > 0.0 ? num(mean(baseline) / full) : nlohmann::json(nullptr)},
                    {"normalized_spectra", spectra}};
  return report;
}

StudyReport study_density_modulus_grid(const StudyContext& ctx, int steps, double span) {
  const SurrogateModel& model = gated_model(ctx);
  if (steps < 3 || steps % 2 == 0) throw Error(ErrorCode::InvalidParams, "grid steps must be odd and at least 3");
  const PlateParams ref = PlateParams::reference();
  const Spectrum f_ref = model.predict(ref).freqs_hz;
  const double c_ref = wave_speed(ref.material.rho, ref.material.e_long);
  const double area_ref = area(realize(ref, ctx.ref));
  auto scale = [&](int i) { return 1.0 - span + 2.0 * span * i / (steps - 1); };

  const auto cells = static_cast<std::size_t>(steps * steps);
  std::vector<OptimizationRun> runs(cells);
  parallel_for(cells, ctx.workers, [&](std::size_t k) {
    const int i = static_cast<int>(k) / steps, j = static_cast<int>(k) % steps;
    PlateParams start = ref;
    start.material.rho *= scale(i);
    start.material.e_long *= scale(j);
    runs[k] = optimize_design(model, LossSpec::spectrum(f_ref), start, FreeVars::outline_and_thickness(),
                              design_options(ctx));
  });

  StudyReport report;
  report.id = "density_modulus_grid";
  report.config = {{"steps", steps}, {"span", span}, {"free_vars", "outline+thickness"}, {"seed", ctx.seed}};
  Table& t = report.tables["grid"];
  t.columns = {"i", "j", "rho_scale", "e_scale", "rho", "e_long", "c", "e3", "start_e3", "area_change", "evaluations"};
  std::vector<double> cs, areas, contour, anti;
  std::vector<double> corners;
  double center = 0.0;
  const int mid = steps / 2;
  for (std::size_t k = 0; k < cells; ++k) {
    const int i = static_cast<int>(k) / steps, j = static_cast<int>(k) % steps;
    const OptimizationRun& r = runs[k];
    const double c = wave_speed(r.start.material.rho, r.start.material.e_long);
    const double a = safe_area(r.best, ctx.ref) / area_ref - 1.0;
    t.rows.push_back({i, j, scale(i), scale(j), r.start.material.rho, r.start.material.e_long, c, r.best_loss,
                      r.start_loss, num(a), r.evaluations});
    if (std::isfinite(a)) {
      cs.push_back(c);
      areas.push_back(a);
    }
    if (i == mid && j == mid) {
      center = r.best_loss;
    } else {
      if (i == j) contour.push_back(r.best_loss);
      if (i + j == steps - 1) anti.push_back(r.best_loss);
    }
    if ((i == 0 || i == steps - 1) && (j == 0 || j == steps - 1)) corners.push_back(r.best_loss);
  }
  nlohmann::json fit_json = nullptr;
  try {
    const LinearFit fit = linear_fit(cs, areas);
    fit_json = {{"slope_per_mps", fit.slope},
                {"intercept", fit.intercept},
                {"r_squared", fit.r_squared},
                {"correlation", fit.correlation}};
  } catch (const Error&) {
  }
  report.summary = {{"wave_speed_reference", c_ref},
                    {"center_e3", center},
                    {"corner_e3", corners},
                    {"contour_mean_e3", mean(contour)},
                    {"off_contour_mean_e3", mean(anti)},
                    {"area_vs_c", fit_json},
                    {"cells_without_area", cells - cs.size()}};
  return report;
}

}  // namespace vtp
