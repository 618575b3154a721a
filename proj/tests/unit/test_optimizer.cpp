#include <doctest.h>

#include <cmath>
#include <random>

#include "vtp/error.hpp"
#include "vtp/optimizer.hpp"

using namespace vtp;

namespace {

Spectrum ramp(double scale = 1.0) {
  Spectrum f{};
  for (std::size_t i = 0; i < kModeCount; ++i) f[i] = scale * (100.0 + 60.0 * static_cast<double>(i));
  return f;
}

// Plate-shaped network with smooth random weights and a passing fit report.
SurrogateModel plate_model(std::uint64_t seed, double r2 = 0.99) {
  const int d = static_cast<int>(kParamCount), o = static_cast<int>(kModeCount), h = 12;
  SurrogateModel m(d, o, h, seed);
  const auto ref = PlateParams::reference().to_vector();
  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(ref.data(), d);
  Eigen::VectorXd std = (0.05 * mean.array()).matrix();
  Eigen::VectorXd out_mean(o), out_std(o);
  for (int i = 0; i < o; ++i) {
    out_mean(i) = 120.0 + 60.0 * i;
    out_std(i) = 4.0 + 0.5 * i;
  }
  m.set_normalization({mean, std}, {out_mean, out_std});
  m.set_reference_input(mean);
  FitReport report;
  report.r2_aggregate = r2;
  m.mark_trained(report);
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("loss functions on known inputs") {
  Spectrum f = ramp();
  f[4] = 2.3 * f[1];
  CHECK(loss_eval(LossSpec::ratio(2.3), f) == 0.0);
  f[4] = 2.57 * f[1];
  CHECK(loss_eval(LossSpec::ratio(2.3), f) == doctest::Approx(0.0729).epsilon(1e-12));

  const Spectrum ref = ramp();
  const Spectrum shifted = ramp(1.1);
  CHECK(loss_eval(LossSpec::mean_shift(ref), shifted) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(loss_eval(LossSpec::spectrum(ref), shifted) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(loss_eval(LossSpec::spectrum(ref), ref) == 0.0);

  Spectrum g = ref;
  g[2] += 7.0;
  CHECK(loss_eval(LossSpec::mode_target(3, ref[2]), g) == doctest::Approx(49.0));
  CHECK(loss_eval(LossSpec::mode_target(3, ref[2]), ref) == 0.0);
}

TEST_CASE("loss spec validation and JSON") {
  CHECK_THROWS_AS(LossSpec::ratio(-1.0).validate(), Error);
  CHECK_THROWS_AS(LossSpec::mode_target(11, 100.0).validate(), Error);
  CHECK_THROWS_AS(LossSpec::mode_target(0, 100.0).validate(), Error);
  Spectrum bad = ramp();
  bad[3] = 0.0;
  CHECK_THROWS_AS(LossSpec::spectrum(bad).validate(), Error);
  const LossSpec s = LossSpec::mode_target(5, 321.0);
  const LossSpec back = loss_spec_from_json(to_json(s));
  CHECK(back.kind == LossKind::ModeTarget);
  CHECK(back.mode == 5);
  CHECK(back.beta == 321.0);
  CHECK_THROWS_AS(loss_spec_from_json(nlohmann::json{{"kind", "spectrum"}, {"f_ref", {1, 2}}}), Error);
  CHECK_THROWS_AS(loss_spec_from_json(nlohmann::json{{"kind", "bogus"}}), Error);
}

TEST_CASE("sine-squared transform round trips and stays in the box") {
  const BoxTransform box{vec({0.8, -2.0, 10.0}), vec({1.2, 3.0, 10.5})};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = box.lb(i) + u(rng) * (box.ub(i) - box.lb(i));
    CHECK((box.to_box(box.from_box(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
  }
  std::normal_distribution<double> wide(0.0, 100.0);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd z = vec({wide(rng), wide(rng), wide(rng)});
    const Eigen::VectorXd x = box.to_box(z);
    for (int i = 0; i < 3; ++i) {
      CHECK(x(i) >= box.lb(i));
      CHECK(x(i) <= box.ub(i));
    }
  }
  CHECK((box.to_box(box.from_box(box.lb)) - box.lb).norm() == 0.0);
  CHECK((box.to_box(box.from_box(box.ub)) - box.ub).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("one-dimensional quadratics, interior and clamped") {
  const auto interior = minimize([](const Eigen::VectorXd& x) { return (x(0) - 1.1) * (x(0) - 1.1); }, vec({1.0}),
                                 vec({0.8}), vec({1.2}));
  CHECK(std::abs(interior.x(0) - 1.1) < 1e-5);
  CHECK(interior.evaluations < 200);
  CHECK(interior.status == Termination::Converged);

  const auto clamped = minimize([](const Eigen::VectorXd& x) { return (x(0) - 1.5) * (x(0) - 1.5); }, vec({1.0}),
                                vec({0.8}), vec({1.2}));
  CHECK(clamped.x(0) == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(clamped.evaluations <= 200);
}

TEST_CASE("bounded Rosenbrock matches a grid search over the box") {
  auto rosen = [](double x, double y) { return 100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x); };
  const Eigen::VectorXd lb = vec({0.72, 0.72}), ub = vec({1.08, 1.08});
  double grid_best = std::numeric_limits<double>::infinity();
  const int steps = 2000;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j) {
      const double x = lb(0) + (ub(0) - lb(0)) * i / steps;
      const double y = lb(1) + (ub(1) - lb(1)) * j / steps;
      grid_best = std::min(grid_best, rosen(x, y));
    }
  const auto r = minimize([&](const Eigen::VectorXd& v) { return rosen(v(0), v(1)); }, vec({0.9, 0.9}), lb, ub);
  CHECK(std::abs(r.loss - grid_best) < 1e-3);
  CHECK(r.evaluations <= 400);

  // Shifted so the minimum sits on the boundary.
  auto shifted = [&](const Eigen::VectorXd& v) { return rosen(v(0) - 0.2, v(1) - 0.25); };
  double shifted_grid = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j) {
      const double x = lb(0) + (ub(0) - lb(0)) * i / steps;
      const double y = lb(1) + (ub(1) - lb(1)) * j / steps;
      shifted_grid = std::min(shifted_grid, rosen(x - 0.2, y - 0.25));
    }
  const auto s = minimize(shifted, vec({0.9, 0.9}), lb, ub);
  CHECK(std::abs(s.loss - shifted_grid) < 1e-3);
}

TEST_CASE("every evaluation respects bounds and budget, and the best trace is monotone") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int dim : {1, 3, 8, 20}) {
    Eigen::VectorXd x0(dim), lb(dim), ub(dim), target(dim);
    for (int i = 0; i < dim; ++i) {
      x0(i) = u(rng);
      lb(i) = 0.8 * x0(i);
      ub(i) = 1.2 * x0(i);
      target(i) = 1.5 * u(rng);
    }
    bool inside = true;
    auto f = [&](const Eigen::VectorXd& x) {
      for (int i = 0; i < dim; ++i) inside = inside && x(i) >= lb(i) && x(i) <= ub(i);
      double s = 0.0;
      for (int i = 0; i + 1 < dim; ++i) s += 100.0 * std::pow(x(i + 1) - x(i) * x(i), 2);
      return s + (x - target).squaredNorm() + 0.1 * std::sin(20.0 * x.sum());
    };
    const auto r = minimize(f, x0, lb, ub);
    CHECK(inside);
    CHECK(r.evaluations <= 200L * dim);
    CHECK(static_cast<long>(r.trace.size()) == r.evaluations);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].best <= r.trace[k - 1].best);
    CHECK(r.trace.back().best == r.loss);
  }
}

TEST_CASE("a small budget is never exceeded, even inside a shrink") {
  for (long budget = 1; budget < 40; ++budget) {
    NelderMeadOptions opts;
    opts.budget = budget;
    long calls = 0;
    const auto r = minimize(
        [&](const Eigen::VectorXd& x) {
          ++calls;
          return std::abs(std::sin(13.0 * x(0)) * std::cos(7.0 * x(1)));
        },
        vec({1.0, 1.0}), vec({0.8, 0.8}), vec({1.2, 1.2}), opts);
    CHECK(calls <= budget);
    CHECK(r.evaluations == calls);
  }
}

TEST_CASE("NaN objective aborts") {
  try {
    minimize([](const Eigen::VectorXd&) { return std::nan(""); }, vec({1.0}), vec({0.8}), vec({1.2}));
    FAIL("expected ObjectiveNaN");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ObjectiveNaN);
  }
}

TEST_CASE("free variable selectors") {
  CHECK(FreeVars::outline().size() == 20);
  CHECK(FreeVars::thickness().size() == 8);
  CHECK(FreeVars::outline_and_thickness().size() == 28);
  CHECK(FreeVars::parse("thickness").indices.front() == 20);
  CHECK(FreeVars::parse("p3,t0,rho").indices == std::vector<int>{3, 20, 28});
  CHECK(FreeVars::parse("p3,t0,rho").describe() == "p3,t0,rho");
  CHECK(FreeVars::parse("outline+thickness").describe() == "outline+thickness");
  CHECK_THROWS_AS(FreeVars::parse("p3,p3"), Error);
  CHECK_THROWS_AS(FreeVars::parse("q7"), Error);
  CHECK_THROWS_AS(FreeVars::parse("35"), Error);
}

TEST_CASE("design optimization fixed points") {
  const SurrogateModel m = plate_model(5);
  const PlateParams start = PlateParams::reference();
  const Prediction p0 = m.predict(start);

  const OptimizationRun ratio = optimize_design(m, LossSpec::ratio(p0.f52()), start, FreeVars::outline());
  CHECK(ratio.best_loss == 0.0);
  CHECK(ratio.evaluations == 1);
  CHECK(ratio.status == Termination::StartOptimal);
  CHECK(ratio.best == start);

  const OptimizationRun same = optimize_design(m, LossSpec::spectrum(p0.freqs_hz), start, FreeVars::outline());
  CHECK(same.best_loss == 0.0);
  CHECK(same.best == start);
}

TEST_CASE("moving a single mode improves it for every mode index") {
  const SurrogateModel m = plate_model(9);
  const PlateParams start = PlateParams::reference();
  const Prediction p0 = m.predict(start);
  for (int mode = 1; mode <= 10; ++mode) {
    const double beta = 1.05 * p0.freqs_hz[static_cast<std::size_t>(mode - 1)];
    const OptimizationRun run = optimize_design(m, LossSpec::mode_target(mode, beta), start, FreeVars::outline());
    const double before = std::abs(p0.freqs_hz[static_cast<std::size_t>(mode - 1)] - beta) / beta;
    const double after = std::abs(run.predicted.freqs_hz[static_cast<std::size_t>(mode - 1)] - beta) / beta;
    CHECK(after < before);
    CHECK(run.evaluations <= 4000);
    const auto v = run.best.to_vector();
    const auto s = start.to_vector();
    for (std::size_t i = 0; i < kParamCount; ++i) {
      CHECK(v[i] >= 0.8 * s[i] - 1e-12);
      CHECK(v[i] <= 1.2 * s[i] + 1e-12);
    }
  }
}

TEST_CASE("optimization trace is streamed and the record serializes") {
  const SurrogateModel m = plate_model(13);
  std::vector<TracePoint> seen;
  const OptimizationRun run = optimize_design(m, LossSpec::ratio(2.0), PlateParams::reference(),
                                              FreeVars::thickness(), {}, [&](const TracePoint& p) {
                                                seen.push_back(p);
                                              });
  CHECK(seen.size() == run.trace.size());
  CHECK(run.budget == 1600);
  CHECK(run.evaluations <= run.budget);
  const nlohmann::json j = to_json(run);
  CHECK(j["free_vars"] == "thickness");
  CHECK(j["trace"].size() == run.trace.size());
  CHECK(j["result"]["freqs_hz"].size() == 10);
}

TEST_CASE("the gate blocks optimization with an unreliable model") {
  const SurrogateModel m = plate_model(21, 0.5);
  try {
    optimize_design(m, LossSpec::ratio(2.0), PlateParams::reference(), FreeVars::outline());
    FAIL("expected GateFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GateFailed);
  }
  DesignOptions opts;
  opts.allow_unreliable = true;
  CHECK_NOTHROW(optimize_design(m, LossSpec::ratio(2.0), PlateParams::reference(), FreeVars::outline(), opts));
}

TEST_CASE("cross-validation of a garbage model reports large errors without failing") {
  const SurrogateModel m = plate_model(33);
  DesignOptions opts;
  opts.nelder_mead.budget = 30;
  const OptimizationRun run = optimize_design(m, LossSpec::ratio(2.0), PlateParams::reference(),
                                              FreeVars::outline(), opts);
  const CrossValidation cv = cross_validate(run);
  CHECK(cv.max_error > 0.01);
  for (double e : cv.relative_error) CHECK(std::isfinite(e));
  CHECK(cv.f52_oracle > 1.0);
}

TEST_CASE("compare_spectra arithmetic") {
  const Spectrum oracle = ramp();
  Spectrum pred = oracle;
  pred[1] *= 1.02;
  const CrossValidation cv = compare_spectra(pred, oracle);
  CHECK(cv.relative_error[1] == doctest::Approx(0.02));
  CHECK(cv.relative_error[0] == 0.0);
  CHECK(cv.f52_error == doctest::Approx(1.0 - 1.0 / 1.02).epsilon(1e-12));
}
