#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vtp/error.hpp"
#include "vtp/experiments.hpp"

using namespace vtp;

namespace {

SurrogateModel plate_model(std::uint64_t seed) {
  const int d = static_cast<int>(kParamCount), o = static_cast<int>(kModeCount), h = 10;
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
  report.r2_aggregate = 0.99;
  m.mark_trained(report);
  return m;
}

StudyContext quick_context(const SurrogateModel& model) {
  StudyContext ctx;
  ctx.model = &model;
  ctx.workers = 4;
  ctx.nelder_mead.budget = 150;
  return ctx;
}

}  // namespace

TEST_CASE("wave speed of the reference wood") {
  CHECK(wave_speed(400.0, 10.8e9) == doctest::Approx(5196.152422706632));
  CHECK(wave_speed(4.0, 16.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(wave_speed(0.0, 1.0), Error);
  CHECK_THROWS_AS(wave_speed(1.0, -1.0), Error);
}

TEST_CASE("linear fit recovers exact and noisy lines") {
  const LinearFit exact = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(exact.slope == doctest::Approx(2.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.r_squared == doctest::Approx(1.0));
  CHECK(exact.correlation == doctest::Approx(1.0));

  const LinearFit falling = linear_fit({0, 1, 2}, {2, 1, 0});
  CHECK(falling.correlation == doctest::Approx(-1.0));

  // y = x + (1, -1, -1, 1): slope 1, residual SS 4, total SS 5 + 4.
  const LinearFit noisy = linear_fit({0, 1, 2, 3}, {1, 0, 1, 4});
  CHECK(noisy.slope == doctest::Approx(1.0));
  CHECK(noisy.intercept == doctest::Approx(0.0));
  CHECK(noisy.r_squared == doctest::Approx(1.0 - 4.0 / 9.0));
}

TEST_CASE("table CSV and column extraction") {
  Table t;
  t.columns = {"name", "value"};
  t.rows.push_back({"a", 1.5});
  t.rows.push_back({"b", 2});
  CHECK(t.to_csv() == "name,value\na,1.5\nb,2\n");
  const auto v = t.column("value");
  CHECK(v[0] == 1.5);
  CHECK(v[1] == 2.0);
  CHECK(std::isnan(t.column("name")[0]));
  CHECK_THROWS_AS(t.column("missing"), Error);
}

TEST_CASE("report files are written") {
  StudyReport r;
  r.id = "demo";
  r.summary = {{"x", 1}};
  r.tables["runs"].columns = {"k"};
  r.tables["runs"].rows.push_back({3});
  r.outlines["reference"] = outline_polyline(PlateParams::reference(), ReferencePlate::violin(), 64);
  const auto dir = std::filesystem::temp_directory_path() / "vtp_test_report";
  std::filesystem::remove_all(dir);
  r.write(dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "runs.csv"));
  CHECK(std::filesystem::exists(dir / "outlines.json"));
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("study") == "demo");
  CHECK(j.at("tables").at("runs").at("rows")[0][0] == 3);
  CHECK(r.outlines["reference"].size() == 64);
  std::filesystem::remove_all(dir);
}

TEST_CASE("equivalence study without perturbation has zero error") {
  const SurrogateModel model = plate_model(3);
  const StudyReport r = study_equivalence(quick_context(model), {0.0}, 2);
  for (const char* dir : {"thickness_compensation", "outline_compensation"}) {
    for (const char* e : {"e3", "e4"}) {
      CHECK(r.summary.at("mean_final").at(dir).at(e).at("0").get<double>() == 0.0);
    }
  }
  CHECK(r.tables.at("equivalence_runs").rows.size() == 8);
  for (double evals : r.tables.at("equivalence_runs").column("evaluations")) CHECK(evals <= 150.0);
}

TEST_CASE("equivalence study is reproducible and loss never increases") {
  const SurrogateModel model = plate_model(4);
  const StudyContext ctx = quick_context(model);
  const StudyReport a = study_equivalence(ctx, {0.05}, 3);
  const StudyReport b = study_equivalence(ctx, {0.05}, 3);
  CHECK(a.to_json() == b.to_json());
  const Table& t = a.tables.at("equivalence_runs");
  const auto start = t.column("start_loss"), final_loss = t.column("final_loss");
  for (std::size_t i = 0; i < start.size(); ++i) CHECK(final_loss[i] <= start[i]);
}

TEST_CASE("material study aggregates and zero sigma baseline") {
  const SurrogateModel model = plate_model(5);
  const StudyReport zero = study_material(quick_context(model), 0.0, 2);
  CHECK(zero.summary.at("mean_e3").at("baseline").get<double>() == 0.0);
  CHECK(zero.summary.at("mean_e3").at("outline+thickness").get<double>() == 0.0);

  const StudyReport r = study_material(quick_context(model), 0.2, 3);
  const auto& means = r.summary.at("mean_e3");
  CHECK(means.at("outline+thickness").get<double>() <= means.at("baseline").get<double>());
  CHECK(r.tables.at("material_runs").rows.size() == 12);
  CHECK(r.tables.at("material").rows.size() == 4);
  CHECK(r.summary.at("normalized_spectra").at("outline").at("mean").size() == kModeCount);
}

TEST_CASE("grid study centre cell is already optimal") {
  const SurrogateModel model = plate_model(6);
  const StudyReport r = study_density_modulus_grid(quick_context(model), 3, 0.1);
  CHECK(r.tables.at("grid").rows.size() == 9);
  CHECK(r.summary.at("center_e3").get<double>() == 0.0);
  CHECK(r.summary.at("wave_speed_reference").get<double>() ==
        doctest::Approx(wave_speed(MaterialParams::sitka_spruce().rho, MaterialParams::sitka_spruce().e_long)));
  CHECK_THROWS_AS(study_density_modulus_grid(quick_context(model), 4, 0.1), Error);
}

TEST_CASE("single mode study covers every mode in both directions") {
  const SurrogateModel model = plate_model(7);
  const StudyReport r = study_single_modes(quick_context(model), 0.02);
  CHECK(r.summary.at("mean_displacement_m").size() == kModeCount);
  CHECK(r.summary.at("modes_by_displacement").size() == kModeCount);
  CHECK(r.summary.at("all_within_budget").get<bool>());
}

TEST_CASE("studies refuse an unreliable model unless allowed") {
  SurrogateModel model = plate_model(8);
  FitReport poor;
  poor.r2_aggregate = 0.5;
  model.mark_trained(poor);
  StudyContext ctx = quick_context(model);
  try {
    study_equivalence(ctx, {0.0}, 1);
    FAIL("expected GateFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GateFailed);
  }
  ctx.allow_unreliable = true;
  CHECK_NOTHROW(study_equivalence(ctx, {0.0}, 1));
}
