#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "vtp/dataset.hpp"
#include "vtp/surrogate.hpp"

using namespace vtp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
  std::string err;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "vtp_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(VTP_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  Outcome o;
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

std::string last_line(const std::string& text) {
  auto end = text.find_last_not_of('\n');
  if (end == std::string::npos) return {};
  const auto start = text.rfind('\n', end);
  return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

std::string model_file(double r2) {
  const int d = static_cast<int>(kParamCount), o = static_cast<int>(kModeCount);
  SurrogateModel m(d, o, 8, 3);
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
  const fs::path path = work_dir() / (r2 > 0.9 ? "good_model.json" : "poor_model.json");
  m.save(path);
  return path.string();
}

}  // namespace

TEST_CASE("usage errors exit with status 2 and a JSON line") {
  for (const char* args : {"", "bogus", "predict --nope 1", "optimize --budget abc"}) {
    CAPTURE(args);
    const Outcome o = run(args);
    CHECK(o.status == 2);
    const json j = json::parse(last_line(o.err));
    CHECK(j.at("error") == "UsageError");
    CHECK(j.contains("message"));
  }
  CHECK(run("--help").status == 0);
  CHECK(run("study --help").status == 0);
}

TEST_CASE("missing inputs exit with status 1") {
  const Outcome o = run("predict --model /nonexistent/model.json");
  CHECK(o.status == 1);
  CHECK(json::parse(last_line(o.err)).at("error") == "IoError");
}

TEST_CASE("predict prints the spectrum of the reference plate") {
  const std::string model = model_file(0.99);
  const Outcome o = run("predict --model " + model);
  REQUIRE(o.status == 0);
  const json j = json::parse(o.out);
  const Prediction expected = SurrogateModel::load(model).predict(PlateParams::reference());
  CHECK(j.at("freqs_hz").size() == kModeCount);
  CHECK(j.at("freqs_hz")[0].get<double>() == doctest::Approx(expected.freqs_hz[0]));
  CHECK(j.at("f52").get<double>() == doctest::Approx(expected.f52()));
  CHECK(j.at("in_training_box") == true);

  const fs::path params = work_dir() / "params.json";
  PlateParams p = PlateParams::reference();
  p.thickness.t[0] = 1.1;
  std::ofstream(params) << to_json(p).dump();
  const json k = json::parse(run("predict --model " + model + " --params " + params.string()).out);
  CHECK(k.at("f52").get<double>() == doctest::Approx(SurrogateModel::load(model).predict(p).f52()));
}

TEST_CASE("optimize writes a run record and honours the budget") {
  const std::string model = model_file(0.99);
  const fs::path record = work_dir() / "run.json";
  fs::remove(record);
  const std::string args = "optimize --model " + model + " --loss ratio --alpha 1.9 --budget 300 --seed 5 --out " +
                           record.string();
  const Outcome o = run(args);
  REQUIRE(o.status == 0);
  const json summary = json::parse(o.out);
  CHECK(summary.at("evaluations").get<long>() <= 300);
  CHECK(summary.at("seed") == 5);
  CHECK(summary.at("loss").get<double>() <= summary.at("start_loss").get<double>());
  CHECK(fs::exists(record));

  const Outcome again = run(args);
  CHECK(again.status == 1);
  CHECK(json::parse(last_line(again.err)).at("error") == "IoError");
  const Outcome forced = run(args + " --force");
  CHECK(forced.status == 0);
  CHECK(forced.out == o.out);

  CHECK(run("optimize --model " + model + " --budget 5000").status == 1);
  CHECK(run("optimize --model " + model + " --loss mode --mode 3 --beta 300 --budget 50").status == 0);
  CHECK(run("optimize --model " + model + " --loss spectrum --free thickness --budget 50").status == 0);
  CHECK(run("optimize --model " + model + " --loss spectrum --f-ref 1,2,3 --budget 50").status == 2);
}

TEST_CASE("unreliable models exit with status 3 unless allowed") {
  const std::string model = model_file(0.5);
  const Outcome o = run("optimize --model " + model + " --budget 20");
  CHECK(o.status == 3);
  CHECK(json::parse(last_line(o.err)).at("error") == "GateFailed");
  CHECK(run("optimize --model " + model + " --budget 20 --allow-unreliable").status == 0);
  CHECK(run("study equivalence --model " + model + " --out " + (work_dir() / "eq_poor").string()).status == 3);
}

TEST_CASE("config file supplies defaults that flags override") {
  const std::string model = model_file(0.99);
  const fs::path config = work_dir() / "config.json";
  std::ofstream(config) << json{{"common", {{"workers", 1}}},
                                {"optimize", {{"model", model}, {"budget", 40}, {"alpha", 2.1}}}}
                               .dump();
  const json from_config = json::parse(run("--config " + config.string() + " optimize").out);
  CHECK(from_config.at("budget") == 40);
  const json overridden = json::parse(run("--config " + config.string() + " optimize --budget 60").out);
  CHECK(overridden.at("budget") == 60);

  std::ofstream(config) << "{broken";
  CHECK(run("--config " + config.string() + " optimize").status == 2);
}

TEST_CASE("study subcommand writes a report directory") {
  const std::string model = model_file(0.99);
  const fs::path out = work_dir() / "eq";
  const std::string args = "study equivalence --model " + model + " --sigmas 0 --replicates 2 --out " + out.string();
  const Outcome o = run(args);
  REQUIRE(o.status == 0);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "equivalence.csv"));
  const json summary = json::parse(o.out).at("summary");
  CHECK(summary.at("mean_final").at("outline_compensation").at("e3").at("0").get<double>() == 0.0);
  CHECK(run(args).status == 1);
  CHECK(run(args + " --force").status == 0);
  CHECK(run("study nonsense --model " + model + " --out " + out.string()).status == 2);
}

TEST_CASE("dataset, training and cross-validation pipeline") {
  const fs::path data = work_dir() / "data.jsonl";
  const Outcome gen = run("gen-dataset --n 100 --sigma 0.05 --seed 9 --out " + data.string());
  REQUIRE(gen.status == 0);
  const json g = json::parse(gen.out);
  CHECK(g.at("n") == 100);
  CHECK(g.at("test") == 10);
  CHECK(g.at("fingerprint") == fingerprint(load_jsonl(data)));
  CHECK(gen.err.find("labelled 100/100") != std::string::npos);

  const fs::path model = work_dir() / "trained.json";
  const Outcome tr = run("train --dataset " + data.string() + " --width 3 --epochs 20 --out " + model.string() +
                         " --allow-unreliable");
  REQUIRE(tr.status == 0);
  const json report = json::parse(tr.out);
  CHECK(report.at("epochs").get<int>() <= 20);
  CHECK(report.contains("r2_aggregate"));
  CHECK(fs::exists(model));

  const fs::path strict = work_dir() / "strict.json";
  const Outcome gated = run("train --dataset " + data.string() + " --width 3 --epochs 20 --out " + strict.string());
  if (report.at("r2_aggregate").get<double>() > 0.9) {
    CHECK(gated.status == 0);
  } else {
    CHECK(gated.status == 3);
    CHECK_FALSE(fs::exists(strict));
  }
  CHECK(run("train --dataset " + data.string() + " --epochs 101 --out " + strict.string()).status == 1);

  const fs::path record = work_dir() / "pipeline_run.json";
  REQUIRE(run("optimize --model " + model.string() + " --allow-unreliable --budget 100 --out " + record.string())
              .status == 0);
  const Outcome cv = run("cross-validate --run " + record.string());
  REQUIRE(cv.status == 0);
  const json c = json::parse(cv.out);
  CHECK(c.at("oracle_hz").size() == kModeCount);
  CHECK(c.at("f52_oracle").get<double>() > 1.0);
}

TEST_CASE("shipped defaults file is accepted") {
  const std::string model = model_file(0.99);
  const Outcome o = run(std::string("--config ") + VTP_SOURCE_DIR + "/config/defaults.json optimize --model " + model +
                        " --budget 30");
  CHECK(o.status == 0);
  CHECK(json::parse(o.out).at("budget") == 30);
}
