#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "vtp/dataset.hpp"
#include "vtp/error.hpp"
#include "vtp/experiments.hpp"
#include "vtp/optimizer.hpp"
#include "vtp/parallel.hpp"
#include "vtp/service.hpp"
#include "vtp/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vtp;

namespace {

// Registers options whose defaults can also come from a JSON config file.
class Options {
 public:
  Options(CLI::App* app, std::string section) : app_(app), section_(std::move(section)) {}

  template <typename T>
  CLI::Option* add(const std::string& flag, T& target, const std::string& help) {
    const std::string key = key_of(flag);
    setters_.push_back([&target, key](const json& j) {
      if (j.contains(key)) target = j.at(key).get<T>();
    });
    return app_->add_option(flag, target, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& flag, bool& target, const std::string& help) {
    const std::string key = key_of(flag);
    setters_.push_back([&target, key](const json& j) {
      if (j.contains(key)) target = j.at(key).get<bool>();
    });
    return app_->add_flag(flag, target, help);
  }

  void apply(const json& config) const {
    for (const char* part : {"common", section_.c_str()}) {
      if (!config.contains(part)) continue;
      for (const auto& set : setters_) set(config.at(part));
    }
  }

 private:
  static std::string key_of(const std::string& flag) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    if (const auto comma = key.find(','); comma != std::string::npos) key = key.substr(0, comma);
    for (char& c : key)
      if (c == '-') c = '_';
    return key;
  }

  CLI::App* app_;
  std::string section_;
  std::vector<std::function<void(const json&)>> setters_;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::UsageError, std::string(what) + " path is required");
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, std::string(what) + " not found: " + path);
}

void require_output(const std::string& path, bool force) {
  if (path.empty()) throw Error(ErrorCode::UsageError, "output path is required");
  if (fs::exists(path) && !force) {
    throw Error(ErrorCode::IoError, path + " exists; pass --force to overwrite");
  }
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::exists(parent)) throw Error(ErrorCode::IoError, "directory does not exist: " + parent.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

PlateParams params_or_reference(const std::string& path) {
  if (path.empty()) return PlateParams::reference();
  require_input(path, "params");
  PlateParams p = plate_params_from_json(read_json(path));
  validate(p);
  return p;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::UsageError, "not a number: '" + item + "'");
    }
  }
  return out;
}

int fail(const std::string& code, const std::string& message, int status) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

struct Common {
  std::string config;
  unsigned workers = default_workers();
  bool force = false;
};

struct GenArgs {
  std::string out;
  std::size_t n = 3000;
  double sigma = 0.05;
  double sigma_outline = -1.0, sigma_thickness = -1.0, sigma_material = -1.0;
  std::uint64_t seed = 1;
  double resolution = OracleConfig{}.resolution;
};

struct TrainArgs {
  std::vector<std::string> datasets;
  std::string out;
  int width = 30;
  int epochs = 100;
  double lambda = 1e-3;
  std::uint64_t seed = 1;
  bool allow_unreliable = false;
};

struct PredictArgs {
  std::string model, params;
};

struct OptimizeArgs {
  std::string model, start, out, loss = "ratio", free = "outline", target_params, f_ref;
  double alpha = 2.3, beta = 0.0;
  int mode = 1;
  long budget = 0;
  std::uint64_t seed = 1;
  bool allow_unreliable = false;
};

struct CrossValidateArgs {
  std::string run, out;
  double resolution = OracleConfig{}.resolution;
};

struct StudyArgs {
  std::string name, model, out;
  std::uint64_t seed = 1;
  int replicates = 20;
  double sigma = 0.2;
  double delta = 0.05;
  std::string sigmas = "0.01,0.02,0.05,0.1";
  std::string alphas = "2.185,2.3,2.415";
  double resolution = OracleConfig{}.resolution;
  bool allow_unreliable = false;
};

struct ServeArgs {
  std::string model, host = "127.0.0.1";
  int port = 8080;
  unsigned job_workers = 2;
  std::size_t registry = 64;
};

DesignService* active_service = nullptr;

extern "C" void on_signal(int) {
  if (active_service != nullptr) active_service->server().stop();
}

int gen_dataset(const Common& common, const GenArgs& a) {
  require_output(a.out, common.force);
  GenerateOptions opts;
  opts.n = a.n;
  opts.sigma = {a.sigma_outline >= 0 ? a.sigma_outline : a.sigma, a.sigma_thickness >= 0 ? a.sigma_thickness : a.sigma,
                a.sigma_material >= 0 ? a.sigma_material : a.sigma};
  opts.seed = a.seed;
  opts.oracle.resolution = a.resolution;
  opts.workers = common.workers;
  std::size_t step = std::max<std::size_t>(1, a.n / 20);
  opts.progress = [step](std::size_t done, std::size_t total) {
    if (done % step == 0 || done == total) std::cerr << "labelled " << done << "/" << total << std::endl;
  };
  const SampleSet set = generate(ReferencePlate::violin(), opts);
  save_jsonl(set, a.out);
  std::cout << json{{"dataset", a.out},
                    {"n", set.samples.size()},
                    {"train", set.train.size()},
                    {"test", set.test.size()},
                    {"seed", a.seed},
                    {"rejected_draws", set.meta.rejected_draws},
                    {"oracle_failures", set.meta.oracle_failures},
                    {"fingerprint", fingerprint(set)}}
                   .dump()
            << std::endl;
  return 0;
}

int train_model(const Common& common, const TrainArgs& a) {
  if (a.datasets.empty()) throw Error(ErrorCode::UsageError, "at least one --dataset is required");
  std::vector<SampleSet> parts;
  for (const std::string& path : a.datasets) {
    require_input(path, "dataset");
    parts.push_back(load_jsonl(path));
  }
  require_output(a.out, common.force);
  TrainConfig cfg;
  cfg.hidden_width = a.width;
  cfg.max_epochs = a.epochs;
  cfg.lambda_init = a.lambda;
  cfg.seed = a.seed;
  const SurrogateModel model = train(parts.size() == 1 ? parts.front() : merge(parts), cfg);
  const FitReport& r = model.report();
  std::cout << json{{"r2_test", r.r2_test},
                    {"r2_aggregate", r.r2_aggregate},
                    {"rmse_train", r.rmse_train},
                    {"rmse_test", r.rmse_test},
                    {"epochs", r.epochs},
                    {"stop", to_string(r.stop)},
                    {"seed", a.seed}}
                   .dump()
            << std::endl;
  if (!model.reliable() && !a.allow_unreliable) model.require_reliable();
  model.save(a.out);
  return 0;
}

int predict(const PredictArgs& a) {
  require_input(a.model, "model");
  const SurrogateModel model = SurrogateModel::load(a.model);
  const Prediction p = model.predict(params_or_reference(a.params));
  std::cout << json{{"freqs_hz", p.freqs_hz}, {"f52", p.f52()}, {"in_training_box", p.in_training_box}}.dump()
            << std::endl;
  return 0;
}

int optimize(const Common& common, const OptimizeArgs& a) {
  require_input(a.model, "model");
  if (!a.out.empty()) require_output(a.out, common.force);
  const SurrogateModel model = SurrogateModel::load(a.model);
  LossSpec spec;
  spec.kind = loss_kind_from_string(a.loss);
  spec.alpha = a.alpha;
  spec.mode = a.mode;
  spec.beta = a.beta;
  if (spec.kind == LossKind::SpectrumMeanAbs || spec.kind == LossKind::MeanShift) {
    if (!a.f_ref.empty()) {
      const auto v = parse_list(a.f_ref);
      if (v.size() != kModeCount) throw Error(ErrorCode::UsageError, "--f-ref needs 10 comma-separated values");
      std::copy(v.begin(), v.end(), spec.f_ref.begin());
    } else {
      spec.f_ref = model.predict(params_or_reference(a.target_params)).freqs_hz;
    }
  }
  DesignOptions opts;
  opts.allow_unreliable = a.allow_unreliable;
  opts.nelder_mead.budget = a.budget;
  OptimizationRun run = optimize_design(model, spec, params_or_reference(a.start), FreeVars::parse(a.free), opts);
  run.seed = a.seed;
  const json record = to_json(run);
  if (!a.out.empty()) write_text(a.out, record.dump(2) + "\n");
  std::cout << json{{"loss", run.best_loss},
                    {"start_loss", run.start_loss},
                    {"freqs_hz", run.predicted.freqs_hz},
                    {"f52", run.predicted.f52()},
                    {"evaluations", run.evaluations},
                    {"budget", run.budget},
                    {"status", to_string(run.status)},
                    {"seed", run.seed}}
                   .dump()
            << std::endl;
  return 0;
}

int cross_validate_run(const Common& common, const CrossValidateArgs& a) {
  require_input(a.run, "run record");
  if (!a.out.empty()) require_output(a.out, common.force);
  const json record = read_json(a.run);
  OptimizationRun run;
  try {
    run.best = plate_params_from_json(record.at("result").at("params"));
    const auto& f = record.at("result").at("freqs_hz");
    if (f.size() != kModeCount) throw Error(ErrorCode::IoError, "run record spectrum must have 10 entries");
    for (std::size_t i = 0; i < kModeCount; ++i) run.predicted.freqs_hz[i] = f[i].get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed run record: ") + e.what());
  }
  OracleConfig oracle;
  oracle.resolution = a.resolution;
  const json cv = to_json(cross_validate(run, oracle));
  if (!a.out.empty()) write_text(a.out, cv.dump(2) + "\n");
  std::cout << cv.dump() << std::endl;
  return 0;
}

int study(const Common& common, const StudyArgs& a) {
  require_input(a.model, "model");
  if (a.out.empty()) throw Error(ErrorCode::UsageError, "--out directory is required");
  if (fs::exists(fs::path(a.out) / "report.json") && !common.force) {
    throw Error(ErrorCode::IoError, a.out + " already holds a report; pass --force to overwrite");
  }
  const SurrogateModel model = SurrogateModel::load(a.model);
  StudyContext ctx;
  ctx.model = &model;
  ctx.workers = common.workers;
  ctx.seed = a.seed;
  ctx.allow_unreliable = a.allow_unreliable;
  ctx.oracle.resolution = a.resolution;
  StudyReport report;
  if (a.name == "ratio") {
    report = study_ratio(ctx, parse_list(a.alphas));
  } else if (a.name == "single-modes") {
    report = study_single_modes(ctx, a.delta);
  } else if (a.name == "equivalence") {
    report = study_equivalence(ctx, parse_list(a.sigmas), a.replicates);
  } else if (a.name == "material") {
    report = study_material(ctx, a.sigma, a.replicates);
  } else if (a.name == "grid") {
    report = study_density_modulus_grid(ctx);
  } else {
    throw Error(ErrorCode::UsageError, "unknown study '" + a.name + "'");
  }
  report.write(a.out);
  json summary = report.summary;
  summary.erase("runs");
  std::cout << json{{"study", report.id}, {"out", a.out}, {"seed", a.seed}, {"summary", summary}}.dump() << std::endl;
  return 0;
}

int serve(const ServeArgs& a) {
  std::shared_ptr<const SurrogateModel> model;
  if (!a.model.empty()) {
    require_input(a.model, "model");
    model = std::make_shared<const SurrogateModel>(SurrogateModel::load(a.model));
  }
  ServiceOptions opts;
  opts.job_workers = a.job_workers;
  opts.registry_capacity = a.registry;
  DesignService service(model, ReferencePlate::violin(), opts);
  active_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on http://" << a.host << ":" << a.port << std::endl;
  const bool ok = service.listen(a.host, a.port);
  active_service = nullptr;
  if (!ok) throw Error(ErrorCode::IoError, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

std::string find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Violin top-plate inverse design: dataset generation, surrogate training and optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "JSON file with option defaults (flags take precedence)");
  Options top(&app, "common");
  top.add("--workers", common.workers, "Worker threads for parallel maps");
  top.flag("--force", common.force, "Overwrite existing outputs");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Sample perturbed plates and label them with the eigen-oracle");
  Options gen_opts(gen_cmd, "gen-dataset");
  gen_opts.add("--out", gen.out, "Output JSONL path");
  gen_opts.add("--n", gen.n, "Number of samples");
  gen_opts.add("--sigma", gen.sigma, "Perturbation standard deviation for every family");
  gen_opts.add("--sigma-outline", gen.sigma_outline, "Override sigma for the outline family");
  gen_opts.add("--sigma-thickness", gen.sigma_thickness, "Override sigma for the thickness family");
  gen_opts.add("--sigma-material", gen.sigma_material, "Override sigma for the material family");
  gen_opts.add("--seed", gen.seed, "Random seed");
  gen_opts.add("--resolution", gen.resolution, "Oracle lattice nodes per metre");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit the surrogate network with Levenberg-Marquardt");
  Options train_opts(train_cmd, "train");
  train_opts.add("--dataset", tr.datasets, "Dataset JSONL path; repeat to train on several");
  train_opts.add("--out", tr.out, "Output model path");
  train_opts.add("--width", tr.width, "Hidden layer width");
  train_opts.add("--epochs", tr.epochs, "Maximum epochs (at most 100)");
  train_opts.add("--lambda", tr.lambda, "Initial damping");
  train_opts.add("--seed", tr.seed, "Weight initialisation seed");
  train_opts.flag("--allow-unreliable", tr.allow_unreliable, "Save the model even if R2 <= 0.9");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Predict the first ten frequencies of a plate");
  Options predict_opts(predict_cmd, "predict");
  predict_opts.add("--model", pr.model, "Model path");
  predict_opts.add("--params", pr.params, "PlateParams JSON (default: reference plate)");

  OptimizeArgs op;
  auto* optimize_cmd = app.add_subcommand("optimize", "Minimize a loss on surrogate predictions");
  Options optimize_opts(optimize_cmd, "optimize");
  optimize_opts.add("--model", op.model, "Model path");
  optimize_opts.add("--loss", op.loss, "ratio | mode | spectrum | mean_shift");
  optimize_opts.add("--alpha", op.alpha, "f5/f2 target for the ratio loss");
  optimize_opts.add("--mode", op.mode, "Mode index 1..10 for the mode loss");
  optimize_opts.add("--beta", op.beta, "Target frequency in Hz for the mode loss");
  optimize_opts.add("--f-ref", op.f_ref, "Comma-separated target spectrum for spectrum losses");
  optimize_opts.add("--target-params", op.target_params, "Plate whose prediction is the target spectrum");
  optimize_opts.add("--start", op.start, "Start PlateParams JSON (default: reference plate)");
  optimize_opts.add("--free", op.free, "outline | thickness | outline+thickness | material | all | name list");
  optimize_opts.add("--budget", op.budget, "Evaluation budget (default and maximum 200 per free variable)");
  optimize_opts.add("--seed", op.seed, "Seed recorded with the run");
  optimize_opts.add("--out", op.out, "Run record JSON path");
  optimize_opts.flag("--allow-unreliable", op.allow_unreliable, "Skip the R2 gate");

  CrossValidateArgs cv;
  auto* cv_cmd = app.add_subcommand("cross-validate", "Re-solve an optimized design with the eigen-oracle");
  Options cv_opts(cv_cmd, "cross-validate");
  cv_opts.add("--run", cv.run, "Run record JSON written by optimize");
  cv_opts.add("--resolution", cv.resolution, "Oracle lattice nodes per metre");
  cv_opts.add("--out", cv.out, "Output JSON path");

  StudyArgs st;
  auto* study_cmd = app.add_subcommand("study", "Run one of the experiment studies");
  study_cmd->add_option("name", st.name, "Study to run")
      ->required()
      ->check(CLI::IsMember({"ratio", "single-modes", "equivalence", "material", "grid"}));
  Options study_opts(study_cmd, "study");
  study_opts.add("--model", st.model, "Model path");
  study_opts.add("--out", st.out, "Results directory");
  study_opts.add("--seed", st.seed, "Seed block for perturbations");
  study_opts.add("--replicates", st.replicates, "Replicates per configuration");
  study_opts.add("--sigma", st.sigma, "Material perturbation sigma");
  study_opts.add("--sigmas", st.sigmas, "Comma-separated sigma list for the equivalence study");
  study_opts.add("--alphas", st.alphas, "Comma-separated f5/f2 targets for the ratio study");
  study_opts.add("--delta", st.delta, "Relative mode shift for the single-mode study");
  study_opts.add("--resolution", st.resolution, "Oracle lattice nodes per metre");
  study_opts.flag("--allow-unreliable", st.allow_unreliable, "Skip the R2 gate");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP design service");
  Options serve_opts(serve_cmd, "serve");
  serve_opts.add("--model", sv.model, "Model path");
  serve_opts.add("--host", sv.host, "Bind address");
  serve_opts.add("--port", sv.port, "Port");
  serve_opts.add("--job-workers", sv.job_workers, "Concurrent optimization jobs");
  serve_opts.add("--registry", sv.registry, "Maximum retained jobs");

  try {
    const std::string config_path = find_config(argc, argv);
    if (!config_path.empty()) {
      const json config = read_json(config_path);
      for (const Options* o : {&top, &gen_opts, &train_opts, &predict_opts, &optimize_opts, &cv_opts, &study_opts,
                               &serve_opts}) {
        o->apply(config);
      }
    }
  } catch (const Error& e) {
    return fail(std::string(to_string(e.code())), e.what(), 2);
  } catch (const json::exception& e) {
    return fail("UsageError", std::string("config: ") + e.what(), 2);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what(), 2);
  }

  try {
    if (*gen_cmd) return gen_dataset(common, gen);
    if (*train_cmd) return train_model(common, tr);
    if (*predict_cmd) return predict(pr);
    if (*optimize_cmd) return optimize(common, op);
    if (*cv_cmd) return cross_validate_run(common, cv);
    if (*study_cmd) return study(common, st);
    if (*serve_cmd) return serve(sv);
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::UsageError ? 2 : e.code() == ErrorCode::GateFailed ? 3 : 1;
    return fail(std::string(to_string(e.code())), e.what(), status);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 1);
  }
  return 0;
}
