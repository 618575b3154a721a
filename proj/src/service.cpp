#include "vtp/service.hpp"

#include <algorithm>

#include "vtp/error.hpp"
#include "vtp/experiments.hpp"

namespace vtp {

namespace {

class JobCancelled : public std::exception {};

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SelfIntersectingOutline:
    case ErrorCode::NonPositiveThickness:
    case ErrorCode::DegenerateMask: return 422;
    case ErrorCode::NotTrained:
    case ErrorCode::GateFailed: return 409;
    default: return 400;
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("malformed JSON body: ") + e.what());
  }
}

PlateParams params_from(const nlohmann::json& j) {
  PlateParams p = plate_params_from_json(j);
  validate(p);
  return p;
}

FreeVars free_from(const nlohmann::json& j) {
  if (j.is_string()) return FreeVars::parse(j.get<std::string>());
  if (j.is_array()) {
    std::string joined;
    for (const auto& item : j) {
      if (!joined.empty()) joined += ',';
      joined += item.is_string() ? item.get<std::string>() : item.dump();
    }
    return FreeVars::parse(joined);
  }
  throw Error(ErrorCode::InvalidParams, "free: expected a selector string or a list of parameter names");
}

nlohmann::json trace_json(const std::vector<TracePoint>& trace, std::size_t from) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t k = from; k < trace.size(); ++k) out.push_back({trace[k].evaluation, trace[k].loss, trace[k].best});
  return out;
}

}  // namespace

std::string to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
    case JobStatus::Cancelled: return "cancelled";
  }
  return "unknown";
}

DesignService::DesignService(std::shared_ptr<const SurrogateModel> model, ReferencePlate ref, ServiceOptions options)
    : model_(std::move(model)), ref_(std::move(ref)), options_(options) {
  if (options_.job_workers < 1) options_.job_workers = 1;
  if (options_.registry_capacity < 1) options_.registry_capacity = 1;
  routes();
  for (unsigned w = 0; w < options_.job_workers; ++w) workers_.emplace_back([this] { worker_loop(); });
}

DesignService::~DesignService() { stop(); }

bool DesignService::listen(const std::string& host, int port) { return server_.listen(host, port); }

int DesignService::start_background(const std::string& host) {
  const int port = server_.bind_to_any_port(host);
  if (port < 0) throw Error(ErrorCode::IoError, "cannot bind a port on " + host);
  server_thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  return port;
}

void DesignService::stop() {
  if (!stopping_.exchange(true)) {
    server_.stop();
    if (server_thread_.joinable()) server_thread_.join();
    queue_cv_.notify_all();
    workers_.clear();
  }
}

void DesignService::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
    }
    run_job(job);
  }
}

void DesignService::run_job(const std::shared_ptr<Job>& job) {
  {
    std::lock_guard lock(job->mutex);
    job->status = JobStatus::Running;
  }
  try {
    DesignOptions opts;
    opts.nelder_mead.budget = job->budget;
    OptimizationRun run = optimize_design(*model_, job->spec, job->start, job->free, opts, [&](const TracePoint& p) {
      if (stopping_) throw JobCancelled();
      std::lock_guard lock(job->mutex);
      job->trace.push_back(p);
    });
    run.seed = job->seed;
    nlohmann::json result = {{"params", to_json(run.best)},
                             {"loss", run.best_loss},
                             {"start_loss", run.start_loss},
                             {"freqs_hz", run.predicted.freqs_hz},
                             {"f52", run.predicted.f52()},
                             {"in_training_box", run.predicted.in_training_box},
                             {"evaluations", run.evaluations},
                             {"budget", run.budget},
                             {"termination", to_string(run.status)},
                             {"seed", run.seed}};
    try {
      result["boundary"] = outline_polyline(run.best, ref_, options_.default_boundary_samples);
    } catch (const Error& e) {
      result["boundary"] = nullptr;
      result["boundary_error"] = to_string(e.code());
    }
    std::lock_guard lock(job->mutex);
    job->result = std::move(result);
    job->status = JobStatus::Done;
  } catch (const JobCancelled&) {
    std::lock_guard lock(job->mutex);
    job->status = JobStatus::Cancelled;
  } catch (const std::exception& e) {
    std::lock_guard lock(job->mutex);
    job->error = e.what();
    job->status = JobStatus::Failed;
  }
}

std::shared_ptr<Job> DesignService::find_job(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return nullptr;
  lru_.remove(id);
  lru_.push_front(id);
  return it->second;
}

bool DesignService::admit(const std::shared_ptr<Job>& job) {
  std::lock_guard lock(registry_mutex_);
  while (jobs_.size() >= options_.registry_capacity) {
    auto victim = std::find_if(lru_.rbegin(), lru_.rend(), [&](const std::string& id) {
      const auto& j = jobs_.at(id);
      std::lock_guard job_lock(j->mutex);
      return j->status != JobStatus::Queued && j->status != JobStatus::Running;
    });
    if (victim == lru_.rend()) return false;
    jobs_.erase(*victim);
    lru_.erase(std::next(victim).base());
  }
  job->id = "job-" + std::to_string(next_id_++);
  jobs_[job->id] = job;
  lru_.push_front(job->id);
  {
    std::lock_guard qlock(queue_mutex_);
    queue_.push_back(job);
  }
  queue_cv_.notify_one();
  return true;
}

void DesignService::routes() {
  server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"model_loaded", model_ != nullptr}});
  });

  server_.Get("/model", [this](const httplib::Request&, httplib::Response& res) {
    if (!model_) return send_error(res, 409, "NotTrained", "no model loaded");
    const FitReport& r = model_->report();
    const auto ref = PlateParams::reference().to_vector();
    std::vector<double> lower, upper;
    for (double v : ref) {
      lower.push_back((1.0 - kTrainingBox) * v);
      upper.push_back((1.0 + kTrainingBox) * v);
    }
    send_json(res, 200,
              {{"input_dim", model_->input_dim()},
               {"hidden_width", model_->hidden_width()},
               {"reliable", model_->reliable()},
               {"fit_report",
                {{"r2_test", r.r2_test},
                 {"r2_aggregate", r.r2_aggregate},
                 {"rmse_train", r.rmse_train},
                 {"rmse_test", r.rmse_test},
                 {"epochs", r.epochs},
                 {"n_train", r.n_train},
                 {"n_test", r.n_test}}},
               {"dataset_fingerprint", model_->dataset_fingerprint()},
               {"parameter_names", param_names()},
               {"reference", to_json(PlateParams::reference())},
               {"bounds", {{"lower", lower}, {"upper", upper}}}});
  });

  server_.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    if (!model_) return send_error(res, 409, "NotTrained", "no model loaded");
    try {
      const PlateParams p = params_from(parse_body(req));
      const Prediction pred = model_->predict(p);
      send_json(res, 200, {{"freqs_hz", pred.freqs_hz}, {"f52", pred.f52()}, {"in_training_box", pred.in_training_box}});
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    }
  });

  server_.Post("/optimize", [this](const httplib::Request& req, httplib::Response& res) {
    if (!model_) return send_error(res, 409, "NotTrained", "no model loaded");
    try {
      const nlohmann::json body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::InvalidParams, "body must be an object");
      auto job = std::make_shared<Job>();
      if (!body.contains("spec")) throw Error(ErrorCode::InvalidParams, "spec: missing loss specification");
      job->spec = loss_spec_from_json(body["spec"]);
      job->free = free_from(body.value("free", nlohmann::json("outline")));
      job->start = body.contains("start") ? params_from(body["start"]) : PlateParams::reference();
      job->seed = body.value("seed", std::uint64_t{0});
      const long max_budget = 200 * static_cast<long>(job->free.size());
      job->budget = body.value("budget", max_budget);
      if (job->budget < 1 || job->budget > max_budget) {
        throw Error(ErrorCode::InvalidParams, "budget must be in 1.." + std::to_string(max_budget));
      }
      model_->require_reliable();
      if (!admit(job)) return send_error(res, 429, "RegistryFull", "too many unfinished jobs");
      send_json(res, 202, {{"job_id", job->id}, {"budget", job->budget}});
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    }
  });

  server_.Get(R"(/jobs/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto job = find_job(req.matches[1]);
    if (!job) return send_error(res, 404, "UnknownJob", "no job " + std::string(req.matches[1]));
    std::size_t since = 0;
    if (req.has_param("since")) {
      try {
        since = std::stoul(req.get_param_value("since"));
      } catch (const std::exception&) {
        return send_error(res, 400, "InvalidParams", "since must be a non-negative integer");
      }
    }
    nlohmann::json body;
    {
      std::lock_guard lock(job->mutex);
      body = {{"job_id", job->id},
              {"status", to_string(job->status)},
              {"spec", to_json(job->spec)},
              {"free", job->free.describe()},
              {"budget", job->budget},
              {"seed", job->seed},
              {"trace_length", job->trace.size()},
              {"trace_from", since},
              {"trace", trace_json(job->trace, since)}};
      if (job->status == JobStatus::Done) body["result"] = job->result;
      if (job->status == JobStatus::Failed) body["error"] = job->error;
    }
    send_json(res, 200, body);
  });

  auto geometry = [this](const httplib::Request& req, httplib::Response& res) {
    try {
      nlohmann::json params_json;
      int density = options_.default_boundary_samples;
      if (req.has_param("params")) {
        try {
          params_json = nlohmann::json::parse(req.get_param_value("params"));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::InvalidParams, std::string("params: malformed JSON: ") + e.what());
        }
      } else if (!req.body.empty()) {
        const nlohmann::json body = parse_body(req);
        params_json = body.contains("params") ? body["params"] : body;
        if (body.contains("density")) density = body["density"].get<int>();
      }
      if (req.has_param("density")) {
        try {
          density = std::stoi(req.get_param_value("density"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidParams, "density must be an integer");
        }
      }
      if (density < 60 || density > 8192) throw Error(ErrorCode::InvalidParams, "density must be in 60..8192");
      const PlateParams p = params_json.is_null() ? PlateParams::reference() : params_from(params_json);
      nlohmann::json body = geometry_to_json(realize(p, ref_, density), options_.thickness_grid);
      body["density"] = density;
      send_json(res, 200, body);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "InvalidParams", e.what());
    }
  };
  server_.Get("/geometry", geometry);
  server_.Post("/geometry", geometry);
}

}  // namespace vtp
