#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vtp/optimizer.hpp"

#include <httplib.h>
#include <json.hpp>

namespace vtp {

struct ServiceOptions {
  unsigned job_workers = 2;
  std::size_t registry_capacity = 64;
  int default_boundary_samples = kDefaultBoundarySamples;
  int thickness_grid = 32;
};

enum class JobStatus { Queued, Running, Done, Failed, Cancelled };
std::string to_string(JobStatus status);

struct Job {
  std::string id;
  LossSpec spec;
  FreeVars free;
  PlateParams start;
  long budget = 0;
  std::uint64_t seed = 0;

  mutable std::mutex mutex;
  JobStatus status = JobStatus::Queued;
  std::vector<TracePoint> trace;
  nlohmann::json result;
  std::string error;
};

// HTTP front end over one immutable surrogate. Optimizations run on a small
// worker pool; finished jobs stay queryable until evicted least recently used.
class DesignService {
 public:
  DesignService(std::shared_ptr<const SurrogateModel> model, ReferencePlate ref = ReferencePlate::violin(),
                ServiceOptions options = {});
  ~DesignService();

  DesignService(const DesignService&) = delete;
  DesignService& operator=(const DesignService&) = delete;

  // Binds and serves until stop(). Returns false if the port cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds to a free port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  httplib::Server& server() { return server_; }

 private:
  void routes();
  void worker_loop();
  void run_job(const std::shared_ptr<Job>& job);
  std::shared_ptr<Job> find_job(const std::string& id);
  // Returns false when every slot holds an unfinished job.
  bool admit(const std::shared_ptr<Job>& job);

  std::shared_ptr<const SurrogateModel> model_;
  ReferencePlate ref_;
  ServiceOptions options_;
  httplib::Server server_;
  std::thread server_thread_;

  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::list<std::string> lru_;  // front = most recently used
  std::uint64_t next_id_ = 1;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::atomic<bool> stopping_{false};
  std::vector<std::jthread> workers_;
};

}  // namespace vtp
