#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "openswe/common.hpp"
#include "openswe/orchestrator.hpp"

namespace openswe::fleet {

// Queue directory layout (the wire protocol between producer and workers):
//   pending/<task_id>       task payload, JSON
//   leased/<task_id>        same payload while owned by a worker
//   leased/<task_id>.lease  lease sidecar {worker_id, acquired_at, ttl}
//   done/<task_id>          TaskRecord JSON
//   parked/<task_id>        payload after the attempt cap
struct QueueTask {
  std::string task_id;
  std::string payload;  // serialized TaskCandidate (or opaque for no-op tasks)
  int attempts = 0;
};

struct Lease {
  std::string task_id;
  std::string worker_id;
  std::chrono::system_clock::time_point acquired_at;
  std::chrono::seconds ttl{90 * 60};
};

struct QueueConfig {
  int attempt_cap = 3;
  std::chrono::seconds lease_ttl{90 * 60};
};

void init_queue(const fs::path& queue_root);  // creates dirs, probes rename atomicity

// One file per task; duplicates (by id, across any state dir) are skipped.
// Returns the number of newly enqueued tasks.
std::size_t enqueue(const fs::path& queue_root, const std::vector<QueueTask>& tasks);

// Atomically claims one pending task via rename; nullopt when pending is empty.
std::optional<std::pair<QueueTask, Lease>> claim(const fs::path& queue_root,
                                                 const std::string& worker_id,
                                                 std::chrono::seconds ttl);

// Rewrites the lease sidecar with a fresh acquired_at.
void renew(const fs::path& queue_root, Lease& lease);

// Persists the result and releases the lease. Idempotent: completing an
// already-done task is a no-op. An expired or stolen lease throws
// StaleLeaseError and the caller must discard local work.
void complete(const fs::path& queue_root, const Lease& lease,
              const std::string& record_json);

// Moves expired leases back to pending (attempts+1) or to parked at the cap.
std::vector<std::string> reap_expired(const fs::path& queue_root,
                                      std::chrono::system_clock::time_point now,
                                      int attempt_cap = 3);

struct QueueSnapshot {
  std::size_t pending = 0;
  std::size_t leased = 0;
  std::size_t done = 0;
  std::size_t parked = 0;
};
QueueSnapshot queue_snapshot(const fs::path& queue_root);

// Worker-local counters exposed in Prometheus text format.
class Metrics {
public:
  void increment(const std::string& name, std::uint64_t delta = 1);
  void set(const std::string& name, std::uint64_t value);
  std::uint64_t get(const std::string& name) const;
  std::string expose() const;  // one "# TYPE" + value line per counter

private:
  mutable std::mutex mutex_;
  std::map<std::string, std::uint64_t> counters_;
};

std::string export_metrics(const Metrics& metrics);

// Serves GET /metrics on localhost:port until stop() is called.
class MetricsServer {
public:
  MetricsServer(const Metrics& metrics, int port);
  ~MetricsServer();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

using TaskHandler = std::function<std::string(const QueueTask&)>;  // returns record JSON

struct WorkerConfig {
  std::string worker_id;
  std::chrono::seconds lease_ttl{90 * 60};
  std::chrono::milliseconds poll_interval{500};
  int attempt_cap = 3;
  bool drain = false;  // exit when the queue is empty (tests, batch runs)
  std::chrono::seconds prune_interval{600};
  std::function<void(Metrics&)> prune_hook;  // e.g. harness::prune_resources
};

// claim -> handle -> complete, with lease renewal at ttl/3, periodic reaping
// and metric updates. Returns when stop becomes true, or when drain is set
// and no pending work remains.
void worker_loop(const fs::path& queue_root, const WorkerConfig& config,
                 const TaskHandler& handler, Metrics& metrics,
                 std::atomic<bool>& stop);

}  // namespace openswe::fleet
