#include <sstream>
#include <thread>

#include <httplib.h>

#include "openswe/fleet.hpp"

namespace openswe::fleet {

void Metrics::increment(const std::string& name, std::uint64_t delta) {
  std::lock_guard<std::mutex> lock(mutex_);
  counters_[name] += delta;
}

void Metrics::set(const std::string& name, std::uint64_t value) {
  std::lock_guard<std::mutex> lock(mutex_);
  counters_[name] = value;
}

std::uint64_t Metrics::get(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = counters_.find(name);
  return it == counters_.end() ? 0 : it->second;
}

std::string Metrics::expose() const {
  // Prometheus plain-text exposition format
  static const char* kKnown[] = {"tasks_done",   "tasks_parked",
                                 "builds_total", "cache_hits",
                                 "active_containers", "reclaim_bytes"};
  std::lock_guard<std::mutex> lock(mutex_);
  std::ostringstream out;
  auto emit = [&](const std::string& name, std::uint64_t value) {
    out << "# TYPE openswe_" << name << " counter\n";
    out << "openswe_" << name << " " << value << "\n";
  };
  for (const char* name : kKnown) {
    auto it = counters_.find(name);
    emit(name, it == counters_.end() ? 0 : it->second);
  }
  for (const auto& [name, value] : counters_) {
    bool known = false;
    for (const char* k : kKnown) {
      if (name == k) known = true;
    }
    if (!known) emit(name, value);
  }
  return out.str();
}

std::string export_metrics(const Metrics& metrics) { return metrics.expose(); }

struct MetricsServer::Impl {
  const Metrics* metrics;
  httplib::Server server;
  std::thread thread;
};

MetricsServer::MetricsServer(const Metrics& metrics, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->metrics = &metrics;
  impl_->server.Get("/metrics", [this](const httplib::Request&,
                                       httplib::Response& res) {
    res.set_content(impl_->metrics->expose(), "text/plain; version=0.0.4");
  });
  impl_->thread = std::thread(
      [impl = impl_.get(), port] { impl->server.listen("127.0.0.1", port); });
  impl_->server.wait_until_ready();
}

MetricsServer::~MetricsServer() { stop(); }

void MetricsServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void worker_loop(const fs::path& queue_root, const WorkerConfig& config,
                 const TaskHandler& handler, Metrics& metrics,
                 std::atomic<bool>& stop) {
  auto last_prune = std::chrono::steady_clock::now();
  while (!stop.load()) {
    // reap on every pass: cheap directory scan, and it is what lets a
    // surviving worker pick up a crashed peer's task
    reap_expired(queue_root, std::chrono::system_clock::now(), config.attempt_cap);

    auto claimed = claim(queue_root, config.worker_id, config.lease_ttl);
    if (!claimed) {
      if (config.drain) {
        auto snap = queue_snapshot(queue_root);
        if (snap.pending == 0 && snap.leased == 0) return;
      }
      std::this_thread::sleep_for(config.poll_interval);
      continue;
    }

    auto& [task, lease] = *claimed;
    std::atomic<bool> task_finished{false};
    std::thread renewer([&] {
      auto interval = std::chrono::seconds(
          std::max<long long>(1, lease.ttl.count() / 3));
      auto next = std::chrono::steady_clock::now() + interval;
      while (!task_finished.load() && !stop.load()) {
        if (std::chrono::steady_clock::now() >= next) {
          try {
            renew(queue_root, lease);
          } catch (const StaleLeaseError&) {
            break;  // lost the task; the main thread will notice at complete()
          }
          next = std::chrono::steady_clock::now() + interval;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
    });

    std::string record;
    bool handled = false;
    try {
      record = handler(task);
      handled = true;
    } catch (const std::exception& e) {
      // handler crash: leave the lease to expire so the task is retried
      metrics.increment("handler_errors");
    }
    task_finished.store(true);
    renewer.join();

    if (handled) {
      try {
        complete(queue_root, lease, record);
        metrics.increment("tasks_done");
      } catch (const StaleLeaseError&) {
        metrics.increment("stale_leases");  // work discarded, task re-ran elsewhere
      }
    }

    if (config.prune_hook &&
        std::chrono::steady_clock::now() - last_prune > config.prune_interval) {
      last_prune = std::chrono::steady_clock::now();
      config.prune_hook(metrics);
    }
  }
}

}  // namespace openswe::fleet
