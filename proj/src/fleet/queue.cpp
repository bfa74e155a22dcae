#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "openswe/fleet.hpp"

namespace openswe::fleet {

using nlohmann::json;

namespace {

std::string task_to_json(const QueueTask& task) {
  json j = {{"task_id", task.task_id},
            {"payload", task.payload},
            {"attempts", task.attempts}};
  return j.dump();
}

QueueTask task_from_json(const std::string& text) {
  json j = json::parse(text);
  QueueTask task;
  task.task_id = j.at("task_id").get<std::string>();
  task.payload = j.value("payload", "");
  task.attempts = j.value("attempts", 0);
  return task;
}

std::string lease_to_json(const Lease& lease) {
  json j = {{"task_id", lease.task_id},
            {"worker_id", lease.worker_id},
            {"acquired_at",
             std::chrono::duration_cast<std::chrono::milliseconds>(
                 lease.acquired_at.time_since_epoch())
                 .count()},
            {"ttl_seconds", lease.ttl.count()}};
  return j.dump();
}

std::optional<Lease> lease_from_file(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error&) {
    return std::nullopt;  // sidecar vanished under us
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  Lease lease;
  lease.task_id = j.value("task_id", "");
  lease.worker_id = j.value("worker_id", "");
  lease.acquired_at = std::chrono::system_clock::time_point(
      std::chrono::milliseconds(j.value("acquired_at", 0ll)));
  lease.ttl = std::chrono::seconds(j.value("ttl_seconds", 0ll));
  return lease;
}

bool lease_expired(const Lease& lease, std::chrono::system_clock::time_point now) {
  return lease.acquired_at + lease.ttl < now;
}

std::size_t count_entries(const fs::path& dir, bool skip_sidecars = false) {
  std::size_t count = 0;
  if (!fs::exists(dir)) return 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto name = entry.path().filename().string();
    if (name.find(".tmp.") != std::string::npos) continue;
    if (skip_sidecars && entry.path().extension() == ".lease") continue;
    ++count;
  }
  return count;
}

}  // namespace

void init_queue(const fs::path& queue_root) {
  for (const char* sub : {"pending", "leased", "done", "parked"}) {
    fs::create_directories(queue_root / sub);
  }
  // rename-based ownership needs all state dirs on one filesystem
  fs::path probe_src = queue_root / "pending" / ".probe";
  fs::path probe_dst = queue_root / "leased" / ".probe";
  write_file(probe_src, "probe");
  std::error_code ec;
  fs::rename(probe_src, probe_dst, ec);
  if (ec) {
    fs::remove(probe_src);
    throw Error("queue directories do not support atomic rename: " + ec.message());
  }
  fs::remove(probe_dst);
}

std::size_t enqueue(const fs::path& queue_root, const std::vector<QueueTask>& tasks) {
  std::size_t added = 0;
  for (const auto& task : tasks) {
    bool exists = false;
    for (const char* sub : {"pending", "leased", "done", "parked"}) {
      if (fs::exists(queue_root / sub / task.task_id)) {
        exists = true;
        break;
      }
    }
    if (exists) continue;
    atomic_write_file(queue_root / "pending" / task.task_id, task_to_json(task));
    ++added;
  }
  return added;
}

std::optional<std::pair<QueueTask, Lease>> claim(const fs::path& queue_root,
                                                 const std::string& worker_id,
                                                 std::chrono::seconds ttl) {
  fs::path pending = queue_root / "pending";
  std::vector<fs::path> candidates;
  for (const auto& entry : fs::directory_iterator(pending)) {
    if (entry.is_regular_file() &&
        entry.path().filename().string().find(".tmp.") == std::string::npos) {
      candidates.push_back(entry.path());
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& file : candidates) {
    fs::path target = queue_root / "leased" / file.filename();
    std::error_code ec;
    fs::rename(file, target, ec);
    if (ec) continue;  // lost the race; try the next one

    QueueTask task;
    try {
      task = task_from_json(read_file(target));
    } catch (const std::exception&) {
      continue;  // corrupt payload; leave for reap/inspection
    }
    Lease lease;
    lease.task_id = task.task_id;
    lease.worker_id = worker_id;
    lease.acquired_at = std::chrono::system_clock::now();
    lease.ttl = ttl;
    atomic_write_file(fs::path(target) += ".lease", lease_to_json(lease));
    return std::make_pair(std::move(task), std::move(lease));
  }
  return std::nullopt;
}

void renew(const fs::path& queue_root, Lease& lease) {
  fs::path sidecar = queue_root / "leased" / (lease.task_id + ".lease");
  auto current = lease_from_file(sidecar);
  if (!current || current->worker_id != lease.worker_id) {
    throw StaleLeaseError("lease for " + lease.task_id +
                          " is no longer owned by " + lease.worker_id);
  }
  lease.acquired_at = std::chrono::system_clock::now();
  atomic_write_file(sidecar, lease_to_json(lease));
}

void complete(const fs::path& queue_root, const Lease& lease,
              const std::string& record_json) {
  fs::path done_file = queue_root / "done" / lease.task_id;
  if (fs::exists(done_file)) {
    return;  // a reclaimed duplicate finished first; keep the single record
  }
  fs::path sidecar = queue_root / "leased" / (lease.task_id + ".lease");
  auto current = lease_from_file(sidecar);
  auto now = std::chrono::system_clock::now();
  if (!current || current->worker_id != lease.worker_id ||
      lease_expired(*current, now)) {
    throw StaleLeaseError("cannot complete " + lease.task_id +
                          ": lease expired or stolen");
  }
  atomic_write_file(done_file, record_json);
  std::error_code ec;
  fs::remove(queue_root / "leased" / lease.task_id, ec);
  fs::remove(sidecar, ec);
}

std::vector<std::string> reap_expired(const fs::path& queue_root,
                                      std::chrono::system_clock::time_point now,
                                      int attempt_cap) {
  std::vector<std::string> reclaimed;
  fs::path leased = queue_root / "leased";
  for (const auto& entry : fs::directory_iterator(leased)) {
    if (entry.path().extension() != ".lease") continue;
    auto lease = lease_from_file(entry.path());
    if (!lease || !lease_expired(*lease, now)) continue;

    fs::path task_file = leased / lease->task_id;
    QueueTask task;
    try {
      task = task_from_json(read_file(task_file));
    } catch (const std::exception&) {
      continue;  // already completed and removed; drop the stale sidecar
    }
    ++task.attempts;
    const char* dest_dir = (task.attempts >= attempt_cap) ? "parked" : "pending";
    // write the updated payload first, then release: a crash here leaves the
    // lease in place and the next reap retries
    atomic_write_file(queue_root / dest_dir / task.task_id, task_to_json(task));
    std::error_code ec;
    fs::remove(task_file, ec);
    fs::remove(entry.path(), ec);
    reclaimed.push_back(task.task_id);
  }
  // sidecar-less leases and lease-less sidecars from crashes mid-claim
  for (const auto& entry : fs::directory_iterator(leased)) {
    if (entry.path().extension() == ".lease") {
      if (!fs::exists(leased / entry.path().stem())) {
        std::error_code ec;
        fs::remove(entry.path(), ec);
      }
      continue;
    }
    if (!fs::exists(fs::path(entry.path()) += ".lease")) {
      // claimed but crashed before the sidecar was written; a grace period
      // covers the rename-then-write window of a live claimer
      std::error_code age_ec;
      auto mtime = fs::last_write_time(entry.path(), age_ec);
      if (age_ec) continue;
      auto age = fs::file_time_type::clock::now() - mtime;
      if (age < std::chrono::seconds(30)) continue;
      QueueTask task;
      try {
        task = task_from_json(read_file(entry.path()));
      } catch (const std::exception&) {
        continue;
      }
      ++task.attempts;
      const char* dest_dir = (task.attempts >= attempt_cap) ? "parked" : "pending";
      atomic_write_file(queue_root / dest_dir / task.task_id, task_to_json(task));
      std::error_code ec;
      fs::remove(entry.path(), ec);
      reclaimed.push_back(task.task_id);
    }
  }
  return reclaimed;
}

QueueSnapshot queue_snapshot(const fs::path& queue_root) {
  QueueSnapshot snap;
  snap.pending = count_entries(queue_root / "pending");
  snap.leased = count_entries(queue_root / "leased", /*skip_sidecars=*/true);
  snap.done = count_entries(queue_root / "done");
  snap.parked = count_entries(queue_root / "parked");
  return snap;
}

}  // namespace openswe::fleet
