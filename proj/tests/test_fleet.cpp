#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "openswe/fleet.hpp"

using namespace openswe;

namespace {

struct QueueFixture {
  fs::path root;
  QueueFixture() {
    root = fs::temp_directory_path() / "openswe-fleet-fixture";
    fs::remove_all(root);
    fleet::init_queue(root);
  }
  ~QueueFixture() { fs::remove_all(root); }
};

std::vector<fleet::QueueTask> make_tasks(int count, int start = 0) {
  std::vector<fleet::QueueTask> tasks;
  for (int i = start; i < start + count; ++i) {
    fleet::QueueTask t;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "task-%04d", i);
    t.task_id = buf;
    t.payload = "{}";
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace

TEST_CASE("init_queue creates the state directories and is idempotent") {
  QueueFixture fx;
  for (const char* sub : {"pending", "leased", "done", "parked"}) {
    CHECK(fs::is_directory(fx.root / sub));
  }
  fleet::init_queue(fx.root);  // second call is harmless
  auto snap = fleet::queue_snapshot(fx.root);
  CHECK(snap.pending == 0);
  CHECK(snap.leased == 0);
}

TEST_CASE("enqueue adds each task id once across all states") {
  QueueFixture fx;
  auto tasks = make_tasks(100);
  CHECK(fleet::enqueue(fx.root, tasks) == 100);
  CHECK(fleet::queue_snapshot(fx.root).pending == 100);

  // full re-enqueue: nothing new
  CHECK(fleet::enqueue(fx.root, tasks) == 0);

  // a claimed or completed task does not reappear in pending
  auto claimed = fleet::claim(fx.root, "w1", std::chrono::seconds(60));
  REQUIRE(claimed.has_value());
  fleet::complete(fx.root, claimed->second, "{\"status\":\"done\"}");
  CHECK(fleet::enqueue(fx.root, {claimed->first}) == 0);
  auto snap = fleet::queue_snapshot(fx.root);
  CHECK(snap.pending == 99);
  CHECK(snap.done == 1);
}

TEST_CASE("claim moves the file and writes a lease sidecar") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(2));
  auto claimed = fleet::claim(fx.root, "worker-a", std::chrono::seconds(90));
  REQUIRE(claimed.has_value());
  CHECK(claimed->first.task_id == "task-0000");  // lexicographic order
  CHECK(claimed->second.worker_id == "worker-a");
  CHECK(fs::exists(fx.root / "leased" / "task-0000"));
  CHECK(fs::exists(fx.root / "leased" / "task-0000.lease"));
  CHECK_FALSE(fs::exists(fx.root / "pending" / "task-0000"));

  fleet::claim(fx.root, "worker-a", std::chrono::seconds(90));
  CHECK_FALSE(fleet::claim(fx.root, "worker-a", std::chrono::seconds(90))
                  .has_value());  // queue drained
}

TEST_CASE("concurrent claims hand each task to exactly one worker") {
  QueueFixture fx;
  const int kTasks = 60;
  fleet::enqueue(fx.root, make_tasks(kTasks));

  std::mutex mutex;
  std::map<std::string, int> claim_counts;
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      std::string id = "worker-" + std::to_string(w);
      while (true) {
        auto claimed = fleet::claim(fx.root, id, std::chrono::seconds(300));
        if (!claimed) break;
        std::lock_guard<std::mutex> lock(mutex);
        ++claim_counts[claimed->first.task_id];
      }
    });
  }
  for (auto& t : workers) t.join();

  CHECK(claim_counts.size() == kTasks);
  for (const auto& [id, count] : claim_counts) {
    CAPTURE(id);
    CHECK(count == 1);
  }
  CHECK(fleet::queue_snapshot(fx.root).leased == kTasks);
}

TEST_CASE("renew refreshes the lease and detects theft") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(1));
  auto claimed = fleet::claim(fx.root, "w1", std::chrono::seconds(60));
  REQUIRE(claimed.has_value());
  auto lease = claimed->second;
  auto before = lease.acquired_at;
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  fleet::renew(fx.root, lease);
  CHECK(lease.acquired_at > before);

  // another worker overwrites the sidecar: the original holder is stale
  auto stolen = lease;
  stolen.worker_id = "w2";
  atomic_write_file(fx.root / "leased" / "task-0000.lease",
                    "{\"task_id\":\"task-0000\",\"worker_id\":\"w2\","
                    "\"acquired_at\":99999999999999,\"ttl_seconds\":60}");
  CHECK_THROWS_AS(fleet::renew(fx.root, lease), StaleLeaseError);
}

TEST_CASE("complete persists the record once and tolerates repeats") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(1));
  auto claimed = fleet::claim(fx.root, "w1", std::chrono::seconds(60));
  REQUIRE(claimed.has_value());
  fleet::complete(fx.root, claimed->second, "{\"result\":1}");
  CHECK(read_file(fx.root / "done" / "task-0000") == "{\"result\":1}");
  CHECK_FALSE(fs::exists(fx.root / "leased" / "task-0000"));
  CHECK_FALSE(fs::exists(fx.root / "leased" / "task-0000.lease"));

  // a duplicate completion (reclaimed elsewhere) never overwrites the record
  fleet::complete(fx.root, claimed->second, "{\"result\":2}");
  CHECK(read_file(fx.root / "done" / "task-0000") == "{\"result\":1}");
}

TEST_CASE("completing on an expired or stolen lease throws") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(2));

  auto expired = fleet::claim(fx.root, "w1", std::chrono::seconds(0));
  REQUIRE(expired.has_value());
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK_THROWS_AS(fleet::complete(fx.root, expired->second, "{}"),
                  StaleLeaseError);

  auto stolen = fleet::claim(fx.root, "w1", std::chrono::seconds(60));
  REQUIRE(stolen.has_value());
  atomic_write_file(fx.root / "leased" / (stolen->first.task_id + ".lease"),
                    "{\"task_id\":\"" + stolen->first.task_id +
                        "\",\"worker_id\":\"w2\","
                        "\"acquired_at\":99999999999999,\"ttl_seconds\":60}");
  CHECK_THROWS_AS(fleet::complete(fx.root, stolen->second, "{}"),
                  StaleLeaseError);
}

TEST_CASE("reap returns expired work to pending and parks at the cap") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(2));
  auto now = std::chrono::system_clock::now();

  auto c1 = fleet::claim(fx.root, "w1", std::chrono::seconds(60));
  REQUIRE(c1.has_value());

  // a live lease is untouched
  CHECK(fleet::reap_expired(fx.root, now + std::chrono::seconds(10)).empty());

  // past the ttl it goes back to pending with one more attempt on record
  auto reclaimed = fleet::reap_expired(fx.root, now + std::chrono::seconds(120));
  CHECK(reclaimed == std::vector<std::string>{"task-0000"});
  CHECK(fs::exists(fx.root / "pending" / "task-0000"));
  auto re = fleet::claim(fx.root, "w2", std::chrono::seconds(60));
  REQUIRE(re.has_value());
  // claim order is lexicographic, so the reclaimed task comes first
  CHECK(re->first.task_id == "task-0000");
  CHECK(re->first.attempts == 1);

  // two more expiries reach the attempt cap and park the task
  fleet::reap_expired(fx.root, now + std::chrono::seconds(600));
  auto again = fleet::claim(fx.root, "w3", std::chrono::seconds(60));
  REQUIRE(again.has_value());
  CHECK(again->first.task_id == "task-0000");
  CHECK(again->first.attempts == 2);
  fleet::reap_expired(fx.root, now + std::chrono::seconds(1200));
  CHECK(fs::exists(fx.root / "parked" / "task-0000"));
  CHECK_FALSE(fs::exists(fx.root / "pending" / "task-0000"));
}

TEST_CASE("reap recovers a leased file whose sidecar was never written") {
  QueueFixture fx;
  fleet::QueueTask t;
  t.task_id = "orphan";
  t.payload = "{}";
  atomic_write_file(fx.root / "leased" / "orphan",
                    "{\"task_id\":\"orphan\",\"payload\":\"{}\",\"attempts\":0}");

  // fresh file: inside the grace window, left alone
  auto now = std::chrono::system_clock::now();
  CHECK(fleet::reap_expired(fx.root, now).empty());
  CHECK(fs::exists(fx.root / "leased" / "orphan"));

  // age it past the grace window
  fs::last_write_time(fx.root / "leased" / "orphan",
                      fs::file_time_type::clock::now() -
                          std::chrono::seconds(120));
  auto reclaimed = fleet::reap_expired(fx.root, now);
  CHECK(reclaimed == std::vector<std::string>{"orphan"});
  CHECK(fs::exists(fx.root / "pending" / "orphan"));
}

TEST_CASE("metrics expose known counters first in prometheus format") {
  fleet::Metrics metrics;
  metrics.increment("tasks_done");
  metrics.increment("tasks_done", 4);
  metrics.set("custom_gauge", 7);
  CHECK(metrics.get("tasks_done") == 5);
  CHECK(metrics.get("absent") == 0);

  auto text = fleet::export_metrics(metrics);
  CHECK(text.find("# TYPE openswe_tasks_done counter\nopenswe_tasks_done 5\n") !=
        std::string::npos);
  CHECK(text.find("openswe_builds_total 0") != std::string::npos);
  CHECK(text.find("openswe_custom_gauge 7") != std::string::npos);
  // known counters precede ad-hoc ones
  CHECK(text.find("openswe_tasks_done") < text.find("openswe_custom_gauge"));
}

TEST_CASE("metrics server answers GET /metrics over http") {
  fleet::Metrics metrics;
  metrics.increment("tasks_done", 3);
  fleet::MetricsServer server(metrics, 18931);
  httplib::Client client("127.0.0.1", 18931);
  auto res = client.Get("/metrics");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.find("openswe_tasks_done 3") != std::string::npos);
  server.stop();
}

TEST_CASE("worker_loop drains the queue with a no-op handler") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(20));

  fleet::WorkerConfig config;
  config.worker_id = "w-drain";
  config.lease_ttl = std::chrono::seconds(60);
  config.poll_interval = std::chrono::milliseconds(20);
  config.drain = true;

  fleet::Metrics metrics;
  std::atomic<bool> stop{false};
  fleet::worker_loop(fx.root, config,
                     [](const fleet::QueueTask& task) {
                       return "{\"task_id\":\"" + task.task_id +
                              "\",\"status\":\"noop\"}";
                     },
                     metrics, stop);

  auto snap = fleet::queue_snapshot(fx.root);
  CHECK(snap.done == 20);
  CHECK(snap.pending == 0);
  CHECK(snap.leased == 0);
  CHECK(metrics.get("tasks_done") == 20);
}

TEST_CASE("a crashing handler leaves the task for retry until it parks") {
  QueueFixture fx;
  fleet::enqueue(fx.root, make_tasks(1));

  fleet::WorkerConfig config;
  config.worker_id = "w-crash";
  config.lease_ttl = std::chrono::seconds(1);
  config.poll_interval = std::chrono::milliseconds(50);
  config.attempt_cap = 2;
  config.drain = true;

  fleet::Metrics metrics;
  std::atomic<bool> stop{false};
  fleet::worker_loop(fx.root, config,
                     [](const fleet::QueueTask&) -> std::string {
                       throw Error("handler exploded");
                     },
                     metrics, stop);

  auto snap = fleet::queue_snapshot(fx.root);
  CHECK(snap.parked == 1);
  CHECK(snap.done == 0);
  CHECK(metrics.get("handler_errors") == 2);
}
