#include <atomic>
#include <csignal>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "openswe/curation.hpp"
#include "openswe/fleet.hpp"
#include "openswe/orchestrator.hpp"

using namespace openswe;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

std::unique_ptr<harness::ContainerEngine> make_engine(const std::string& kind,
                                                      const fs::path& state_dir) {
  if (kind == "docker") return harness::make_docker_engine();
  return harness::make_local_process_engine(state_dir);
}

std::unique_ptr<modelio::ModelClient> make_client(
    const std::string& transcripts_dir, const std::string& task_id,
    const std::string& endpoint, const std::string& model) {
  if (!transcripts_dir.empty()) {
    fs::path per_task = fs::path(transcripts_dir) / (task_id + ".json");
    if (fs::exists(per_task)) return modelio::make_scripted_client_from_file(per_task);
    return modelio::make_scripted_client_from_file(
        fs::path(transcripts_dir) / "default.json");
  }
  modelio::LiveClientConfig config;
  config.endpoint = endpoint;
  config.api_key_env = "OPENSWE_API_KEY";
  config.model = model;
  return modelio::make_live_client(config);
}

std::set<int> parse_keep(const std::string& spec) {
  std::set<int> keep;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) keep.insert(std::stoi(part));
  }
  return keep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task environment forge: build, validate, and curate"};
  app.require_subcommand(1);

  // shared run options
  std::string candidates_file;
  std::string out_dir = "forge-out";
  int max_iterations = 6;
  std::string transcripts_dir;
  std::string engine_kind = "docker";
  std::string repo_source = "https://github.com/";
  std::string repo_cache = "repo-cache";
  std::string endpoint = "http://127.0.0.1:8000";
  std::string model = "default";

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory for task artifacts");
    cmd->add_option("--max-iterations", max_iterations, "loop iteration cap");
    cmd->add_option("--mock-transcripts", transcripts_dir,
                    "scripted model replies (<task_id>.json or default.json)");
    cmd->add_option("--engine", engine_kind, "container engine: docker | local");
    cmd->add_option("--repo-source", repo_source,
                    "clone URL prefix or local mirror root");
    cmd->add_option("--repo-cache", repo_cache, "bare-clone cache directory");
    cmd->add_option("--endpoint", endpoint, "model API endpoint (live mode)");
    cmd->add_option("--model", model, "model name (live mode)");
  };

  auto* run = app.add_subcommand("run", "Run the synthesis loop over candidates");
  run->add_option("--candidates", candidates_file, "candidate JSONL file")
      ->required();
  add_run_options(run);

  std::string queue_root = "queue";
  auto* enqueue = app.add_subcommand("enqueue", "Add candidates to a shared queue");
  enqueue->add_option("--queue", queue_root, "queue root directory")->required();
  enqueue->add_option("--candidates", candidates_file, "candidate JSONL file");
  int noop_count = 0;
  enqueue->add_option("--noop", noop_count, "enqueue N no-op tasks instead");

  std::string worker_id;
  bool drain = false;
  bool noop_handler = false;
  int metrics_port = 0;
  long lease_ttl_seconds = 90 * 60;
  auto* worker = app.add_subcommand("worker", "Consume tasks from a shared queue");
  worker->add_option("--id", worker_id, "worker id")->required();
  worker->add_option("--queue", queue_root, "queue root directory")->required();
  worker->add_flag("--drain", drain, "exit when the queue is empty");
  worker->add_flag("--noop", noop_handler, "complete tasks without running them");
  int noop_delay_ms = 0;
  worker->add_option("--noop-delay", noop_delay_ms,
                     "per-task delay in ms for --noop (load testing)");
  worker->add_option("--metrics-port", metrics_port, "serve GET /metrics on this port");
  worker->add_option("--lease-ttl", lease_ttl_seconds, "lease ttl in seconds");
  add_run_options(worker);

  auto* reap = app.add_subcommand("reap", "Reclaim expired leases");
  reap->add_option("--queue", queue_root, "queue root directory")->required();

  auto* status = app.add_subcommand("status", "Show queue state counts");
  status->add_option("--queue", queue_root, "queue root directory")->required();

  std::string rollouts_path;
  std::string keep_spec = "1,2";
  std::string train_out = "train.jsonl";
  auto* curate = app.add_subcommand("curate", "Select and export training trajectories");
  curate->add_option("--rollouts", rollouts_path, "rollout JSONL file or directory")
      ->required();
  curate->add_option("--keep", keep_spec, "pass counts to keep, e.g. 1,2");
  curate->add_option("--out", train_out, "training JSONL output");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  try {
    if (*run) {
      auto candidates = ingest::load_candidates(candidates_file);
      auto engine = make_engine(engine_kind, fs::path(out_dir) / "engine-state");
      harness::ImageCache cache;
      orchestrator::LoopConfig config;
      config.max_iterations = max_iterations;
      config.work_root = out_dir;
      config.repo_cache.cache_root = repo_cache;
      config.repo_cache.source_prefix = repo_source;
      for (const auto& candidate : candidates) {
        if (g_stop.load()) break;
        auto task_id = orchestrator::task_id_for(candidate);
        auto client = make_client(transcripts_dir, task_id, endpoint, model);
        auto record =
            orchestrator::run_task_loop(candidate, *client, *engine, cache, config);
        std::cout << task_id << ": " << orchestrator::to_string(record.final_status)
                  << " after " << record.iteration_count << " iteration(s)\n";
      }
    } else if (*enqueue) {
      fleet::init_queue(queue_root);
      std::vector<fleet::QueueTask> tasks;
      if (noop_count > 0) {
        for (int i = 0; i < noop_count; ++i) {
          fleet::QueueTask task;
          char buf[16];
          std::snprintf(buf, sizeof(buf), "noop-%04d", i);
          task.task_id = buf;
          task.payload = "{}";
          tasks.push_back(std::move(task));
        }
      } else if (!candidates_file.empty()) {
        for (const auto& candidate : ingest::load_candidates(candidates_file)) {
          fleet::QueueTask task;
          task.task_id = orchestrator::task_id_for(candidate);
          task.payload = ingest::to_json_line(candidate);
          tasks.push_back(std::move(task));
        }
      } else {
        std::cerr << "error: provide --candidates or --noop\n";
        return 1;
      }
      std::size_t added = fleet::enqueue(queue_root, tasks);
      std::cout << "enqueued " << added << " of " << tasks.size() << " tasks\n";
    } else if (*worker) {
      fleet::Metrics metrics;
      std::unique_ptr<fleet::MetricsServer> server;
      if (metrics_port > 0) {
        server = std::make_unique<fleet::MetricsServer>(metrics, metrics_port);
      }
      fleet::WorkerConfig config;
      config.worker_id = worker_id;
      config.lease_ttl = std::chrono::seconds(lease_ttl_seconds);
      config.drain = drain;

      fleet::TaskHandler handler;
      if (noop_handler) {
        handler = [noop_delay_ms](const fleet::QueueTask& task) {
          if (noop_delay_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(noop_delay_ms));
          }
          return "{\"task_id\":\"" + task.task_id + "\",\"status\":\"noop\"}";
        };
      } else {
        auto engine = std::make_shared<std::unique_ptr<harness::ContainerEngine>>(
            make_engine(engine_kind, fs::path(out_dir) / "engine-state"));
        auto cache = std::make_shared<harness::ImageCache>();
        orchestrator::LoopConfig loop_config;
        loop_config.max_iterations = max_iterations;
        loop_config.work_root = out_dir;
        loop_config.repo_cache.cache_root = repo_cache;
        loop_config.repo_cache.source_prefix = repo_source;
        handler = [=, &metrics](const fleet::QueueTask& task) {
          auto candidate = ingest::candidate_from_json(task.payload);
          auto client = make_client(transcripts_dir, task.task_id, endpoint, model);
          auto record = orchestrator::run_task_loop(candidate, *client, **engine,
                                                    *cache, loop_config);
          metrics.increment("iterations_total",
                            static_cast<std::uint64_t>(record.iteration_count));
          return orchestrator::record_to_json(record);
        };
        config.prune_hook = [engine, cache](fleet::Metrics& m) {
          auto report = harness::prune_resources(**engine, *cache,
                                                 harness::PrunePolicy{});
          m.increment("reclaim_bytes", report.bytes_reclaimed);
        };
      }
      fleet::worker_loop(queue_root, config, handler, metrics, g_stop);
      std::cout << "worker " << worker_id << " exiting; done="
                << metrics.get("tasks_done") << "\n";
    } else if (*reap) {
      auto reclaimed =
          fleet::reap_expired(queue_root, std::chrono::system_clock::now());
      std::cout << "reclaimed " << reclaimed.size() << " task(s)\n";
      for (const auto& id : reclaimed) std::cout << "  " << id << "\n";
    } else if (*status) {
      auto snap = fleet::queue_snapshot(queue_root);
      std::cout << "pending: " << snap.pending << "\n"
                << "leased:  " << snap.leased << "\n"
                << "done:    " << snap.done << "\n"
                << "parked:  " << snap.parked << "\n";
    } else if (*curate) {
      curation::CurationConfig config;
      config.keep_pass_counts = parse_keep(keep_spec);
      auto rollouts = curation::load_rollouts(rollouts_path);
      auto counts = curation::aggregate_pass_counts(rollouts, config);
      auto kept = curation::select_instances(counts, config);
      auto report =
          curation::export_training_set(kept, rollouts, config, train_out);
      std::cout << "tasks in:         " << report.tasks_in << "\n"
                << "tasks kept:       " << report.tasks_kept << "\n"
                << "trajectories out: " << report.trajectories_out << "\n";
      for (const auto& id : report.kept_without_trajectories) {
        std::cout << "kept without surviving trajectories: " << id << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
