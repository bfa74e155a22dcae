#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "openswe/common.hpp"

namespace openswe::harness {

struct RunLimits {
  int cpu_cores = 4;
  std::uint64_t memory_bytes = 24ull * 1024 * 1024 * 1024;  // 24 GiB
  std::uint64_t storage_bytes = 200ull * 1000 * 1000 * 1000;  // 200 GB
  std::chrono::milliseconds wall_clock_timeout{std::chrono::minutes(30)};
  bool network_during_run = false;
};

struct BuildResult {
  bool ok = false;
  std::string log;
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // combined stdout + stderr
  bool timed_out = false;
  std::chrono::milliseconds duration{0};
};

struct ImageInfo {
  std::string tag;
  std::uint64_t size_bytes = 0;
};

// Container engine surface the harness needs. DockerEngine drives the docker
// CLI; LocalProcessEngine executes scripts in per-run scratch directories for
// hosts without a container daemon (tests, CI).
class ContainerEngine {
public:
  virtual ~ContainerEngine() = default;
  virtual BuildResult build(const fs::path& context_dir, const std::string& tag) = 0;
  virtual RunResult run(const std::string& tag, const std::string& script,
                        const RunLimits& limits) = 0;
  virtual bool image_exists(const std::string& tag) = 0;
  virtual void remove_image(const std::string& tag) = 0;
  virtual std::vector<ImageInfo> list_images() = 0;
  virtual std::size_t remove_exited_containers() = 0;
  // Engine unavailability throws InfraError from any of the above.
};

std::unique_ptr<ContainerEngine> make_docker_engine(
    const std::string& docker_binary = "docker");

// "Images" are snapshots of <ctx>/repo; run copies the snapshot into a fresh
// scratch dir, writes the script, and executes it with bash under the wall
// clock timeout and an address-space cap. No kernel-level isolation.
std::unique_ptr<ContainerEngine> make_local_process_engine(const fs::path& state_dir);

// Decorator counting engine calls; validates the build-cache contract.
class RecordingEngine : public ContainerEngine {
public:
  explicit RecordingEngine(std::unique_ptr<ContainerEngine> inner)
      : inner_(std::move(inner)) {}

  BuildResult build(const fs::path& ctx, const std::string& tag) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++build_calls_;
    }
    return inner_->build(ctx, tag);
  }
  RunResult run(const std::string& tag, const std::string& script,
                const RunLimits& limits) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++run_calls_;
    }
    return inner_->run(tag, script, limits);
  }
  bool image_exists(const std::string& tag) override {
    return inner_->image_exists(tag);
  }
  void remove_image(const std::string& tag) override { inner_->remove_image(tag); }
  std::vector<ImageInfo> list_images() override { return inner_->list_images(); }
  std::size_t remove_exited_containers() override {
    return inner_->remove_exited_containers();
  }

  int build_calls() const { return build_calls_; }
  int run_calls() const { return run_calls_; }

private:
  std::unique_ptr<ContainerEngine> inner_;
  std::mutex mutex_;
  int build_calls_ = 0;
  int run_calls_ = 0;
};

}  // namespace openswe::harness
