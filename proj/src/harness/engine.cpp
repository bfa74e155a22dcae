#include "openswe/engine.hpp"

#include <atomic>
#include <sstream>

namespace openswe::harness {

namespace {

class DockerEngine : public ContainerEngine {
public:
  explicit DockerEngine(std::string binary) : binary_(std::move(binary)) {}

  BuildResult build(const fs::path& ctx, const std::string& tag) override {
    CommandSpec spec;
    spec.argv = {binary_, "build", "-t", tag, ctx.string()};
    spec.timeout = std::chrono::minutes(60);
    auto result = checked(spec, /*allow_failure=*/true);
    return {result.exit_code == 0, result.output};
  }

  RunResult run(const std::string& tag, const std::string& script,
                const RunLimits& limits) override {
    // Script goes in via a bind-mounted temp file; the container is always
    // removed afterward.
    fs::path script_file =
        fs::temp_directory_path() /
        ("openswe-eval-" + content_hash(script + tag) + ".sh");
    write_file(script_file, script);

    CommandSpec spec;
    spec.argv = {binary_,
                 "run",
                 "--rm",
                 "--cpus",
                 std::to_string(limits.cpu_cores),
                 "--memory",
                 std::to_string(limits.memory_bytes),
                 "--storage-opt",
                 "size=" + std::to_string(limits.storage_bytes)};
    if (!limits.network_during_run) {
      spec.argv.push_back("--network=none");
    }
    spec.argv.insert(spec.argv.end(),
                     {"-v", script_file.string() + ":/openswe-eval.sh:ro", tag,
                      "/bin/bash", "/openswe-eval.sh"});
    spec.timeout = limits.wall_clock_timeout;

    auto start = std::chrono::steady_clock::now();
    auto result = checked(spec, /*allow_failure=*/true);
    RunResult out;
    out.exit_code = result.exit_code;
    out.output = result.output;
    out.timed_out = result.timed_out;
    out.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    fs::remove(script_file);
    return out;
  }

  bool image_exists(const std::string& tag) override {
    CommandSpec spec;
    spec.argv = {binary_, "image", "inspect", tag};
    spec.timeout = std::chrono::seconds(30);
    return checked(spec, true).exit_code == 0;
  }

  void remove_image(const std::string& tag) override {
    CommandSpec spec;
    spec.argv = {binary_, "rmi", "-f", tag};
    spec.timeout = std::chrono::minutes(5);
    checked(spec, true);
  }

  std::vector<ImageInfo> list_images() override {
    CommandSpec spec;
    spec.argv = {binary_, "images", "--format", "{{.Repository}}:{{.Tag}} {{.Size}}"};
    spec.timeout = std::chrono::seconds(30);
    auto result = checked(spec, false);
    std::vector<ImageInfo> images;
    for (const auto& line : split_lines(result.output)) {
      std::istringstream ss(line);
      ImageInfo info;
      ss >> info.tag;
      if (!info.tag.empty()) images.push_back(std::move(info));
    }
    return images;
  }

  std::size_t remove_exited_containers() override {
    CommandSpec spec;
    spec.argv = {binary_, "container", "prune", "-f"};
    spec.timeout = std::chrono::minutes(5);
    checked(spec, true);
    return 0;  // docker does not report a count in a parseable way here
  }

private:
  CommandResult checked(const CommandSpec& spec, bool allow_failure) {
    CommandResult result;
    try {
      result = run_command(spec);
    } catch (const Error& e) {
      throw InfraError(std::string("container engine invocation failed: ") + e.what());
    }
    if (result.exit_code == 127) {
      throw InfraError("container engine unreachable: " + binary_);
    }
    if (!allow_failure && result.exit_code != 0) {
      throw InfraError("container engine error: " + result.output);
    }
    return result;
  }

  std::string binary_;
};

class LocalProcessEngine : public ContainerEngine {
public:
  explicit LocalProcessEngine(fs::path state_dir) : state_dir_(std::move(state_dir)) {
    fs::create_directories(state_dir_ / "images");
    fs::create_directories(state_dir_ / "containers");
  }

  BuildResult build(const fs::path& ctx, const std::string& tag) override {
    fs::path repo = ctx / "repo";
    if (!fs::exists(ctx / "Dockerfile")) {
      return {false, "build failed: no Dockerfile in context " + ctx.string()};
    }
    if (!fs::exists(repo)) {
      return {false, "build failed: no repo/ directory in context " + ctx.string()};
    }
    // A "nonexistent base" should fail like a real engine would.
    std::string dockerfile = read_file(ctx / "Dockerfile");
    if (dockerfile.find("FROM missing/") != std::string::npos) {
      return {false, "build failed: pull access denied for missing base image"};
    }
    fs::path image = image_dir(tag);
    std::error_code ec;
    fs::remove_all(image, ec);
    fs::create_directories(image.parent_path());
    fs::copy(repo, image,
             fs::copy_options::recursive | fs::copy_options::copy_symlinks);
    write_file(image / ".openswe-tag", tag);
    return {true, "snapshot image built from " + repo.string()};
  }

  RunResult run(const std::string& tag, const std::string& script,
                const RunLimits& limits) override {
    fs::path image = image_dir(tag);
    if (!fs::exists(image)) {
      throw InfraError("image not found: " + tag);
    }
    fs::path container =
        state_dir_ / "containers" /
        (sanitize(tag) + "-" + std::to_string(next_container_++));
    fs::copy(image, container,
             fs::copy_options::recursive | fs::copy_options::copy_symlinks);
    fs::path script_file = container / ".openswe-eval.sh";
    write_file(script_file, script);

    CommandSpec spec;
    spec.argv = {"/bin/bash", script_file.string()};
    spec.cwd = container;
    spec.timeout = limits.wall_clock_timeout;
    spec.memory_limit_bytes = limits.memory_bytes;

    auto start = std::chrono::steady_clock::now();
    auto result = run_command(spec);
    RunResult out;
    out.exit_code = result.exit_code;
    out.output = result.output;
    out.timed_out = result.timed_out;
    out.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    std::error_code ec;
    fs::remove_all(container, ec);  // container removed regardless of outcome
    return out;
  }

  bool image_exists(const std::string& tag) override {
    return fs::exists(image_dir(tag));
  }

  void remove_image(const std::string& tag) override {
    std::error_code ec;
    fs::remove_all(image_dir(tag), ec);
  }

  std::vector<ImageInfo> list_images() override {
    std::vector<ImageInfo> images;
    fs::path root = state_dir_ / "images";
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      ImageInfo info;
      fs::path tag_file = entry.path() / ".openswe-tag";
      info.tag = fs::exists(tag_file) ? read_file(tag_file)
                                      : entry.path().filename().string();
      for (const auto& f : fs::recursive_directory_iterator(entry.path())) {
        if (f.is_regular_file()) info.size_bytes += f.file_size();
      }
      images.push_back(std::move(info));
    }
    return images;
  }

  std::size_t remove_exited_containers() override {
    std::size_t removed = 0;
    for (const auto& entry :
         fs::directory_iterator(state_dir_ / "containers")) {
      std::error_code ec;
      fs::remove_all(entry.path(), ec);
      if (!ec) ++removed;
    }
    return removed;
  }

private:
  static std::string sanitize(const std::string& tag) {
    std::string out = tag;
    for (auto& c : out) {
      if (c == '/' || c == ':') c = '_';
    }
    return out;
  }
  fs::path image_dir(const std::string& tag) {
    return state_dir_ / "images" / sanitize(tag);
  }

  fs::path state_dir_;
  std::atomic<int> next_container_{0};
};

}  // namespace

std::unique_ptr<ContainerEngine> make_docker_engine(const std::string& docker_binary) {
  return std::make_unique<DockerEngine>(docker_binary);
}

std::unique_ptr<ContainerEngine> make_local_process_engine(const fs::path& state_dir) {
  return std::make_unique<LocalProcessEngine>(state_dir);
}

}  // namespace openswe::harness
