#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "openswe/synthesis.hpp"

namespace openswe::synthesis {

namespace {

// Advisory per-repo lock; released on destruction.
class RepoLock {
public:
  explicit RepoLock(const fs::path& lock_file) {
    fd_ = ::open(lock_file.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error("cannot open repo lock: " + lock_file.string());
    // bounded wait: try for ~60s before giving up
    for (int i = 0; i < 600; ++i) {
      if (::flock(fd_, LOCK_EX | LOCK_NB) == 0) return;
      ::usleep(100 * 1000);
    }
    ::close(fd_);
    fd_ = -1;
    throw InfraError("timed out waiting for repo cache lock");
  }
  ~RepoLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

private:
  int fd_ = -1;
};

std::string run_git(const std::vector<std::string>& args,
                    bool allow_failure = false) {
  CommandSpec spec;
  spec.argv = {"git"};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.timeout = std::chrono::minutes(10);
  auto result = run_command(spec);
  if (result.exit_code != 0 && !allow_failure) {
    throw Error("git " + args.front() + " failed: " + result.output);
  }
  return result.output;
}

bool git_ok(const std::vector<std::string>& args) {
  CommandSpec spec;
  spec.argv = {"git"};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.timeout = std::chrono::minutes(2);
  return run_command(spec).exit_code == 0;
}

std::string source_location(const RepoCacheConfig& config,
                            const std::string& repo_id) {
  if (config.source_prefix.rfind("http", 0) == 0 ||
      config.source_prefix.rfind("git@", 0) == 0) {
    std::string url = config.source_prefix;
    if (!url.empty() && url.back() != '/') url += '/';
    return url + repo_id + ".git";
  }
  return (fs::path(config.source_prefix) / repo_id).string();
}

bool commit_present(const fs::path& bare, const std::string& commit) {
  return git_ok({"--git-dir", bare.string(), "cat-file", "-e", commit + "^{commit}"});
}

}  // namespace

void provision_repo(const ingest::TaskCandidate& candidate,
                    const RepoCacheConfig& config, const fs::path& dest) {
  fs::create_directories(config.cache_root);
  std::string stem = candidate.repo_id;
  for (auto& c : stem) {
    if (c == '/') c = '_';
  }
  fs::path bare = config.cache_root / (stem + ".git");
  RepoLock lock(config.cache_root / (stem + ".lock"));

  // already materialized at the right commit: nothing to do, no network
  if (fs::exists(dest / ".git")) {
    CommandSpec spec;
    spec.argv = {"git", "-C", dest.string(), "rev-parse", "HEAD"};
    spec.timeout = std::chrono::seconds(30);
    auto head = run_command(spec);
    if (head.exit_code == 0 && trim(head.output) == candidate.base_commit) {
      return;
    }
    fs::remove_all(dest);
  }

  if (!fs::exists(bare)) {
    run_git({"clone", "--bare", source_location(config, candidate.repo_id),
             bare.string()});
  }
  if (!commit_present(bare, candidate.base_commit)) {
    // refresh once; clone targets without the commit stay missing
    run_git({"--git-dir", bare.string(), "fetch", "origin",
             "+refs/heads/*:refs/heads/*"},
            /*allow_failure=*/true);
    if (!commit_present(bare, candidate.base_commit)) {
      throw MissingCommitError("commit " + candidate.base_commit +
                               " not found in " + candidate.repo_id);
    }
  }

  // local clone from the bare cache (hardlinked objects, no network), then a
  // detached checkout of the base commit
  fs::create_directories(dest.parent_path());
  run_git({"clone", "--no-checkout", bare.string(), dest.string()});
  run_git({"-C", dest.string(), "checkout", "--detach", candidate.base_commit});
}

}  // namespace openswe::synthesis
