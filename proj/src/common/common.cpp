#include "openswe/common.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace openswe {

std::string content_hash(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write file: " + path.string());
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw Error("short write: " + path.string());
  }
}

void atomic_write_file(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(reinterpret_cast<std::uintptr_t>(&data) & 0xffff);
  write_file(tmp, data);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("atomic rename failed for " + path.string() + ": " + ec.message());
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) {
        lines.push_back(text.substr(start));
      }
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

CommandResult run_command(const CommandSpec& spec) {
  int pipefd[2];
  if (::pipe(pipefd) != 0) {
    throw Error(std::string("pipe failed: ") + std::strerror(errno));
  }

  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    throw Error(std::string("fork failed: ") + std::strerror(errno));
  }

  if (pid == 0) {
    ::setpgid(0, 0);
    ::close(pipefd[0]);
    ::dup2(pipefd[1], STDOUT_FILENO);
    ::dup2(pipefd[1], STDERR_FILENO);
    ::close(pipefd[1]);
    if (spec.cwd) {
      if (::chdir(spec.cwd->c_str()) != 0) {
        std::fprintf(stderr, "chdir failed: %s\n", std::strerror(errno));
        ::_exit(127);
      }
    }
    if (spec.memory_limit_bytes) {
      struct rlimit rl;
      rl.rlim_cur = *spec.memory_limit_bytes;
      rl.rlim_max = *spec.memory_limit_bytes;
      ::setrlimit(RLIMIT_AS, &rl);
    }
    std::vector<char*> argv;
    argv.reserve(spec.argv.size() + 1);
    for (const auto& a : spec.argv) {
      argv.push_back(const_cast<char*>(a.c_str()));
    }
    argv.push_back(nullptr);
    ::execvp(argv[0], argv.data());
    std::fprintf(stderr, "exec failed: %s\n", std::strerror(errno));
    ::_exit(127);
  }

  ::setpgid(pid, pid);  // races with the child doing the same; either wins
  ::close(pipefd[1]);

  CommandResult result;
  auto deadline = std::chrono::steady_clock::now() + spec.timeout;

  // Non-blocking read loop so we can enforce the deadline while draining.
  int flags = ::fcntl(pipefd[0], F_GETFL, 0);
  ::fcntl(pipefd[0], F_SETFL, flags | O_NONBLOCK);

  std::array<char, 4096> buf;
  bool eof = false;
  bool killed = false;
  while (!eof) {
    ssize_t n = ::read(pipefd[0], buf.data(), buf.size());
    if (n > 0) {
      result.output.append(buf.data(), static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) {
      eof = true;
      break;
    }
    if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
      eof = true;
      break;
    }
    if (!killed && std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      killed = true;
      result.timed_out = true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::close(pipefd[0]);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace openswe
