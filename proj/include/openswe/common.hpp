#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace openswe {

namespace fs = std::filesystem;

// Base for all pipeline errors; subclasses carry the failure category in the
// type so call sites can route them (feedback vs. crash vs. requeue).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MalformedPatchError : public Error {
public:
  MalformedPatchError(const std::string& what, std::size_t line)
      : Error(what), line_number(line) {}
  std::size_t line_number;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

class RetryAfterError : public Error {
public:
  RetryAfterError(const std::string& what, std::chrono::seconds wait)
      : Error(what), retry_after(wait) {}
  std::chrono::seconds retry_after;
};

class SandboxViolationError : public Error {
public:
  using Error::Error;
};

class UnsupportedContentError : public Error {
public:
  using Error::Error;
};

class UnboundPlaceholderError : public Error {
public:
  UnboundPlaceholderError(const std::string& name)
      : Error("unbound placeholder: " + name), placeholder(name) {}
  std::string placeholder;
};

class FixtureExhaustedError : public Error {
public:
  using Error::Error;
};

class TransportError : public Error {
public:
  using Error::Error;
};

class DelimiterCollisionError : public Error {
public:
  using Error::Error;
};

class MissingCommitError : public Error {
public:
  using Error::Error;
};

class StaleLeaseError : public Error {
public:
  using Error::Error;
};

class DataIntegrityError : public Error {
public:
  using Error::Error;
};

// Infrastructure failures are distinct from task failures: the task goes back
// to the queue instead of being consumed.
class InfraError : public Error {
public:
  using Error::Error;
};

// Minimal expected-like carrier for fallible steps whose failure is routed
// back into the agent loop as feedback rather than thrown.
template <typename T>
struct Outcome {
  std::optional<T> value;
  std::string error;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  T& operator*() { return *value; }
  const T* operator->() const { return &*value; }

  static Outcome success(T v) { return Outcome{std::move(v), {}}; }
  static Outcome failure(std::string msg) { return Outcome{std::nullopt, std::move(msg)}; }
};

// 64-bit FNV-1a, hex-encoded. Used as the content key for Dockerfile drafts
// and queue payload dedup; not cryptographic.
std::string content_hash(const std::string& data);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& data);

// temp + rename within the target directory; readers never observe a partial
// file.
void atomic_write_file(const fs::path& path, const std::string& data);

std::vector<std::string> split_lines(const std::string& text);
std::string trim(const std::string& s);
std::string to_lower(const std::string& s);

// Subprocess execution with combined output capture and a wall-clock kill.
struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
  bool timed_out = false;
};

struct CommandSpec {
  std::vector<std::string> argv;
  std::optional<fs::path> cwd;
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
  std::optional<std::uint64_t> memory_limit_bytes;  // RLIMIT_AS in the child
};

CommandResult run_command(const CommandSpec& spec);

}  // namespace openswe
