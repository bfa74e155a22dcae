#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "openswe/engine.hpp"
#include "openswe/ingest.hpp"
#include "openswe/synthesis.hpp"

namespace openswe::harness {

struct ExecutionLog {
  std::string full_text;
  std::optional<std::string> test_section;
  std::optional<int> exit_marker;
  int container_exit = -1;
  bool timed_out = false;
  std::chrono::milliseconds duration{0};
};

enum class VerdictStatus {
  Accepted,
  RejectedNoFail,       // tests already pass without the fix
  RejectedFixFails,     // tests still fail with the fix applied
  RejectedMissingMarker,
  BuildFailed,
  Timeout,
};

const char* to_string(VerdictStatus status);

struct ValidationVerdict {
  VerdictStatus status = VerdictStatus::BuildFailed;
  ExecutionLog test_only_log;
  std::optional<ExecutionLog> with_fix_log;
  std::optional<std::string> image_ref;
  std::string build_log_tail;  // populated on BuildFailed
};

struct ImageCacheEntry {
  std::string dockerfile_hash;
  std::string image_tag;
  std::chrono::system_clock::time_point built_at;
  std::chrono::system_clock::time_point last_used;
  bool accepted = false;
};

// One entry per dockerfile hash per task; single writer per key.
class ImageCache {
public:
  std::optional<ImageCacheEntry> lookup(const std::string& task_id,
                                        const std::string& dockerfile_hash);
  void insert(const std::string& task_id, ImageCacheEntry entry);
  void mark_used(const std::string& task_id, const std::string& dockerfile_hash);
  void mark_accepted(const std::string& image_tag);
  void erase_tag(const std::string& image_tag);
  std::vector<ImageCacheEntry> entries() const;
  std::set<std::string> tags_in_use() const;  // cache-current tags

private:
  mutable std::mutex mutex_;
  std::map<std::string, std::map<std::string, ImageCacheEntry>> by_task_;
};

// `OPENSWE_EXIT_CODE=<n>` anchored at line start (trailing whitespace
// trimmed); returns the value of the last match.
std::optional<int> parse_exit_marker(const std::string& log_text);

// Text strictly between the first Start marker line and the next End marker
// line; malformed ordering yields nullopt.
std::optional<std::string> extract_test_section(const std::string& log_text);

// Returns the cached tag without building when the draft's hash is current;
// otherwise builds and inserts. Throws on engine unavailability (InfraError);
// a failed build throws BuildFailedError carrying the log tail.
class BuildFailedError : public Error {
public:
  BuildFailedError(const std::string& what, std::string tail)
      : Error(what), log_tail(std::move(tail)) {}
  std::string log_tail;
};

std::string build_image(ContainerEngine& engine, const fs::path& ctx,
                        const synthesis::DockerfileDraft& draft,
                        ImageCache& cache, const std::string& task_id,
                        int iteration);

ExecutionLog run_eval(ContainerEngine& engine, const std::string& image_tag,
                      const std::string& script, const RunLimits& limits);

struct ValidateOptions {
  std::string task_id;
  int iteration = 1;
  std::string registry_endpoint;  // empty = no push
  bool double_run = false;        // flakiness check: repeat both conditions
};

// Dual-condition validation: run 1 applies only the test patch (marker must
// be non-zero), run 2 additionally applies the fix patch (marker must be 0).
ValidationVerdict validate_instance(ContainerEngine& engine,
                                    const ingest::TaskCandidate& candidate,
                                    const synthesis::DockerfileDraft& draft,
                                    const synthesis::EvalScriptDraft& script,
                                    ImageCache& cache, const RunLimits& limits,
                                    const fs::path& ctx,
                                    const ValidateOptions& options);

struct PrunePolicy {
  std::chrono::seconds min_idle_age{3600};
  bool keep_accepted = true;
};

struct ReclaimReport {
  std::size_t images_removed = 0;
  std::size_t images_kept = 0;
  std::size_t containers_removed = 0;
  std::uint64_t bytes_reclaimed = 0;
};

// Best effort: engine errors are swallowed per item and pruning continues.
// in_flight_tags are never removed regardless of age.
ReclaimReport prune_resources(ContainerEngine& engine, ImageCache& cache,
                              const PrunePolicy& policy,
                              const std::set<std::string>& in_flight_tags = {});

}  // namespace openswe::harness
