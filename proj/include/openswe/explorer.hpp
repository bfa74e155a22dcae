#pragma once

#include <optional>
#include <string>
#include <vector>

#include "openswe/common.hpp"
#include "openswe/ingest.hpp"
#include "openswe/modelio.hpp"

namespace openswe::explorer {

struct ExplorerConfig {
  int max_rounds = 5;
  std::size_t digest_cap_bytes = 64 * 1024;
  std::size_t search_result_limit = 200;
  std::size_t report_length_cap = 16 * 1024;
};

struct ExplorationState {
  fs::path repo_root;
  int rounds_used = 0;
  int max_rounds = 5;
  std::optional<std::string> focus_request;
  std::vector<std::pair<std::string, std::string>> collected;  // (path, digest)
  int skipped_calls = 0;
};

struct RetrievalReport {
  std::vector<std::string> dependency_pins;
  std::string language_version;
  std::vector<std::string> setup_commands;
  std::vector<std::string> test_commands;
  std::string env_framework_notes;
};

std::string report_to_text(const RetrievalReport& report);

struct DirEntry {
  std::string name;
  bool is_directory = false;
  std::uintmax_t size = 0;
};

// Non-recursive listing sorted by name. Paths resolving outside repo_root
// (including through symlinks) throw SandboxViolationError.
std::vector<DirEntry> browse(const ExplorationState& state, const std::string& path);

// Case-insensitive substring match over repo-relative paths, sorted, capped.
std::vector<std::string> search(const ExplorationState& state,
                                const std::string& pattern,
                                std::size_t result_limit = 200);

// File contents truncated to cap with a truncation sentinel; records the
// (path, text) pair into state.collected. Binary files are rejected.
std::string digest(ExplorationState& state, const std::string& path,
                   std::size_t cap_bytes = 64 * 1024);

// Drives the model through at most max_rounds tool-call turns and returns the
// final report (best-effort from collected evidence on round exhaustion).
RetrievalReport run_exploration(const ingest::TaskCandidate& candidate,
                                const fs::path& repo_root,
                                const std::optional<std::string>& focus_request,
                                modelio::ModelClient& client,
                                modelio::AuditLog& audit,
                                const ExplorerConfig& config = {});

}  // namespace openswe::explorer
