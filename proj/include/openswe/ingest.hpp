#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "openswe/common.hpp"

namespace openswe::ingest {

struct IssueRef {
  std::string issue_id;
  std::string title;
  std::string body;
};

struct RawPullRequest {
  std::string repo_id;  // "owner/name"
  int pr_number = 0;
  int stars = 0;
  std::string primary_language;
  std::vector<IssueRef> issues;
  std::string patch;        // unified diff, possibly multi-file
  std::string base_commit;  // 40 lowercase hex chars
};

struct TaskCandidate {
  std::string repo_id;
  int pr_number = 0;
  std::string base_commit;
  std::string issue_text;  // concatenated issue bodies
  std::string fix_patch;   // non-test files only, never empty for accepted PRs
  std::string test_patch;  // test files only, may be empty
};

struct FilterReport {
  std::size_t input_count = 0;
  std::map<std::string, std::size_t> rejected;  // stage name -> count
  std::vector<TaskCandidate> accepted;
};

// Filter stage names, in application order.
inline constexpr const char* kStageRepositoryViability = "RepositoryViability";
inline constexpr const char* kStageLanguageFilter = "LanguageFilter";
inline constexpr const char* kStageIssueRequirement = "IssueRequirement";
inline constexpr const char* kStageSubstantiveChanges = "SubstantiveChanges";

// True iff any path segment or file name contains "test", "spec", or "e2e"
// (case-insensitive substring).
bool is_test_path(const std::string& path);

// Routes each per-file block of the diff to the test or fix side. Re-merging
// the two outputs in original file order reproduces the input byte-for-byte.
struct SplitPatch {
  std::string fix_patch;
  std::string test_patch;
};
SplitPatch split_patch(const std::string& patch);

// Four-stage filter; rejections are attributed to the first failing stage.
FilterReport filter_candidates(const std::vector<RawPullRequest>& records,
                               int min_stars = 5);

// JSON (de)serialization for the line-delimited stores.
std::string to_json_line(const RawPullRequest& pr);
RawPullRequest pull_request_from_json(const std::string& line);
std::string to_json_line(const TaskCandidate& c);
TaskCandidate candidate_from_json(const std::string& line);

std::vector<RawPullRequest> load_pull_requests(const fs::path& dir);
std::vector<TaskCandidate> load_candidates(const fs::path& file);
void write_candidates(const fs::path& file, const std::vector<TaskCandidate>& cs);

// Code-hosting API abstraction; the HTTP implementation talks to a
// GitHub-style REST endpoint, the fixture implementation replays recorded
// responses for tests.
class HostingApi {
public:
  virtual ~HostingApi() = default;
  // Returns one page of merged PRs (with linked issues and patch text), or an
  // empty list past the last page. Throws NotFoundError / RetryAfterError.
  virtual std::vector<RawPullRequest> fetch_page(const std::string& repo_id,
                                                 int page) = 0;
};

std::unique_ptr<HostingApi> make_http_api(const std::string& base_url,
                                          const std::string& token);
std::unique_ptr<HostingApi> make_fixture_api(const fs::path& fixture_dir);

// Fetches up to page_limit pages and appends each record to the ingest store
// (one JSON record per line, file named after the repo).
std::vector<RawPullRequest> fetch_pull_requests(HostingApi& api,
                                                const std::string& repo_id,
                                                int page_limit,
                                                const fs::path& store_dir);

}  // namespace openswe::ingest
