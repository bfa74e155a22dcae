#include <regex>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "openswe/ingest.hpp"

namespace openswe::ingest {

using nlohmann::json;

namespace {

// GitHub-style REST client. One page of merged PRs plus the per-PR diff and
// linked issue bodies; repo metadata (stars, language) is fetched once and
// reused across pages.
class HttpHostingApi : public HostingApi {
public:
  HttpHostingApi(std::string base_url, std::string token)
      : base_url_(std::move(base_url)), token_(std::move(token)) {}

  std::vector<RawPullRequest> fetch_page(const std::string& repo_id,
                                         int page) override {
    ensure_repo_meta(repo_id);

    json pulls = get_json("/repos/" + repo_id +
                          "/pulls?state=closed&per_page=100&page=" +
                          std::to_string(page));
    std::vector<RawPullRequest> out;
    for (const auto& pull : pulls) {
      if (pull.value("merged_at", json()).is_null()) continue;
      RawPullRequest pr;
      pr.repo_id = repo_id;
      pr.pr_number = pull.value("number", 0);
      pr.stars = stars_;
      pr.primary_language = language_;
      pr.base_commit = pull.value("base", json::object()).value("sha", "");
      pr.patch = get_text("/repos/" + repo_id + "/pulls/" +
                              std::to_string(pr.pr_number),
                          "application/vnd.github.v3.diff");
      for (int issue_number : linked_issue_numbers(pull)) {
        json issue = get_json("/repos/" + repo_id + "/issues/" +
                              std::to_string(issue_number));
        IssueRef ref;
        ref.issue_id = std::to_string(issue_number);
        ref.title = issue.value("title", "");
        ref.body = issue.value("body", json()).is_string()
                       ? issue["body"].get<std::string>()
                       : "";
        pr.issues.push_back(std::move(ref));
      }
      out.push_back(std::move(pr));
    }
    return out;
  }

private:
  static std::set<int> linked_issue_numbers(const json& pull) {
    // closes/fixes/resolves #N references in the PR body
    std::set<int> numbers;
    std::string body = pull.value("body", json()).is_string()
                           ? pull["body"].get<std::string>()
                           : "";
    static const std::regex kRef(
        R"((?:close[sd]?|fix(?:e[sd])?|resolve[sd]?)\s+#(\d+))",
        std::regex::icase);
    for (auto it = std::sregex_iterator(body.begin(), body.end(), kRef);
         it != std::sregex_iterator(); ++it) {
      numbers.insert(std::stoi((*it)[1].str()));
    }
    return numbers;
  }

  void ensure_repo_meta(const std::string& repo_id) {
    if (meta_repo_ == repo_id) return;
    json repo = get_json("/repos/" + repo_id);
    stars_ = repo.value("stargazers_count", 0);
    language_ = repo.value("language", json()).is_string()
                    ? repo["language"].get<std::string>()
                    : "";
    meta_repo_ = repo_id;
  }

  json get_json(const std::string& path) {
    return json::parse(get_text(path, "application/vnd.github+json"));
  }

  std::string get_text(const std::string& path, const std::string& accept) {
    httplib::Client client(base_url_);
    client.set_read_timeout(30, 0);
    httplib::Headers headers = {{"Accept", accept},
                                {"User-Agent", "openswe-ingest"}};
    if (!token_.empty()) {
      headers.emplace("Authorization", "Bearer " + token_);
    }
    auto res = client.Get(path, headers);
    if (!res) {
      throw TransportError("request failed: " + base_url_ + path);
    }
    if (res->status == 404) {
      throw NotFoundError("not found: " + path);
    }
    if (res->status == 403 || res->status == 429) {
      int wait = 60;
      if (res->has_header("Retry-After")) {
        wait = std::stoi(res->get_header_value("Retry-After"));
      }
      throw RetryAfterError("rate limited on " + path,
                            std::chrono::seconds(wait));
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("HTTP " + std::to_string(res->status) + " on " + path);
    }
    return res->body;
  }

  std::string base_url_;
  std::string token_;
  std::string meta_repo_;
  int stars_ = 0;
  std::string language_;
};

// Replays recorded pages from disk. Layout, with '/' in the repo id replaced
// by '_':
//   <dir>/<repo>.page<N>.json   JSON array of RawPullRequest records
//   <dir>/<repo>.ratelimit      text file holding the retry-after seconds
// A repo with no files at all is treated as missing (404).
class FixtureHostingApi : public HostingApi {
public:
  explicit FixtureHostingApi(fs::path dir) : dir_(std::move(dir)) {}

  std::vector<RawPullRequest> fetch_page(const std::string& repo_id,
                                         int page) override {
    std::string stem = repo_id;
    for (auto& c : stem) {
      if (c == '/') c = '_';
    }
    fs::path limit_file = dir_ / (stem + ".ratelimit");
    if (fs::exists(limit_file)) {
      int wait = std::stoi(trim(read_file(limit_file)));
      throw RetryAfterError("rate limited (fixture): " + repo_id,
                            std::chrono::seconds(wait));
    }
    fs::path page_file = dir_ / (stem + ".page" + std::to_string(page) + ".json");
    if (!fs::exists(page_file)) {
      if (page > 1) return {};  // past the last recorded page
      throw NotFoundError("not found (fixture): " + repo_id);
    }
    json records = json::parse(read_file(page_file));
    std::vector<RawPullRequest> out;
    for (const auto& record : records) {
      out.push_back(pull_request_from_json(record.dump()));
    }
    return out;
  }

private:
  fs::path dir_;
};

}  // namespace

std::unique_ptr<HostingApi> make_http_api(const std::string& base_url,
                                          const std::string& token) {
  return std::make_unique<HttpHostingApi>(base_url, token);
}

std::unique_ptr<HostingApi> make_fixture_api(const fs::path& fixture_dir) {
  return std::make_unique<FixtureHostingApi>(fixture_dir);
}

}  // namespace openswe::ingest
