#include "openswe/ingest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "openswe/diff.hpp"

namespace openswe::ingest {

using nlohmann::json;

bool is_test_path(const std::string& path) {
  std::string lowered = to_lower(path);
  return lowered.find("test") != std::string::npos ||
         lowered.find("spec") != std::string::npos ||
         lowered.find("e2e") != std::string::npos;
}

SplitPatch split_patch(const std::string& patch) {
  SplitPatch out;
  for (const auto& block : diff::parse_file_blocks(patch)) {
    if (is_test_path(diff::routing_path(block))) {
      out.test_patch += block.text;
    } else {
      out.fix_patch += block.text;
    }
  }
  return out;
}

namespace {

bool has_nonempty_issue(const RawPullRequest& pr) {
  for (const auto& issue : pr.issues) {
    if (!trim(issue.body).empty()) return true;
  }
  return false;
}

std::string concat_issue_text(const RawPullRequest& pr) {
  // Issues concatenated in API order, title then body, blank line between.
  std::string text;
  for (const auto& issue : pr.issues) {
    if (trim(issue.body).empty()) continue;
    if (!text.empty()) text += "\n\n";
    if (!issue.title.empty()) {
      text += issue.title;
      text += "\n";
    }
    text += issue.body;
  }
  return text;
}

}  // namespace

FilterReport filter_candidates(const std::vector<RawPullRequest>& records,
                               int min_stars) {
  FilterReport report;
  report.input_count = records.size();
  for (const auto& pr : records) {
    if (pr.stars < min_stars) {
      ++report.rejected[kStageRepositoryViability];
      continue;
    }
    if (pr.primary_language != "Python") {
      ++report.rejected[kStageLanguageFilter];
      continue;
    }
    if (!has_nonempty_issue(pr)) {
      ++report.rejected[kStageIssueRequirement];
      continue;
    }
    SplitPatch split;
    try {
      split = split_patch(pr.patch);
    } catch (const MalformedPatchError&) {
      ++report.rejected[kStageSubstantiveChanges];
      continue;
    }
    if (split.fix_patch.empty()) {
      ++report.rejected[kStageSubstantiveChanges];
      continue;
    }
    TaskCandidate c;
    c.repo_id = pr.repo_id;
    c.pr_number = pr.pr_number;
    c.base_commit = pr.base_commit;
    c.issue_text = concat_issue_text(pr);
    c.fix_patch = std::move(split.fix_patch);
    c.test_patch = std::move(split.test_patch);
    report.accepted.push_back(std::move(c));
  }
  return report;
}

std::string to_json_line(const RawPullRequest& pr) {
  json issues = json::array();
  for (const auto& issue : pr.issues) {
    issues.push_back({{"issue_id", issue.issue_id},
                      {"title", issue.title},
                      {"body", issue.body}});
  }
  json j = {{"repo_id", pr.repo_id},        {"pr_number", pr.pr_number},
            {"stars", pr.stars},            {"primary_language", pr.primary_language},
            {"issues", issues},             {"patch", pr.patch},
            {"base_commit", pr.base_commit}};
  return j.dump();
}

RawPullRequest pull_request_from_json(const std::string& line) {
  json j = json::parse(line);
  RawPullRequest pr;
  pr.repo_id = j.at("repo_id").get<std::string>();
  pr.pr_number = j.at("pr_number").get<int>();
  pr.stars = j.value("stars", 0);
  pr.primary_language = j.value("primary_language", "");
  pr.patch = j.value("patch", "");
  pr.base_commit = j.value("base_commit", "");
  for (const auto& issue : j.value("issues", json::array())) {
    pr.issues.push_back({issue.value("issue_id", ""), issue.value("title", ""),
                         issue.value("body", "")});
  }
  return pr;
}

std::string to_json_line(const TaskCandidate& c) {
  json j = {{"repo_id", c.repo_id},       {"pr_number", c.pr_number},
            {"base_commit", c.base_commit}, {"issue_text", c.issue_text},
            {"fix_patch", c.fix_patch},   {"test_patch", c.test_patch}};
  return j.dump();
}

TaskCandidate candidate_from_json(const std::string& line) {
  json j = json::parse(line);
  TaskCandidate c;
  c.repo_id = j.at("repo_id").get<std::string>();
  c.pr_number = j.at("pr_number").get<int>();
  c.base_commit = j.at("base_commit").get<std::string>();
  c.issue_text = j.value("issue_text", "");
  c.fix_patch = j.value("fix_patch", "");
  c.test_patch = j.value("test_patch", "");
  return c;
}

std::vector<RawPullRequest> load_pull_requests(const fs::path& dir) {
  std::vector<RawPullRequest> out;
  if (!fs::exists(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      out.push_back(pull_request_from_json(line));
    }
  }
  return out;
}

std::vector<TaskCandidate> load_candidates(const fs::path& file) {
  std::vector<TaskCandidate> out;
  std::ifstream in(file);
  if (!in) throw Error("cannot open candidate file: " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(candidate_from_json(line));
  }
  return out;
}

void write_candidates(const fs::path& file, const std::vector<TaskCandidate>& cs) {
  std::string body;
  for (const auto& c : cs) {
    body += to_json_line(c);
    body += "\n";
  }
  atomic_write_file(file, body);
}

std::vector<RawPullRequest> fetch_pull_requests(HostingApi& api,
                                                const std::string& repo_id,
                                                int page_limit,
                                                const fs::path& store_dir) {
  if (page_limit < 1) throw Error("page_limit must be >= 1");
  fs::create_directories(store_dir);

  std::string file_stem = repo_id;
  for (auto& c : file_stem) {
    if (c == '/') c = '_';
  }
  fs::path store_file = store_dir / (file_stem + ".jsonl");

  std::vector<RawPullRequest> all;
  std::ofstream store(store_file, std::ios::app);
  if (!store) throw Error("cannot open ingest store: " + store_file.string());
  for (int page = 1; page <= page_limit; ++page) {
    auto batch = api.fetch_page(repo_id, page);
    if (batch.empty()) break;
    for (auto& pr : batch) {
      store << to_json_line(pr) << "\n";
      all.push_back(std::move(pr));
    }
  }
  store.flush();
  return all;
}

}  // namespace openswe::ingest
