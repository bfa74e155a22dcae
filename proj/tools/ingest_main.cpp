#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "openswe/ingest.hpp"

using namespace openswe;

int main(int argc, char** argv) {
  CLI::App app{"Pull-request ingest and filtering"};
  app.require_subcommand(1);

  // fetch
  std::string repo_id;
  std::string out_dir = "ingest-store";
  std::string api_base = "https://api.github.com";
  std::string token_env = "GITHUB_TOKEN";
  std::string fixture_dir;
  int pages = 10;
  auto* fetch = app.add_subcommand("fetch", "Fetch merged PRs for one repository");
  fetch->add_option("--repo", repo_id, "owner/name")->required();
  fetch->add_option("--out", out_dir, "store directory (one JSONL file per repo)");
  fetch->add_option("--api-base", api_base, "hosting API base URL");
  fetch->add_option("--token-env", token_env, "env var holding the API token");
  fetch->add_option("--fixture", fixture_dir,
                    "replay recorded responses from this directory instead of HTTP");
  fetch->add_option("--pages", pages, "maximum pages to fetch");

  // filter
  std::string in_dir;
  std::string out_file = "candidates.jsonl";
  int min_stars = 5;
  auto* filter = app.add_subcommand("filter", "Filter fetched PRs into task candidates");
  filter->add_option("--in", in_dir, "ingest store directory")->required();
  filter->add_option("--out", out_file, "candidate JSONL output");
  filter->add_option("--min-stars", min_stars, "repository star threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fetch) {
      std::unique_ptr<ingest::HostingApi> api;
      if (!fixture_dir.empty()) {
        api = ingest::make_fixture_api(fixture_dir);
      } else {
        const char* token = std::getenv(token_env.c_str());
        api = ingest::make_http_api(api_base, token ? token : "");
      }
      auto records = ingest::fetch_pull_requests(*api, repo_id, pages, out_dir);
      std::cout << "fetched " << records.size() << " pull requests from "
                << repo_id << "\n";
    } else if (*filter) {
      auto records = ingest::load_pull_requests(in_dir);
      auto report = ingest::filter_candidates(records, min_stars);
      ingest::write_candidates(out_file, report.accepted);
      std::cout << "input:    " << report.input_count << "\n";
      for (const auto& [stage, count] : report.rejected) {
        std::cout << "rejected: " << stage << " " << count << "\n";
      }
      std::cout << "accepted: " << report.accepted.size() << " -> " << out_file
                << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
