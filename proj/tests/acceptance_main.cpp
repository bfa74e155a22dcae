// End-to-end acceptance checks. Each check prints exactly one PASS/FAIL line;
// the process exits non-zero if any check fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <thread>

#include <json.hpp>

#include "fixtures.hpp"
#include "openswe/curation.hpp"
#include "openswe/fleet.hpp"
#include "openswe/orchestrator.hpp"

using namespace openswe;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail,
            double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fs", seconds);
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << " ("
            << buf << ")" << std::endl;
  if (!ok) ++g_failures;
}

void run_check(const std::string& name, double time_budget_seconds,
               const std::function<std::pair<bool, std::string>()>& body) {
  auto start = Clock::now();
  bool ok = false;
  std::string detail;
  try {
    auto result = body();
    ok = result.first;
    detail = result.second;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (ok && time_budget_seconds > 0 && seconds > time_budget_seconds) {
    ok = false;
    detail += " [exceeded time budget]";
  }
  report(name, ok, detail, seconds);
}

fs::path scratch_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / ("openswe-accept-" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// 1. Filter fidelity

ingest::RawPullRequest corpus_pr(int number, int stars,
                                 const std::string& language,
                                 const std::string& issue_body,
                                 const std::string& patch) {
  ingest::RawPullRequest pr;
  pr.repo_id = "octo/corpus";
  pr.pr_number = number;
  pr.stars = stars;
  pr.primary_language = language;
  if (!issue_body.empty() || number % 2 == 0) {
    pr.issues.push_back({"i" + std::to_string(number), "Issue title", issue_body});
  }
  pr.patch = patch;
  pr.base_commit = std::string(40, 'a');
  return pr;
}

std::pair<bool, std::string> check_filter_fidelity() {
  const std::string src_patch =
      "--- a/src/core.py\n+++ b/src/core.py\n@@ -1 +1 @@\n-x = 1\n+x = 2\n";
  const std::string test_only_patch =
      "--- a/tests/test_core.py\n+++ b/tests/test_core.py\n"
      "@@ -1 +1 @@\n-a\n+b\n";

  // 20 records covering every rejection stage and the accepted path
  std::vector<ingest::RawPullRequest> corpus;
  auto add = [&](int n, int stars, const std::string& lang,
                 const std::string& body, const std::string& patch) {
    corpus.push_back(corpus_pr(n, stars, lang, body, patch));
  };
  add(1, 50, "Python", "crash on startup", src_patch);            // accepted
  add(2, 4, "Python", "crash", src_patch);                        // low stars
  add(3, 0, "Python", "crash", src_patch);                        // low stars
  add(4, 50, "Rust", "crash", src_patch);                         // language
  add(5, 50, "python", "crash", src_patch);                       // exact match only
  add(6, 50, "Python", "", src_patch);                            // no issue text
  add(7, 50, "Python", "   \n\t  ", src_patch);                   // blank issue
  add(8, 50, "Python", "crash", "");                              // empty patch
  add(9, 50, "Python", "crash", test_only_patch);                 // no fix side
  add(10, 5, "Python", "boundary stars", src_patch);              // accepted (>=5)
  add(11, 500, "Python", "another bug", src_patch + test_only_patch);  // accepted
  add(12, 1, "Rust", "multi-fail", "");                           // first stage wins
  add(13, 9, "Python", "ok", src_patch);                          // accepted
  add(14, 50, "Python", "ok", "garbage that is not a diff\n");    // malformed
  add(15, 50, "Python", "ok", src_patch);                         // accepted
  add(16, 50, "", "ok", src_patch);                               // empty language
  add(17, 6, "Python", "issue body", src_patch);                  // accepted
  add(18, 7, "Python", "x", src_patch);                           // accepted
  add(19, 50, "Python", "", "");                                  // issue stage first
  add(20, 50, "Python", "ok", test_only_patch);                   // no fix side

  std::set<int> expected = {1, 10, 11, 13, 15, 17, 18};

  // stage predicates, evaluated in all 24 orders: acceptance must be
  // order-independent and equal to the pipeline's verdict
  using Pred = std::function<bool(const ingest::RawPullRequest&)>;
  auto issue_nonempty = [](const ingest::RawPullRequest& pr) {
    for (const auto& issue : pr.issues) {
      if (!trim(issue.body).empty()) return true;
    }
    return false;
  };
  auto has_fix = [](const ingest::RawPullRequest& pr) {
    try {
      return !ingest::split_patch(pr.patch).fix_patch.empty();
    } catch (const MalformedPatchError&) {
      return false;
    }
  };
  std::vector<Pred> stages = {
      [](const ingest::RawPullRequest& pr) { return pr.stars >= 5; },
      [](const ingest::RawPullRequest& pr) { return pr.primary_language == "Python"; },
      issue_nonempty, has_fix};

  auto filtered = ingest::filter_candidates(corpus, 5);
  std::set<int> accepted;
  for (const auto& c : filtered.accepted) accepted.insert(c.pr_number);
  if (accepted != expected) {
    return {false, "pipeline accepted set differs from the hand-derived set"};
  }
  if (filtered.input_count != corpus.size()) {
    return {false, "input count mismatch"};
  }
  std::size_t rejected_total = 0;
  for (const auto& [stage, count] : filtered.rejected) rejected_total += count;
  if (rejected_total + filtered.accepted.size() != corpus.size()) {
    return {false, "accepted + rejected does not cover the corpus"};
  }

  std::vector<int> order = {0, 1, 2, 3};
  int orders_checked = 0;
  do {
    std::set<int> via_stages;
    for (const auto& pr : corpus) {
      bool ok = true;
      for (int s : order) {
        if (!stages[s](pr)) {
          ok = false;
          break;
        }
      }
      if (ok) via_stages.insert(pr.pr_number);
    }
    if (via_stages != expected) {
      return {false, "stage order permutation changed the accepted set"};
    }
    ++orders_checked;
  } while (std::next_permutation(order.begin(), order.end()));

  return {true, "20-record corpus, " + std::to_string(orders_checked) +
                    " stage orders agree"};
}

// ---------------------------------------------------------------------------
// 2. Patch partition

std::pair<bool, std::string> check_patch_partition() {
  std::mt19937 rng(424242);
  std::uniform_int_distribution<int> file_count(1, 8);
  std::uniform_int_distribution<int> hunks(1, 3);
  std::uniform_int_distribution<int> lines(1, 5);
  std::uniform_int_distribution<int> dir_pick(0, 5);
  const char* dirs[] = {"src",  "tests",      "lib",
                        "e2e",  "spec/fixtures", "docs"};

  auto oracle_is_test = [](const std::string& path) {
    std::string lower = to_lower(path);
    return lower.find("test") != std::string::npos ||
           lower.find("spec") != std::string::npos ||
           lower.find("e2e") != std::string::npos;
  };

  for (int trial = 0; trial < 200; ++trial) {
    std::string patch;
    std::string expected_fix;
    std::string expected_test;
    int files = file_count(rng);
    for (int f = 0; f < files; ++f) {
      std::string path = std::string(dirs[dir_pick(rng)]) + "/mod" +
                         std::to_string(trial) + "_" + std::to_string(f) + ".py";
      std::string block;
      block += "diff --git a/" + path + " b/" + path + "\n";
      block += "--- a/" + path + "\n";
      block += "+++ b/" + path + "\n";
      int h = hunks(rng);
      for (int k = 0; k < h; ++k) {
        int removed = lines(rng);
        int added = lines(rng);
        block += "@@ -" + std::to_string(k * 20 + 1) + "," +
                 std::to_string(removed) + " +" + std::to_string(k * 20 + 1) +
                 "," + std::to_string(added) + " @@\n";
        for (int i = 0; i < removed; ++i) {
          block += "-old line " + std::to_string(i) + "\n";
        }
        for (int i = 0; i < added; ++i) {
          block += "+new line " + std::to_string(i) + "\n";
        }
      }
      patch += block;
      (oracle_is_test(path) ? expected_test : expected_fix) += block;
    }

    auto split = ingest::split_patch(patch);
    if (split.fix_patch != expected_fix || split.test_patch != expected_test) {
      return {false, "routing mismatch on trial " + std::to_string(trial)};
    }
    if (split.fix_patch.size() + split.test_patch.size() != patch.size()) {
      return {false, "split is not a byte partition on trial " +
                         std::to_string(trial)};
    }
  }
  return {true, "200 generated diffs split and recombine byte-identically"};
}

// ---------------------------------------------------------------------------
// 3. Script contract

std::pair<bool, std::string> check_script_contract() {
  const std::string reference =
      "#!/bin/bash\n"
      "source /opt/miniconda3/bin/activate\n"
      "conda activate testbed\n"
      "cd /testbed\n"
      "git apply -v --allow-empty - <<'EOF_114329324912'\n"
      "[CONTENT OF TEST PATCH]\n"
      "EOF_114329324912\n"
      "echo \">>>>> Start Test Output\"\n"
      "python -m pytest -rA tests/\n"
      "rc=$? # Required, save exit code\n"
      "echo \">>>>> End Test Output\"\n"
      "echo \"OPENSWE_EXIT_CODE=$rc\" #Required, echo test status\n";

  if (!synthesis::lint_eval_script(reference).empty()) {
    return {false, "the reference script does not lint clean"};
  }

  auto drop_line = [&](const std::string& needle) {
    std::string out;
    for (const auto& line : split_lines(reference)) {
      if (line.find(needle) != std::string::npos) continue;
      out += line + "\n";
    }
    return out;
  };
  auto replace_once = [&](const std::string& from, const std::string& to) {
    std::string out = reference;
    out.replace(out.find(from), from.size(), to);
    return out;
  };

  struct Mutant {
    std::string name;
    std::string text;
    std::vector<std::string> expected_codes;
  };
  std::vector<Mutant> mutants = {
      {"drop placeholder", drop_line("[CONTENT OF TEST PATCH]"), {"placeholder"}},
      {"drop heredoc open", drop_line("<<'EOF_114329324912'"), {"heredoc"}},
      {"drop heredoc close",
       replace_once("EOF_114329324912\necho", "echo"), {"heredoc"}},
      {"drop start marker", drop_line(">>>>> Start Test Output"), {"start-marker"}},
      {"drop end marker", drop_line(">>>>> End Test Output"), {"end-marker"}},
      {"drop rc capture", drop_line("rc=$?"), {"rc-capture"}},
      {"drop marker echo", drop_line("OPENSWE_EXIT_CODE=$rc"), {"marker-echo"}},
      {"add set -e", "set -e\n" + reference, {"set-e"}},
      {"duplicate placeholder",
       reference + "# [CONTENT OF TEST PATCH]\n", {"placeholder"}},
      {"hardcode rc", replace_once("rc=$? ", "rc=0  "), {"rc-capture"}},
  };

  for (const auto& m : mutants) {
    std::vector<std::string> codes;
    for (const auto& v : synthesis::lint_eval_script(m.text)) {
      codes.push_back(v.code);
    }
    if (codes != m.expected_codes) {
      std::string got;
      for (const auto& c : codes) got += c + " ";
      return {false, "mutant '" + m.name + "' produced [" + got +
                         "] instead of the expected violation"};
    }
  }
  return {true, "reference script clean; 10 mutants each yield exactly the "
                "expected violation"};
}

// ---------------------------------------------------------------------------
// 4. Marker parsing

std::pair<bool, std::string> check_marker_parsing() {
  auto oracle = [](const std::string& text) -> std::optional<int> {
    static const std::regex kMarker(R"(^OPENSWE_EXIT_CODE=(\d+)$)");
    std::optional<int> last;
    for (auto line : split_lines(text)) {
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t' ||
                               line.back() == '\r')) {
        line.pop_back();
      }
      std::smatch m;
      if (std::regex_match(line, m, kMarker)) {
        try {
          last = std::stoi(m[1].str());
        } catch (const std::out_of_range&) {
        }
      }
    }
    return last;
  };

  std::vector<std::string> logs = {
      "OPENSWE_EXIT_CODE=0\n", "OPENSWE_EXIT_CODE=1\n",
      "OPENSWE_EXIT_CODE=1\nOPENSWE_EXIT_CODE=0\n",
      "XOPENSWE_EXIT_CODE=1\n", " OPENSWE_EXIT_CODE=1\n",
      "OPENSWE_EXIT_CODE=1 \n", "OPENSWE_EXIT_CODE=\n",
      "OPENSWE_EXIT_CODE=2x\n", "OPENSWE_EXIT_CODE=$rc\n",
      "echo OPENSWE_EXIT_CODE=3\n", "", "nothing here\n",
  };
  const std::vector<std::string> pool = {
      "test session starts", "OPENSWE_EXIT_CODE=0", "OPENSWE_EXIT_CODE=5",
      "OPENSWE_EXIT_CODE= 1", "xOPENSWE_EXIT_CODE=2", "FAILED x",
      "OPENSWE_EXIT_CODE=17\t", "OPENSWE_EXIT_CODE=08",
  };
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> len(1, 10);
  for (int i = 0; i < 50; ++i) {
    std::string log;
    for (int j = 0, n = len(rng); j < n; ++j) log += pool[pick(rng)] + "\n";
    logs.push_back(log);
  }

  for (const auto& log : logs) {
    if (harness::parse_exit_marker(log) != oracle(log)) {
      return {false, "parser disagrees with the oracle"};
    }
  }
  return {true, std::to_string(logs.size()) +
                    " crafted logs all match the line-scan oracle"};
}

// ---------------------------------------------------------------------------
// 5. Dual-condition oracle

std::pair<bool, std::string> check_dual_condition() {
  fs::path area = scratch_dir("dual");
  testfix::BuggyRepo repo(area / "mirror");
  auto engine = harness::make_local_process_engine(area / "engine");

  fs::path ctx = area / "ctx";
  synthesis::RepoCacheConfig cache_config;
  cache_config.cache_root = area / "repo-cache";
  cache_config.source_prefix = repo.mirror_root.string();
  synthesis::provision_repo(repo.candidate(), cache_config, ctx / "repo");

  synthesis::DockerfileDraft draft;
  draft.text = testfix::fixture_dockerfile();
  draft.python_version = "3.11";
  draft.hash = content_hash(draft.text);
  synthesis::EvalScriptDraft script;
  script.template_text = testfix::fixture_eval_script();
  harness::RunLimits limits;
  limits.wall_clock_timeout = std::chrono::seconds(60);
  harness::ImageCache cache;
  harness::ValidateOptions options;
  options.task_id = "octo-demo-101";

  auto validate = [&](const ingest::TaskCandidate& candidate) {
    return harness::validate_instance(*engine, candidate, draft, script, cache,
                                      limits, ctx, options)
        .status;
  };

  auto good = validate(repo.candidate());
  auto withheld_candidate = repo.candidate();
  withheld_candidate.fix_patch.clear();  // fix withheld: nothing to apply
  auto withheld = validate(withheld_candidate);
  auto vacuous_candidate = repo.candidate();
  vacuous_candidate.test_patch = repo.vacuous_patch;
  auto vacuous = validate(vacuous_candidate);

  fs::remove_all(area);
  if (good != harness::VerdictStatus::Accepted) {
    return {false, std::string("seeded fixture: expected Accepted, got ") +
                       harness::to_string(good)};
  }
  if (withheld != harness::VerdictStatus::RejectedFixFails) {
    return {false, std::string("withheld fix: expected RejectedFixFails, got ") +
                       harness::to_string(withheld)};
  }
  if (vacuous != harness::VerdictStatus::RejectedNoFail) {
    return {false, std::string("vacuous test: expected RejectedNoFail, got ") +
                       harness::to_string(vacuous)};
  }
  return {true, "Accepted / RejectedFixFails / RejectedNoFail as seeded"};
}

// ---------------------------------------------------------------------------
// 6. Cache contract

std::pair<bool, std::string> check_cache_contract() {
  fs::path area = scratch_dir("cache");
  testfix::BuggyRepo repo(area / "mirror");
  fs::path ctx = area / "ctx";
  synthesis::RepoCacheConfig cache_config;
  cache_config.cache_root = area / "repo-cache";
  cache_config.source_prefix = repo.mirror_root.string();
  synthesis::provision_repo(repo.candidate(), cache_config, ctx / "repo");

  harness::RunLimits limits;
  limits.wall_clock_timeout = std::chrono::seconds(60);

  auto iteration = [&](harness::RecordingEngine& engine,
                       harness::ImageCache& cache, int iter,
                       const std::string& dockerfile,
                       const std::string& script_suffix) {
    synthesis::DockerfileDraft draft;
    draft.text = dockerfile;
    draft.python_version = "3.11";
    draft.iteration = iter;
    draft.hash = content_hash(draft.text);
    synthesis::EvalScriptDraft script;
    script.template_text = testfix::fixture_eval_script() + script_suffix;
    harness::ValidateOptions options;
    options.task_id = "octo-demo-101";
    options.iteration = iter;
    harness::validate_instance(engine, repo.candidate(), draft, script, cache,
                               limits, ctx, options);
  };

  // run A: only the eval script changes across 3 iterations
  {
    harness::RecordingEngine engine(
        harness::make_local_process_engine(area / "engine-a"));
    harness::ImageCache cache;
    for (int iter = 1; iter <= 3; ++iter) {
      iteration(engine, cache, iter, testfix::fixture_dockerfile(),
                "# rev " + std::to_string(iter) + "\n");
    }
    if (engine.build_calls() != 1) {
      fs::remove_all(area);
      return {false, "script-only run built " +
                         std::to_string(engine.build_calls()) +
                         " times instead of once"};
    }
  }

  // run B: the Dockerfile changes on iteration 2 and then stays fixed
  {
    harness::RecordingEngine engine(
        harness::make_local_process_engine(area / "engine-b"));
    harness::ImageCache cache;
    std::string changed = testfix::fixture_dockerfile() + "RUN pip install pytest\n";
    iteration(engine, cache, 1, testfix::fixture_dockerfile(), "");
    iteration(engine, cache, 2, changed, "");
    iteration(engine, cache, 3, changed, "# rev\n");
    if (engine.build_calls() != 2) {
      fs::remove_all(area);
      return {false, "dockerfile-change run built " +
                         std::to_string(engine.build_calls()) +
                         " times instead of twice"};
    }
  }

  fs::remove_all(area);
  return {true, "1 build when only the script changes; 2 when the Dockerfile "
                "changes once"};
}

// ---------------------------------------------------------------------------
// 7. End-to-end with a scripted model

std::pair<bool, std::string> check_e2e_scripted() {
  fs::path area = scratch_dir("e2e");
  testfix::BuggyRepo repo(area / "mirror");
  auto engine = harness::make_local_process_engine(area / "engine");

  orchestrator::LoopConfig config;
  config.work_root = area / "work";
  config.repo_cache.cache_root = area / "repo-cache";
  config.repo_cache.source_prefix = repo.mirror_root.string();
  config.limits.wall_clock_timeout = std::chrono::seconds(60);

  auto client = modelio::make_scripted_client(
      {{"exploration",
        {"```json\n{\"tool\": \"report\", \"language_version\": \"3.11\",\n"
         " \"test_commands\": [\"python3 tests/test_add.py\"],\n"
         " \"env_framework_notes\": \"stdlib only\"}\n```"}},
       {"dockerfile_init",
        {std::string("<dockerfile>\n") + testfix::fixture_dockerfile() +
         "</dockerfile>"}},
       {"evalscript_init",
        {std::string("<script>\n") + testfix::fixture_eval_script() +
         "</script>"}},
       {"analysis", {"{\"is_finish\": true}"}}});

  harness::ImageCache cache;
  auto record = orchestrator::run_task_loop(repo.candidate(), *client, *engine,
                                            cache, config);
  bool ok = record.final_status == orchestrator::TaskStatus::Accepted &&
            record.iteration_count <= 2 && !record.image_ref.empty();
  std::string detail =
      ok ? "scripted transcripts only (no model endpoint contacted); Accepted "
           "after " + std::to_string(record.iteration_count) + " iteration(s)"
         : std::string("final status ") +
               orchestrator::to_string(record.final_status) + " after " +
               std::to_string(record.iteration_count) + " iteration(s)";
  fs::remove_all(area);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 8. Legitimacy gate

std::pair<bool, std::string> check_legitimacy_gate() {
  fs::path area = scratch_dir("gate");
  testfix::BuggyRepo repo(area / "mirror");
  auto engine = harness::make_local_process_engine(area / "engine");

  // the script runs the real tests but also contains a literal marker echo;
  // both validation runs still produce genuine markers (the $rc echo comes
  // last), so only the static pre-check stands between it and acceptance
  std::string cheat = testfix::fixture_eval_script();
  auto pos = cheat.find("echo \"OPENSWE_EXIT_CODE=$rc\"");
  cheat.insert(pos, "echo \"OPENSWE_EXIT_CODE=0\"\n");

  // first confirm the dynamic check alone would wave this script through
  synthesis::RepoCacheConfig cache_config;
  cache_config.cache_root = area / "repo-cache";
  cache_config.source_prefix = repo.mirror_root.string();
  fs::path ctx = area / "ctx";
  synthesis::provision_repo(repo.candidate(), cache_config, ctx / "repo");
  synthesis::DockerfileDraft draft;
  draft.text = testfix::fixture_dockerfile();
  draft.python_version = "3.11";
  draft.hash = content_hash(draft.text);
  synthesis::EvalScriptDraft cheat_draft;
  cheat_draft.template_text = cheat;
  harness::RunLimits limits;
  limits.wall_clock_timeout = std::chrono::seconds(60);
  harness::ImageCache direct_cache;
  harness::ValidateOptions options;
  options.task_id = "octo-demo-101";
  auto direct = harness::validate_instance(*engine, repo.candidate(), draft,
                                           cheat_draft, direct_cache, limits,
                                           ctx, options);
  if (direct.status != harness::VerdictStatus::Accepted) {
    fs::remove_all(area);
    return {false, std::string("expected the raw dual-condition check to pass "
                               "the literal-marker script, got ") +
                       harness::to_string(direct.status)};
  }

  orchestrator::LoopConfig config;
  config.max_iterations = 2;
  config.work_root = area / "work";
  config.repo_cache.cache_root = area / "repo-cache";
  config.repo_cache.source_prefix = repo.mirror_root.string();
  config.limits.wall_clock_timeout = std::chrono::seconds(60);

  std::string script_reply = "<script>\n" + cheat + "</script>";
  auto client = modelio::make_scripted_client(
      {{"exploration",
        {"```json\n{\"tool\": \"report\", \"language_version\": \"3.11\",\n"
         " \"test_commands\": [\"python3 tests/test_add.py\"]}\n```"}},
       {"dockerfile_init",
        {std::string("<dockerfile>\n") + testfix::fixture_dockerfile() +
         "</dockerfile>"}},
       {"evalscript_init", {script_reply, script_reply, script_reply}},
       // the analysis agent would wave it through every time
       {"analysis",
        {"{\"is_finish\": true}", "{\"is_finish\": true}",
         "{\"is_finish\": true}"}}});

  harness::ImageCache cache;
  auto record = orchestrator::run_task_loop(repo.candidate(), *client, *engine,
                                            cache, config);
  fs::remove_all(area);

  bool blocked = record.final_status != orchestrator::TaskStatus::Accepted;
  bool flagged = record.hardcoded_marker_flagged;
  if (blocked && flagged) {
    return {true, "literal-marker script passes raw validation but the static "
                  "pre-check keeps it out of Accepted"};
  }
  return {false, std::string("final status ") +
                     orchestrator::to_string(record.final_status) +
                     (flagged ? " (flagged)" : " (not flagged)")};
}

// ---------------------------------------------------------------------------
// 9. Queue chaos

std::pair<bool, std::string> check_queue_chaos() {
  fs::path forge = fs::read_symlink("/proc/self/exe").parent_path() / "forge";
  if (!fs::exists(forge)) {
    return {false, "forge binary not found next to this executable"};
  }

  fs::path root = scratch_dir("chaos");
  fleet::init_queue(root);
  std::vector<fleet::QueueTask> tasks;
  for (int i = 0; i < 100; ++i) {
    fleet::QueueTask t;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "noop-%04d", i);
    t.task_id = buf;
    t.payload = "{}";
    tasks.push_back(std::move(t));
  }
  if (fleet::enqueue(root, tasks) != 100) {
    return {false, "could not enqueue 100 tasks"};
  }

  std::vector<pid_t> children;
  for (int w = 0; w < 4; ++w) {
    pid_t pid = fork();
    if (pid == 0) {
      std::string id = "chaos-w" + std::to_string(w);
      std::string queue = root.string();
      execl(forge.c_str(), "forge", "worker", "--id", id.c_str(), "--queue",
            queue.c_str(), "--noop", "--noop-delay", "40", "--drain",
            "--lease-ttl", "2", (char*)nullptr);
      _exit(127);  // exec failed
    }
    children.push_back(pid);
  }

  // let the victim pick up work, then kill it without warning
  std::this_thread::sleep_for(std::chrono::milliseconds(400));
  kill(children[0], SIGKILL);

  // sample mutual exclusion while the rest drain the queue
  auto deadline = Clock::now() + std::chrono::seconds(110);
  bool exclusion_ok = true;
  while (Clock::now() < deadline) {
    for (const auto& entry : fs::directory_iterator(root / "leased")) {
      if (entry.path().extension() == ".lease") continue;
      auto name = entry.path().filename().string();
      if (name.find(".tmp.") != std::string::npos) continue;
      // claims and reclaims are single renames, so a task file can never be
      // in both directories; re-check both to rule out listing-time skew
      if (fs::exists(root / "pending" / name) &&
          fs::exists(root / "leased" / name) &&
          fs::exists(root / "pending" / name)) {
        exclusion_ok = false;
      }
    }
    auto snap = fleet::queue_snapshot(root);
    if (snap.done >= 100 && snap.pending == 0 && snap.leased == 0) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }

  for (pid_t pid : children) {
    int status = 0;
    waitpid(pid, &status, 0);
  }

  auto snap = fleet::queue_snapshot(root);
  std::size_t done_records = 0;
  std::set<std::string> done_ids;
  for (const auto& entry : fs::directory_iterator(root / "done")) {
    auto parsed = nlohmann::json::parse(read_file(entry.path()));
    done_ids.insert(parsed.at("task_id").get<std::string>());
    ++done_records;
  }
  fs::remove_all(root);

  if (!exclusion_ok) {
    return {false, "a task was visible in pending and leased at once"};
  }
  if (snap.done != 100 || done_records != 100 || done_ids.size() != 100 ||
      snap.pending != 0 || snap.leased != 0 || snap.parked != 0) {
    return {false, "done=" + std::to_string(snap.done) +
                       " distinct=" + std::to_string(done_ids.size()) +
                       " pending=" + std::to_string(snap.pending) +
                       " leased=" + std::to_string(snap.leased) +
                       " parked=" + std::to_string(snap.parked)};
  }
  return {true, "4 workers, one killed mid-lease: all 100 tasks done exactly "
                "once, exclusion held at every sample"};
}

// ---------------------------------------------------------------------------
// 10. Curation equivalence

std::pair<bool, std::string> check_curation_equivalence() {
  curation::CurationConfig config;
  std::mt19937 rng(90210);
  std::uniform_int_distribution<int> task_count(1, 8);
  std::uniform_int_distribution<int> scaffold_count(1, 2);
  std::bernoulli_distribution resolved(0.35);
  std::bernoulli_distribution poison(0.1);

  fs::path out = fs::temp_directory_path() / "openswe-accept-curation.jsonl";

  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<curation::RolloutRecord> rollouts;
    int tasks = task_count(rng);
    for (int t = 0; t < tasks; ++t) {
      for (int s = 0, n = scaffold_count(rng); s < n; ++s) {
        for (int attempt = 1; attempt <= config.attempts_per_task; ++attempt) {
          curation::RolloutRecord r;
          r.task_id = "task-" + std::to_string(t);
          r.scaffold = "sc-" + std::to_string(s);
          r.attempt_index = attempt;
          r.resolved = resolved(rng);
          r.trajectory.steps = {{"ls", "ok", false}};
          if (r.resolved && poison(rng)) {
            r.trajectory.steps.push_back({"git pull", "updated", false});
          }
          rollouts.push_back(std::move(r));
        }
      }
    }

    // brute-force expectations
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& r : rollouts) {
      counts[{r.task_id, r.scaffold}] += r.resolved ? 1 : 0;
    }
    std::set<std::string> expected_kept;
    for (const auto& [key, count] : counts) {
      if (config.keep_pass_counts.count(count)) expected_kept.insert(key.first);
    }
    std::size_t expected_records = 0;
    for (const auto& r : rollouts) {
      if (!r.resolved || !expected_kept.count(r.task_id)) continue;
      bool poisoned = false;
      for (const auto& step : r.trajectory.steps) {
        if (step.action.find("git pull") != std::string::npos) poisoned = true;
      }
      if (!poisoned) ++expected_records;
    }

    auto kept = curation::select_instances(
        curation::aggregate_pass_counts(rollouts, config), config);
    if (kept != expected_kept) {
      return {false, "kept set mismatch on trial " + std::to_string(trial)};
    }
    auto report = curation::export_training_set(kept, rollouts, config, out);
    if (report.trajectories_out != expected_records) {
      return {false, "record count mismatch on trial " + std::to_string(trial)};
    }
  }
  fs::remove(out);

  // sanitize: 100% rejection of snapshot-violating fixtures, 100% masking
  int rejected = 0;
  int masked = 0;
  for (int i = 0; i < 100; ++i) {
    curation::Trajectory bad;
    bad.steps = {{"setup", "ok", false},
                 {"git pull --rebase origin branch" + std::to_string(i),
                  "done", false}};
    if (!curation::sanitize_trajectory(bad, config)) ++rejected;

    curation::Trajectory err;
    err.steps = {{"step", "Traceback (most recent call last):\n case " +
                              std::to_string(i), false}};
    auto out_traj = curation::sanitize_trajectory(err, config);
    if (out_traj && out_traj->steps[0].mask) ++masked;
  }
  if (rejected != 100 || masked != 100) {
    return {false, "sanitize rejected " + std::to_string(rejected) +
                       "/100 and masked " + std::to_string(masked) + "/100"};
  }
  return {true, "1000 synthetic sets match brute force; sanitize rejected "
                "100/100 and masked 100/100"};
}

}  // namespace

int main() {
  run_check("filter fidelity", 1.0, check_filter_fidelity);
  run_check("patch partition", 5.0, check_patch_partition);
  run_check("script contract", 0, check_script_contract);
  run_check("marker parsing", 0, check_marker_parsing);
  run_check("dual-condition oracle", 180.0, check_dual_condition);
  run_check("cache contract", 0, check_cache_contract);
  run_check("end-to-end scripted loop", 0, check_e2e_scripted);
  run_check("legitimacy gate", 0, check_legitimacy_gate);
  run_check("queue chaos", 120.0, check_queue_chaos);
  run_check("curation equivalence", 0, check_curation_equivalence);

  if (g_failures > 0) {
    std::cout << g_failures << " acceptance check(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all acceptance checks passed" << std::endl;
  return 0;
}
