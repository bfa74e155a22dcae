#pragma once

// Shared test fixture: a small git repository with a seeded bug, plus the
// test and fix patches that turn it into a validatable task instance.

#include <string>

#include "openswe/common.hpp"
#include "openswe/ingest.hpp"

namespace openswe::testfix {

inline std::string git(const std::vector<std::string>& args, const fs::path& cwd) {
  CommandSpec spec;
  spec.argv = {"git"};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.cwd = cwd;
  spec.timeout = std::chrono::seconds(60);
  auto result = run_command(spec);
  if (result.exit_code != 0) {
    throw Error("git " + args.front() + " failed in fixture setup: " + result.output);
  }
  return result.output;
}

// Mirror layout: <root>/octo/demo is a real git repo whose HEAD commit holds
// mylib.py with add() subtracting instead of adding.
struct BuggyRepo {
  fs::path mirror_root;
  std::string repo_id = "octo/demo";
  std::string base_commit;
  std::string test_patch;      // adds tests/test_add.py, fails on the bug
  std::string vacuous_patch;   // adds a test that passes even with the bug
  std::string fix_patch;       // corrects the bug
  std::string wrong_fix_patch; // touches the file without fixing anything

  explicit BuggyRepo(const fs::path& root) : mirror_root(root) {
    fs::remove_all(mirror_root);
    fs::path repo = mirror_root / repo_id;
    fs::create_directories(repo);
    git({"init", "-q", "-b", "main"}, repo);
    git({"config", "user.email", "fixture@example.com"}, repo);
    git({"config", "user.name", "Fixture"}, repo);

    write_file(repo / "mylib.py",
               "def add(a, b):\n"
               "    return a - b\n");
    write_file(repo / "README.md",
               "# demo\n\nRun tests with `python3 tests/test_add.py`.\n");
    git({"add", "-A"}, repo);
    git({"commit", "-q", "-m", "initial"}, repo);
    base_commit = trim(git({"rev-parse", "HEAD"}, repo));

    auto diff_workdir = [&] {
      git({"add", "-N", "."}, repo);  // make new files visible to diff
      std::string d = git({"diff"}, repo);
      git({"reset", "-q", "--hard"}, repo);  // also clears intent-to-add entries
      git({"clean", "-qfd"}, repo);
      return d;
    };

    fs::create_directories(repo / "tests");
    write_file(repo / "tests" / "test_add.py",
               "import sys, os\n"
               "sys.path.insert(0, os.path.dirname(os.path.dirname(\n"
               "    os.path.abspath(__file__))))\n"
               "from mylib import add\n"
               "assert add(2, 3) == 5, 'add is broken'\n"
               "print('test_add: ok')\n");
    test_patch = diff_workdir();

    fs::create_directories(repo / "tests");
    write_file(repo / "tests" / "test_add.py",
               "import sys, os\n"
               "sys.path.insert(0, os.path.dirname(os.path.dirname(\n"
               "    os.path.abspath(__file__))))\n"
               "from mylib import add\n"
               "assert add(2, 3) == -1  # matches the buggy behavior\n"
               "print('vacuous: ok')\n");
    vacuous_patch = diff_workdir();

    write_file(repo / "mylib.py",
               "def add(a, b):\n"
               "    return a + b\n");
    fix_patch = diff_workdir();

    write_file(repo / "mylib.py",
               "def add(a, b):\n"
               "    # reviewed, looks fine\n"
               "    return a - b\n");
    wrong_fix_patch = diff_workdir();
  }

  ingest::TaskCandidate candidate() const {
    ingest::TaskCandidate c;
    c.repo_id = repo_id;
    c.pr_number = 101;
    c.base_commit = base_commit;
    c.issue_text = "add() returns the difference instead of the sum";
    c.fix_patch = fix_patch;
    c.test_patch = test_patch;
    return c;
  }
};

// Lint-clean artifacts that run under the local process engine, which
// executes scripts with the container copy of the repo as working directory.
inline std::string fixture_dockerfile() {
  return "FROM openswe-python-3.11\n"
         "COPY repo /testbed\n"
         "WORKDIR /testbed\n";
}

inline std::string fixture_eval_script() {
  return "#!/bin/bash\n"
         "git apply -v - <<'EOF_114329324912'\n"
         "[CONTENT OF TEST PATCH]\n"
         "EOF_114329324912\n"
         "\n"
         "echo \">>>>> Start Test Output\"\n"
         "python3 tests/test_add.py\n"
         "rc=$?\n"
         "echo \">>>>> End Test Output\"\n"
         "echo \"OPENSWE_EXIT_CODE=$rc\"\n";
}

}  // namespace openswe::testfix
