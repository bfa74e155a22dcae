#include "openswe/synthesis.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

namespace openswe::synthesis {

const std::vector<std::string>& allowed_python_versions() {
  static const std::vector<std::string> versions = {
      "2.7", "3.5", "3.6", "3.7",  "3.8",  "3.9",
      "3.10", "3.11", "3.12", "3.13", "3.14"};
  return versions;
}

bool is_allowed_python_version(const std::string& version) {
  const auto& allowed = allowed_python_versions();
  return std::find(allowed.begin(), allowed.end(), version) != allowed.end();
}

std::string base_image_tag(const std::string& python_version) {
  return "openswe-python-" + python_version;
}

namespace {

// "3.12", "python3.12", "3.12.1" -> "3.12"
std::optional<std::string> normalize_python_version(const std::string& raw) {
  static const std::regex kVersion(R"((\d+)\.(\d+))");
  std::smatch m;
  if (!std::regex_search(raw, m, kVersion)) return std::nullopt;
  return m[1].str() + "." + m[2].str();
}

}  // namespace

std::string pick_python_version(const explorer::RetrievalReport& report) {
  if (auto v = normalize_python_version(report.language_version)) {
    if (is_allowed_python_version(*v)) return *v;
  }
  for (const auto& pin : report.dependency_pins) {
    if (to_lower(pin).rfind("python", 0) == 0) {
      if (auto v = normalize_python_version(pin)) {
        if (is_allowed_python_version(*v)) return *v;
      }
    }
  }
  return allowed_python_versions().back();
}

namespace {

struct DockerLine {
  std::string instruction;  // uppercased first word
  std::string args;
};

std::vector<DockerLine> docker_lines(const std::string& text) {
  // joins backslash continuations; skips comments and blanks
  std::vector<DockerLine> out;
  std::string pending;
  for (auto& raw : split_lines(text)) {
    std::string line = raw;
    if (!pending.empty()) {
      line = pending + " " + trim(line);
      pending.clear();
    }
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!t.empty() && t.back() == '\\') {
      pending = t.substr(0, t.size() - 1);
      continue;
    }
    std::size_t space = t.find_first_of(" \t");
    DockerLine dl;
    dl.instruction = to_lower(t.substr(0, space));
    dl.args = space == std::string::npos ? "" : trim(t.substr(space + 1));
    out.push_back(std::move(dl));
  }
  if (!pending.empty()) {
    std::size_t space = pending.find_first_of(" \t");
    out.push_back({to_lower(pending.substr(0, space)),
                   space == std::string::npos ? "" : trim(pending.substr(space + 1))});
  }
  return out;
}

bool contains_token(const std::string& haystack, const std::string& token) {
  return haystack.find(token) != std::string::npos;
}

}  // namespace

std::vector<Violation> lint_dockerfile(const std::string& text) {
  std::vector<Violation> violations;
  auto lines = docker_lines(text);
  bool has_override = text.find(kBaseImageOverrideMarker) != std::string::npos;

  // (a) base image
  const DockerLine* first_from = nullptr;
  for (const auto& l : lines) {
    if (l.instruction == "from") {
      first_from = &l;
      break;
    }
  }
  if (!first_from) {
    violations.push_back({"base-image", "Dockerfile has no FROM instruction"});
  } else if (!has_override) {
    std::string image = first_from->args;
    std::size_t space = image.find_first_of(" \t");  // drop "AS stage"
    if (space != std::string::npos) image = image.substr(0, space);
    const std::string prefix = "openswe-python-";
    bool ok = image.rfind(prefix, 0) == 0 &&
              is_allowed_python_version(image.substr(prefix.size()));
    if (!ok) {
      violations.push_back(
          {"base-image",
           "first FROM must use openswe-python-<version> with an allowed "
           "python version (or carry the '" +
               std::string(kBaseImageOverrideMarker) + "' marker); got: " + image});
    }
  }

  // (b) COPY repo /testbed
  bool has_copy = false;
  for (const auto& l : lines) {
    if (l.instruction != "copy") continue;
    std::istringstream args(l.args);
    std::string src, dst;
    args >> src >> dst;
    if (src == "repo" && (dst == "/testbed" || dst == "/testbed/")) {
      has_copy = true;
      break;
    }
  }
  if (!has_copy) {
    violations.push_back({"copy-repo", "missing 'COPY repo /testbed'"});
  }

  // (c) WORKDIR /testbed
  bool has_workdir = false;
  for (const auto& l : lines) {
    if (l.instruction == "workdir" &&
        (l.args == "/testbed" || l.args == "/testbed/")) {
      has_workdir = true;
      break;
    }
  }
  if (!has_workdir) {
    violations.push_back({"workdir", "missing 'WORKDIR /testbed'"});
  }

  // (d) no test invocations at build time
  for (const auto& l : lines) {
    if (l.instruction != "run") continue;
    for (const char* token : {"pytest", "npm test", "mvn test", "unittest"}) {
      if (contains_token(l.args, token)) {
        // installing a test runner is fine; invoking it is not
        if (std::string(token) == "pytest" &&
            l.args.find("pip install") != std::string::npos &&
            l.args.find("pytest") > l.args.find("pip install")) {
          continue;
        }
        violations.push_back(
            {"test-in-build",
             std::string("RUN invokes a test command ('") + token +
                 "'); tests belong in the evaluation script"});
      }
    }
  }

  // (e) ENTRYPOINT
  for (const auto& l : lines) {
    if (l.instruction == "entrypoint") {
      violations.push_back({"entrypoint", "ENTRYPOINT is not allowed"});
      break;
    }
  }

  // (f) no second conda env
  for (const auto& l : lines) {
    if (l.instruction == "run" && contains_token(l.args, "conda create")) {
      violations.push_back(
          {"conda-env",
           "creating a new conda env is not allowed; change the base image "
           "version instead"});
      break;
    }
  }

  return violations;
}

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

std::vector<Violation> lint_eval_script(const std::string& text) {
  std::vector<Violation> violations;
  auto lines = split_lines(text);

  // placeholder exactly once, inside the heredoc
  std::size_t placeholder_count = count_occurrences(text, kTestPatchPlaceholder);
  bool has_heredoc = text.find(std::string("<<'") + kHeredocDelimiter + "'") !=
                         std::string::npos ||
                     text.find(std::string("<<") + kHeredocDelimiter) !=
                         std::string::npos;
  if (placeholder_count == 0) {
    violations.push_back({"placeholder",
                          std::string("missing the ") + kTestPatchPlaceholder +
                              " placeholder"});
  } else if (placeholder_count > 1) {
    violations.push_back({"placeholder",
                          "the test patch placeholder must occur exactly once"});
  }
  if (!has_heredoc) {
    violations.push_back(
        {"heredoc", std::string("missing heredoc with delimiter ") +
                        kHeredocDelimiter});
  } else if (placeholder_count == 1) {
    // placeholder must sit between the heredoc open and its closing delimiter
    std::size_t open = text.find(kHeredocDelimiter);
    std::size_t ph = text.find(kTestPatchPlaceholder);
    std::size_t close = text.find(kHeredocDelimiter, open + 1);
    if (!(open != std::string::npos && close != std::string::npos &&
          open < ph && ph < close)) {
      violations.push_back(
          {"heredoc", "the placeholder must be inside the heredoc body"});
    }
  }

  std::size_t start_pos = text.find(kStartMarker);
  std::size_t end_pos = text.find(kEndMarker);
  if (start_pos == std::string::npos) {
    violations.push_back({"start-marker",
                          std::string("missing the literal '") + kStartMarker +
                              "' line before the test command"});
  }
  if (end_pos == std::string::npos) {
    violations.push_back({"end-marker",
                          std::string("missing the literal '") + kEndMarker +
                              "' line after the test command"});
  }

  bool has_rc = false;
  for (const auto& line : lines) {
    if (trim(line).rfind("rc=$?", 0) == 0) {
      has_rc = true;
      break;
    }
  }
  if (!has_rc) {
    violations.push_back(
        {"rc-capture", "missing 'rc=$?' immediately after the test command"});
  }

  if (text.find("OPENSWE_EXIT_CODE=$rc") == std::string::npos) {
    violations.push_back(
        {"marker-echo", "missing 'echo \"OPENSWE_EXIT_CODE=$rc\"'"});
  }

  for (const auto& line : lines) {
    std::string t = trim(line);
    if (t == "set -e" || t.rfind("set -e ", 0) == 0 || t.rfind("set -e;", 0) == 0 ||
        t.rfind("set -eu", 0) == 0 || t.rfind("set -ex", 0) == 0) {
      violations.push_back(
          {"set-e", "'set -e' is forbidden: it truncates the exit code"});
      break;
    }
  }

  return violations;
}

std::string inject_test_patch(const EvalScriptDraft& draft,
                              const std::string& test_patch) {
  if (test_patch.find(kHeredocDelimiter) != std::string::npos) {
    throw DelimiterCollisionError(
        std::string("test patch contains the heredoc delimiter ") +
        kHeredocDelimiter);
  }
  std::size_t pos = draft.template_text.find(kTestPatchPlaceholder);
  if (pos == std::string::npos) {
    throw Error("eval script draft has no test patch placeholder");
  }
  std::string out = draft.template_text;
  std::string body = test_patch;
  // an empty patch leaves an empty heredoc body; the placeholder line vanishes
  if (body.empty()) {
    std::size_t line_start = out.rfind('\n', pos);
    line_start = (line_start == std::string::npos) ? 0 : line_start + 1;
    std::size_t line_end = out.find('\n', pos);
    line_end = (line_end == std::string::npos) ? out.size() : line_end + 1;
    out.erase(line_start, line_end - line_start);
    return out;
  }
  // keep the heredoc shape: patch text replaces the placeholder; a patch not
  // ending in a newline must not glue onto the closing delimiter line
  if (body.back() == '\n') body.pop_back();
  out.replace(pos, std::string(kTestPatchPlaceholder).size(), body);
  return out;
}

namespace {

std::string candidate_context(const ingest::TaskCandidate& candidate,
                              const explorer::RetrievalReport& report,
                              const std::optional<std::string>& guidance) {
  std::ostringstream out;
  out << "Repository: " << candidate.repo_id << "\n"
      << "Base commit: " << candidate.base_commit << "\n\n"
      << "Issue:\n" << candidate.issue_text << "\n\n"
      << explorer::report_to_text(report);
  if (!candidate.test_patch.empty()) {
    out << "\nTest patch (for reference; do NOT run tests at build time):\n"
        << candidate.test_patch << "\n";
  }
  if (guidance && !guidance->empty()) {
    out << "\nGuidance from the test analysis agent:\n" << *guidance << "\n";
  }
  return out.str();
}

std::string violations_text(const std::vector<Violation>& violations) {
  std::ostringstream out;
  out << "Your previous answer violates the required structure:\n";
  for (const auto& v : violations) {
    out << "- [" << v.code << "] " << v.message << "\n";
  }
  out << "Rewrite the full artifact fixing every violation.\n";
  return out.str();
}

}  // namespace

Outcome<DockerfileDraft> propose_dockerfile(
    const ingest::TaskCandidate& candidate,
    const explorer::RetrievalReport& report,
    const std::optional<std::string>& guidance, modelio::ModelClient& client,
    modelio::AuditLog& audit, int iteration) {
  std::string python_version = pick_python_version(report);
  std::vector<modelio::Message> messages;
  messages.push_back(
      {"system", modelio::render_prompt(modelio::kTemplateDockerfileInit,
                                        {{"python_version", python_version}})});
  messages.push_back({"user", candidate_context(candidate, report, guidance)});

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string response = modelio::complete(
        client, modelio::kTemplateDockerfileInit, messages, audit);
    messages.push_back({"assistant", response});

    auto block = modelio::extract_tagged_block(response, "dockerfile");
    if (!block.ok()) {
      last_error = block.error;
      messages.push_back(
          {"user", block.error + "\nWrap the Dockerfile in <dockerfile> tags."});
      continue;
    }
    auto violations = lint_dockerfile(*block);
    if (!violations.empty()) {
      last_error = violations_text(violations);
      messages.push_back({"user", last_error});
      continue;
    }
    DockerfileDraft draft;
    draft.text = *block;
    draft.python_version = python_version;
    draft.iteration = iteration;
    draft.hash = content_hash(draft.text);
    return Outcome<DockerfileDraft>::success(std::move(draft));
  }
  return Outcome<DockerfileDraft>::failure("dockerfile proposal failed: " +
                                           last_error);
}

Outcome<EvalScriptDraft> propose_eval_script(
    const ingest::TaskCandidate& candidate,
    const explorer::RetrievalReport& report,
    const std::optional<std::string>& guidance, modelio::ModelClient& client,
    modelio::AuditLog& audit, int iteration) {
  std::vector<modelio::Message> messages;
  messages.push_back(
      {"system", modelio::render_prompt(modelio::kTemplateEvalScriptInit, {})});
  messages.push_back({"user", candidate_context(candidate, report, guidance)});

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string response = modelio::complete(
        client, modelio::kTemplateEvalScriptInit, messages, audit);
    messages.push_back({"assistant", response});

    auto block = modelio::extract_tagged_block(response, "script");
    if (!block.ok()) {
      last_error = block.error;
      messages.push_back(
          {"user", block.error + "\nWrap the script in <script> tags."});
      continue;
    }
    auto violations = lint_eval_script(*block);
    if (!violations.empty()) {
      last_error = violations_text(violations);
      messages.push_back({"user", last_error});
      continue;
    }
    EvalScriptDraft draft;
    draft.template_text = *block;
    draft.iteration = iteration;
    return Outcome<EvalScriptDraft>::success(std::move(draft));
  }
  return Outcome<EvalScriptDraft>::failure("eval script proposal failed: " +
                                           last_error);
}

}  // namespace openswe::synthesis
