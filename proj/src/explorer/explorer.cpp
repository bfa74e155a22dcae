#include "openswe/explorer.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "openswe/diff.hpp"

namespace openswe::explorer {

using nlohmann::json;

namespace {

// Resolves a repo-relative path and rejects anything (including symlink
// targets) that lands outside the root.
fs::path resolve_sandboxed(const fs::path& repo_root, const std::string& raw) {
  fs::path root = fs::weakly_canonical(repo_root);
  fs::path candidate = fs::path(raw).is_absolute() ? fs::path(raw) : root / raw;
  fs::path resolved = fs::weakly_canonical(candidate);

  auto root_it = root.begin();
  auto res_it = resolved.begin();
  for (; root_it != root.end(); ++root_it, ++res_it) {
    if (res_it == resolved.end() || *res_it != *root_it) {
      throw SandboxViolationError("path escapes repository root: " + raw);
    }
  }
  return resolved;
}

bool looks_binary(const std::string& head) {
  return head.find('\0') != std::string::npos;
}

}  // namespace

std::vector<DirEntry> browse(const ExplorationState& state, const std::string& path) {
  fs::path dir = resolve_sandboxed(state.repo_root, path);
  if (!fs::exists(dir)) {
    throw NotFoundError("no such path: " + path);
  }
  if (!fs::is_directory(dir)) {
    throw NotFoundError("not a directory: " + path);
  }
  std::vector<DirEntry> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    DirEntry entry;
    entry.name = e.path().filename().string();
    entry.is_directory = e.is_directory();
    entry.size = e.is_regular_file() ? e.file_size() : 0;
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(),
            [](const DirEntry& a, const DirEntry& b) { return a.name < b.name; });
  return entries;
}

std::vector<std::string> search(const ExplorationState& state,
                                const std::string& pattern,
                                std::size_t result_limit) {
  if (pattern.empty()) throw Error("search pattern must be non-empty");
  std::string needle = to_lower(pattern);
  std::vector<std::string> matches;
  fs::path root = fs::weakly_canonical(state.repo_root);
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && it->path().filename() == ".git") {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    std::string rel = fs::relative(it->path(), root).generic_string();
    if (to_lower(rel).find(needle) != std::string::npos) {
      matches.push_back(rel);
    }
  }
  std::sort(matches.begin(), matches.end());
  if (matches.size() > result_limit) matches.resize(result_limit);
  return matches;
}

std::string digest(ExplorationState& state, const std::string& path,
                   std::size_t cap_bytes) {
  fs::path file = resolve_sandboxed(state.repo_root, path);
  if (!fs::exists(file) || !fs::is_regular_file(file)) {
    throw NotFoundError("no such file: " + path);
  }
  std::string content = read_file(file);
  if (looks_binary(content.substr(0, 8192))) {
    throw UnsupportedContentError("binary file not supported: " + path);
  }
  if (content.size() > cap_bytes) {
    content.resize(cap_bytes);
    content += "\n[... truncated at " + std::to_string(cap_bytes) + " bytes]";
  }
  state.collected.emplace_back(path, content);
  return content;
}

std::string report_to_text(const RetrievalReport& report) {
  std::ostringstream out;
  out << "## Environment report\n";
  if (!report.language_version.empty()) {
    out << "Language version: " << report.language_version << "\n";
  }
  if (!report.dependency_pins.empty()) {
    out << "Dependency pins:\n";
    for (const auto& pin : report.dependency_pins) out << "  - " << pin << "\n";
  }
  if (!report.setup_commands.empty()) {
    out << "Setup commands:\n";
    for (const auto& cmd : report.setup_commands) out << "  $ " << cmd << "\n";
  }
  if (!report.test_commands.empty()) {
    out << "Test commands:\n";
    for (const auto& cmd : report.test_commands) out << "  $ " << cmd << "\n";
  }
  if (!report.env_framework_notes.empty()) {
    out << "Notes: " << report.env_framework_notes << "\n";
  }
  return out.str();
}

namespace {

struct ToolCall {
  std::string tool;
  json args;
};

Outcome<ToolCall> parse_tool_call(const std::string& response) {
  // last fenced or bare JSON object in the reply
  std::size_t pos = 0;
  std::optional<json> parsed;
  while ((pos = response.find('{', pos)) != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    std::size_t end = std::string::npos;
    for (std::size_t i = pos; i < response.size(); ++i) {
      char c = response[i];
      if (in_string) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        end = i + 1;
        break;
      }
    }
    if (end == std::string::npos) break;
    json j = json::parse(response.substr(pos, end - pos), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("tool")) {
      parsed = std::move(j);
      pos = end;
    } else {
      ++pos;
    }
  }
  if (!parsed) {
    return Outcome<ToolCall>::failure(
        "could not find a JSON tool call in the reply; expected a fenced "
        "object with a \"tool\" field");
  }
  ToolCall call;
  call.tool = parsed->value("tool", "");
  call.args = std::move(*parsed);
  return Outcome<ToolCall>::success(std::move(call));
}

RetrievalReport report_from_json(const json& j) {
  RetrievalReport report;
  report.dependency_pins =
      j.value("dependency_pins", std::vector<std::string>{});
  report.language_version = j.value("language_version", "");
  report.setup_commands = j.value("setup_commands", std::vector<std::string>{});
  report.test_commands = j.value("test_commands", std::vector<std::string>{});
  report.env_framework_notes = j.value("env_framework_notes", "");
  return report;
}

RetrievalReport best_effort_report(const ExplorationState& state) {
  RetrievalReport report;
  std::ostringstream notes;
  notes << "Exploration budget exhausted after " << state.rounds_used
        << " rounds; evidence collected from:";
  for (const auto& [path, _] : state.collected) notes << " " << path;
  report.env_framework_notes = notes.str();
  return report;
}

std::string changed_files_hint(const ingest::TaskCandidate& candidate) {
  // patch-derived file cues seed the first turn
  std::ostringstream out;
  try {
    for (const auto* patch : {&candidate.fix_patch, &candidate.test_patch}) {
      if (patch->empty()) continue;
      for (const auto& block : diff::parse_file_blocks(*patch)) {
        out << "  " << diff::routing_path(block) << "\n";
      }
    }
  } catch (const MalformedPatchError&) {
    // hints are optional; a bad patch surfaces later in validation
  }
  return out.str();
}

}  // namespace

RetrievalReport run_exploration(const ingest::TaskCandidate& candidate,
                                const fs::path& repo_root,
                                const std::optional<std::string>& focus_request,
                                modelio::ModelClient& client,
                                modelio::AuditLog& audit,
                                const ExplorerConfig& config) {
  ExplorationState state;
  state.repo_root = repo_root;
  state.max_rounds = config.max_rounds;
  state.focus_request = focus_request;

  std::vector<modelio::Message> messages;
  messages.push_back({"system", modelio::render_prompt(modelio::kTemplateExploration, {})});

  std::ostringstream task;
  task << "Repository: " << candidate.repo_id << "\n"
       << "Base commit: " << candidate.base_commit << "\n"
       << "Files changed by the PR:\n"
       << changed_files_hint(candidate);
  if (focus_request && !focus_request->empty()) {
    task << "\nSpecific retrieval request from the analysis agent:\n"
         << *focus_request << "\n"
         << "Limit your retrieval to this request.\n";
  } else {
    task << "\nNo specific request was given. Perform a shallow, "
            "document-first inspection (README.md, CONTRIBUTING.md, "
            "dependency manifests, CI workflows).\n";
  }
  messages.push_back({"user", task.str()});

  while (state.rounds_used < state.max_rounds) {
    ++state.rounds_used;
    std::string response =
        modelio::complete(client, modelio::kTemplateExploration, messages, audit);
    messages.push_back({"assistant", response});

    auto call = parse_tool_call(response);
    std::string observation;
    if (!call.ok()) {
      ++state.skipped_calls;
      observation = "Tool call error: " + call.error;
    } else if (call->tool == "report") {
      auto report = report_from_json(call->args);
      std::string text = report_to_text(report);
      if (text.size() > config.report_length_cap) {
        report.env_framework_notes.clear();
        report.env_framework_notes = "[notes trimmed: report exceeded length cap]";
      }
      return report;
    } else {
      // malformed arguments must not terminate the retrieval loop
      try {
        if (call->tool == "browse") {
          auto entries = browse(state, call->args.value("path", "."));
          std::ostringstream out;
          for (const auto& e : entries) {
            out << (e.is_directory ? "d " : "f ") << e.name;
            if (!e.is_directory) out << " (" << e.size << " bytes)";
            out << "\n";
          }
          observation = out.str().empty() ? "(empty directory)" : out.str();
        } else if (call->tool == "search") {
          auto matches = search(state, call->args.value("pattern", ""),
                                config.search_result_limit);
          std::ostringstream out;
          for (const auto& m : matches) out << m << "\n";
          observation = out.str().empty() ? "(no matches)" : out.str();
        } else if (call->tool == "digest") {
          observation = digest(state, call->args.value("path", ""),
                               config.digest_cap_bytes);
        } else {
          ++state.skipped_calls;
          observation = "Unknown tool: " + call->tool;
        }
      } catch (const std::exception& e) {
        ++state.skipped_calls;
        observation = std::string("Tool call failed: ") + e.what();
      }
    }
    messages.push_back({"user", observation});
  }
  return best_effort_report(state);
}

}  // namespace openswe::explorer
