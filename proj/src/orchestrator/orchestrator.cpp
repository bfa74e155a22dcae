#include "openswe/orchestrator.hpp"

#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "openswe/explorer.hpp"

namespace openswe::orchestrator {

using nlohmann::json;

const char* to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::Running: return "Running";
    case TaskStatus::Accepted: return "Accepted";
    case TaskStatus::Unsolvable: return "Unsolvable";
    case TaskStatus::Exhausted: return "Exhausted";
    case TaskStatus::Infra: return "Infra";
  }
  return "Running";
}

namespace {

TaskStatus status_from_string(const std::string& s) {
  if (s == "Accepted") return TaskStatus::Accepted;
  if (s == "Unsolvable") return TaskStatus::Unsolvable;
  if (s == "Exhausted") return TaskStatus::Exhausted;
  if (s == "Infra") return TaskStatus::Infra;
  return TaskStatus::Running;
}

}  // namespace

std::string record_to_json(const TaskRecord& record) {
  json j = {{"candidate", json::parse(ingest::to_json_line(record.candidate))},
            {"final_status", to_string(record.final_status)},
            {"dockerfile", record.dockerfile_text},
            {"eval_script", record.eval_script_text},
            {"image_ref", record.image_ref},
            {"iteration_count", record.iteration_count},
            {"audit_log", record.audit_log_path},
            {"dockerfile_hash", record.dockerfile_hash},
            {"hardcoded_marker_flagged", record.hardcoded_marker_flagged}};
  return j.dump();
}

TaskRecord record_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  TaskRecord record;
  record.candidate = ingest::candidate_from_json(j.at("candidate").dump());
  record.final_status = status_from_string(j.value("final_status", "Running"));
  record.dockerfile_text = j.value("dockerfile", "");
  record.eval_script_text = j.value("eval_script", "");
  record.image_ref = j.value("image_ref", "");
  record.iteration_count = j.value("iteration_count", 0);
  record.audit_log_path = j.value("audit_log", "");
  record.dockerfile_hash = j.value("dockerfile_hash", "");
  record.hardcoded_marker_flagged = j.value("hardcoded_marker_flagged", false);
  return record;
}

bool has_hardcoded_exit_marker(const std::string& script_text) {
  static const std::regex kHardcoded(R"(OPENSWE_EXIT_CODE=\s*[0-9])");
  for (const auto& line : split_lines(script_text)) {
    if (line.find("OPENSWE_EXIT_CODE=") == std::string::npos) continue;
    if (line.find("OPENSWE_EXIT_CODE=$") != std::string::npos) continue;
    if (std::regex_search(line, kHardcoded)) return true;
  }
  return false;
}

std::string task_id_for(const ingest::TaskCandidate& candidate) {
  std::string repo = candidate.repo_id;
  for (auto& c : repo) {
    if (c == '/') c = '-';
  }
  return repo + "-" + std::to_string(candidate.pr_number);
}

namespace {

std::string tail_of(const std::string& text, std::size_t max_bytes = 4096) {
  if (text.size() <= max_bytes) return text;
  return "[... truncated ...]\n" + text.substr(text.size() - max_bytes);
}

std::string verdict_summary(const IterationState& state) {
  const auto& verdict = *state.last_verdict;
  std::ostringstream out;
  out << "Rule-based validation result: " << harness::to_string(verdict.status)
      << "\n";
  if (verdict.status == harness::VerdictStatus::BuildFailed) {
    out << "\nDocker build log tail:\n" << verdict.build_log_tail << "\n";
    return out.str();
  }
  out << "\n--- testOnly run (marker must be non-0) ---\n";
  if (verdict.test_only_log.exit_marker) {
    out << "exit marker: " << *verdict.test_only_log.exit_marker << "\n";
  } else {
    out << "exit marker: ABSENT\n";
  }
  if (verdict.test_only_log.test_section) {
    out << "test output section:\n" << *verdict.test_only_log.test_section;
  }
  out << "log tail:\n" << tail_of(verdict.test_only_log.full_text) << "\n";
  if (verdict.with_fix_log) {
    out << "\n--- testWithFix run (marker must be 0) ---\n";
    if (verdict.with_fix_log->exit_marker) {
      out << "exit marker: " << *verdict.with_fix_log->exit_marker << "\n";
    } else {
      out << "exit marker: ABSENT\n";
    }
    if (verdict.with_fix_log->test_section) {
      out << "test output section:\n" << *verdict.with_fix_log->test_section;
    }
    out << "log tail:\n" << tail_of(verdict.with_fix_log->full_text) << "\n";
  }
  if (state.current_script) {
    out << "\n--- evaluation script under review ---\n"
        << state.current_script->template_text << "\n";
  }
  return out.str();
}

}  // namespace

modelio::AnalysisDecision analyze_results(IterationState& state,
                                          modelio::ModelClient& client,
                                          modelio::AuditLog& audit) {
  if (!state.last_verdict) {
    throw Error("analyze_results requires a verdict for the current iteration");
  }
  bool hardcoded = state.current_script &&
                   has_hardcoded_exit_marker(state.current_script->template_text);

  std::vector<modelio::Message> messages;
  messages.push_back(
      {"system", modelio::render_prompt(modelio::kTemplateAnalysis, {})});
  std::string summary = verdict_summary(state);
  if (hardcoded) {
    summary +=
        "\nStatic pre-check: the evaluation script echoes a LITERAL exit code "
        "instead of $rc. This bypasses real test execution and must be fixed "
        "by the eval script agent.\n";
  }
  messages.push_back({"user", summary});

  modelio::AnalysisDecision decision;
  bool got_decision = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string response =
        modelio::complete(client, modelio::kTemplateAnalysis, messages, audit);
    messages.push_back({"assistant", response});
    auto parsed = modelio::extract_analysis_decision(response);
    if (parsed.ok()) {
      decision = *parsed;
      got_decision = true;
      break;
    }
    messages.push_back(
        {"user", "Your answer could not be parsed: " + parsed.error +
                     "\nReply with the JSON object only."});
  }
  if (!got_decision) {
    // iteration consumed; empty guidance means the loop re-validates as-is
    decision = modelio::AnalysisDecision{};
  }

  if (hardcoded) {
    decision.is_finish = false;
    if (decision.guidance_for_write_eval_script_agent.empty()) {
      decision.guidance_for_write_eval_script_agent =
          "The script echoes a literal OPENSWE_EXIT_CODE value. Derive the "
          "marker from the real test exit code via rc=$? and echo "
          "\"OPENSWE_EXIT_CODE=$rc\".";
    }
  }
  state.last_decision = decision;
  return decision;
}

GuidanceActions route_guidance(const modelio::AnalysisDecision& decision) {
  GuidanceActions actions;
  if (!decision.guidance_for_context_retrieval_agent.empty()) {
    actions.explore = true;
    actions.explore_focus = decision.guidance_for_context_retrieval_agent;
  }
  if (!decision.guidance_for_write_dockerfile_agent.empty()) {
    actions.dockerfile = true;
    actions.dockerfile_guidance = decision.guidance_for_write_dockerfile_agent;
  }
  if (!decision.guidance_for_write_eval_script_agent.empty()) {
    actions.evalscript = true;
    actions.evalscript_guidance = decision.guidance_for_write_eval_script_agent;
  }
  // retrieval alone rewrites nothing and the error would replay
  if (actions.explore && !actions.dockerfile && !actions.evalscript) {
    actions.evalscript = true;
  }
  return actions;
}

TaskRecord run_task_loop(const ingest::TaskCandidate& candidate,
                         modelio::ModelClient& client,
                         harness::ContainerEngine& engine,
                         harness::ImageCache& cache, const LoopConfig& config) {
  std::string task_id = task_id_for(candidate);
  fs::path task_dir = config.work_root / task_id;
  fs::create_directories(task_dir);
  fs::path ctx = task_dir / "ctx";
  fs::create_directories(ctx);
  fs::path audit_path = task_dir / "audit.jsonl";
  modelio::AuditLog audit(audit_path);

  TaskRecord record;
  record.candidate = candidate;
  record.audit_log_path = audit_path.string();

  IterationState state;
  state.candidate = candidate;
  state.max_iterations = config.max_iterations;

  try {
    synthesis::provision_repo(candidate, config.repo_cache, ctx / "repo");
  } catch (const MissingCommitError& e) {
    record.final_status = TaskStatus::Unsolvable;
    return record;
  } catch (const Error& e) {
    record.final_status = TaskStatus::Infra;
    return record;
  }

  explorer::RetrievalReport report;
  GuidanceActions actions;
  actions.explore = true;
  actions.dockerfile = true;
  actions.evalscript = true;

  try {
    while (state.iteration < state.max_iterations) {
      ++state.iteration;

      if (actions.explore) {
        report = explorer::run_exploration(candidate, ctx / "repo",
                                           actions.explore_focus, client, audit,
                                           config.explorer);
      }
      if (actions.dockerfile || !state.current_dockerfile) {
        auto draft = synthesis::propose_dockerfile(
            candidate, report, actions.dockerfile_guidance, client, audit,
            state.iteration);
        if (draft.ok()) {
          state.current_dockerfile = *draft;
        } else if (!state.current_dockerfile) {
          // nothing buildable yet; consume the iteration and ask again
          actions = GuidanceActions{};
          actions.dockerfile = true;
          actions.dockerfile_guidance = draft.error;
          continue;
        }
      }
      if (actions.evalscript || !state.current_script) {
        auto draft = synthesis::propose_eval_script(
            candidate, report, actions.evalscript_guidance, client, audit,
            state.iteration);
        if (draft.ok()) {
          state.current_script = *draft;
        } else if (!state.current_script) {
          actions = GuidanceActions{};
          actions.evalscript = true;
          actions.evalscript_guidance = draft.error;
          continue;
        }
      }

      harness::ValidateOptions options;
      options.task_id = task_id;
      options.iteration = state.iteration;
      options.registry_endpoint = config.registry_endpoint;
      state.last_verdict = harness::validate_instance(
          engine, candidate, *state.current_dockerfile, *state.current_script,
          cache, config.limits, ctx, options);

      auto decision = analyze_results(state, client, audit);

      if (decision.unsolvable) {
        state.status = TaskStatus::Unsolvable;
        break;
      }
      if (decision.is_finish &&
          state.last_verdict->status == harness::VerdictStatus::Accepted) {
        state.status = TaskStatus::Accepted;
        break;
      }
      if (decision.is_finish) {
        // finish on a failing verdict is the unsolvable early exit
        state.status = TaskStatus::Unsolvable;
        break;
      }
      actions = route_guidance(decision);
    }
  } catch (const InfraError&) {
    record.final_status = TaskStatus::Infra;
    return record;
  }

  if (state.status == TaskStatus::Running) {
    state.status = TaskStatus::Exhausted;
  }

  record.final_status = state.status;
  record.iteration_count = state.iteration;
  if (state.current_dockerfile) {
    record.dockerfile_text = state.current_dockerfile->text;
    record.dockerfile_hash = state.current_dockerfile->hash;
  }
  if (state.current_script) {
    record.eval_script_text = state.current_script->template_text;
    record.hardcoded_marker_flagged =
        has_hardcoded_exit_marker(state.current_script->template_text);
  }
  if (state.last_verdict && state.last_verdict->image_ref) {
    record.image_ref = *state.last_verdict->image_ref;
  }

  // persist artifacts alongside the record
  if (!record.dockerfile_text.empty()) {
    atomic_write_file(task_dir / "Dockerfile", record.dockerfile_text);
  }
  if (!record.eval_script_text.empty()) {
    atomic_write_file(task_dir / "eval.sh", record.eval_script_text);
  }
  atomic_write_file(task_dir / "record.json", record_to_json(record));
  return record;
}

}  // namespace openswe::orchestrator
