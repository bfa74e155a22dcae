#pragma once

#include <optional>
#include <string>

#include "openswe/harness.hpp"
#include "openswe/modelio.hpp"
#include "openswe/synthesis.hpp"

namespace openswe::orchestrator {

enum class TaskStatus { Running, Accepted, Unsolvable, Exhausted, Infra };
const char* to_string(TaskStatus status);

struct IterationState {
  ingest::TaskCandidate candidate;
  int iteration = 0;
  int max_iterations = 6;
  std::optional<synthesis::DockerfileDraft> current_dockerfile;
  std::optional<synthesis::EvalScriptDraft> current_script;
  std::optional<harness::ValidationVerdict> last_verdict;
  std::optional<modelio::AnalysisDecision> last_decision;
  TaskStatus status = TaskStatus::Running;
};

struct TaskRecord {
  ingest::TaskCandidate candidate;
  TaskStatus final_status = TaskStatus::Running;
  std::string dockerfile_text;
  std::string eval_script_text;
  std::string image_ref;
  int iteration_count = 0;
  std::string audit_log_path;
  std::string dockerfile_hash;
  bool hardcoded_marker_flagged = false;
};

std::string record_to_json(const TaskRecord& record);
TaskRecord record_from_json(const std::string& json_text);

// True when the script template echoes a literal OPENSWE_EXIT_CODE=<digit>
// instead of deriving it from $rc. Mechanized half of the legitimacy check;
// either it or the analysis agent can block acceptance.
bool has_hardcoded_exit_marker(const std::string& script_text);

// Renders the analysis prompt with the verdict and log tails, extracts a
// decision (one re-prompt on parse failure, then non-finish with empty
// guidance). A hardcoded marker forces the decision to non-finish.
modelio::AnalysisDecision analyze_results(IterationState& state,
                                          modelio::ModelClient& client,
                                          modelio::AuditLog& audit);

struct GuidanceActions {
  bool explore = false;
  bool dockerfile = false;
  bool evalscript = false;
  std::optional<std::string> explore_focus;
  std::optional<std::string> dockerfile_guidance;
  std::optional<std::string> evalscript_guidance;
};

// Retrieval guidance with both writer guidances empty additionally schedules
// the script agent so the next iteration can change something.
GuidanceActions route_guidance(const modelio::AnalysisDecision& decision);

struct LoopConfig {
  int max_iterations = 6;
  fs::path work_root;          // per-task build contexts and audit logs
  synthesis::RepoCacheConfig repo_cache;
  harness::RunLimits limits;
  std::string registry_endpoint;
  explorer::ExplorerConfig explorer;
};

// Full per-task loop: explore -> propose -> validate -> analyze, routing
// feedback until a terminal status. Infra errors surface as status Infra
// without consuming the sample.
TaskRecord run_task_loop(const ingest::TaskCandidate& candidate,
                         modelio::ModelClient& client,
                         harness::ContainerEngine& engine,
                         harness::ImageCache& cache, const LoopConfig& config);

std::string task_id_for(const ingest::TaskCandidate& candidate);

}  // namespace openswe::orchestrator
