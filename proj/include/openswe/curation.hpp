#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "openswe/common.hpp"

namespace openswe::curation {

struct TrajectoryStep {
  std::string action;
  std::string observation;
  bool mask = false;  // training flag; content is retained
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  bool terminal_resolved = false;
};

struct SamplingConfig {
  double temperature = 1.0;
  int context_limit = 200'000;
  int step_limit = 300;
};

struct RolloutRecord {
  std::string task_id;
  std::string scaffold;  // e.g. "openhands", "swe-agent"
  int attempt_index = 1;  // 1..attempts_per_task
  bool resolved = false;
  Trajectory trajectory;
  SamplingConfig sampling;
};

struct CurationConfig {
  int attempts_per_task = 4;
  std::set<int> keep_pass_counts = {1, 2};
  std::vector<std::string> forbidden_action_substrings = {"git pull"};
  // observation markers that flag a step as an error for masking
  std::vector<std::string> error_observation_markers = {
      "ERROR: could not parse action",
      "Formatting error",
      "Command failed with exit code",
      "Traceback (most recent call last)",
  };
};

struct PassCount {
  int count = 0;
  int attempts_recorded = 0;
  bool incomplete = false;
};

// Resolved counts per (task, scaffold); duplicate attempt indices are a
// data-integrity error. Keyed by "task_id\x1fscaffold".
std::map<std::string, PassCount> aggregate_pass_counts(
    const std::vector<RolloutRecord>& rollouts, const CurationConfig& config);

// A task is kept when any scaffold's pass count lands in keep_pass_counts.
std::set<std::string> select_instances(
    const std::map<std::string, PassCount>& counts, const CurationConfig& config);

// Rejects trajectories containing a forbidden action substring; masks steps
// whose observation matches an error marker. Deterministic and idempotent.
std::optional<Trajectory> sanitize_trajectory(const Trajectory& traj,
                                              const CurationConfig& config);

struct ExportReport {
  std::size_t tasks_in = 0;
  std::size_t tasks_kept = 0;
  std::size_t trajectories_out = 0;
  std::vector<std::string> kept_without_trajectories;
};

// One line-delimited record per surviving resolved trajectory of a kept task.
ExportReport export_training_set(const std::set<std::string>& kept_task_ids,
                                 const std::vector<RolloutRecord>& rollouts,
                                 const CurationConfig& config,
                                 const fs::path& out_path);

// Rollout JSONL round-trip.
std::string rollout_to_json(const RolloutRecord& record);
RolloutRecord rollout_from_json(const std::string& line);
std::vector<RolloutRecord> load_rollouts(const fs::path& dir_or_file);

std::string count_key(const std::string& task_id, const std::string& scaffold);

}  // namespace openswe::curation
