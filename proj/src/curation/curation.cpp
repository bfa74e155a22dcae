#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "openswe/curation.hpp"

namespace openswe::curation {

using nlohmann::json;

std::string count_key(const std::string& task_id, const std::string& scaffold) {
  return task_id + '\x1f' + scaffold;
}

std::map<std::string, PassCount> aggregate_pass_counts(
    const std::vector<RolloutRecord>& rollouts, const CurationConfig& config) {
  std::map<std::string, PassCount> counts;
  std::map<std::string, std::set<int>> seen_attempts;
  for (const auto& rollout : rollouts) {
    auto key = count_key(rollout.task_id, rollout.scaffold);
    if (!seen_attempts[key].insert(rollout.attempt_index).second) {
      throw DataIntegrityError("duplicate attempt " +
                               std::to_string(rollout.attempt_index) + " for " +
                               rollout.task_id + " (" + rollout.scaffold + ")");
    }
    auto& entry = counts[key];
    ++entry.attempts_recorded;
    if (rollout.resolved) ++entry.count;
  }
  for (auto& [key, entry] : counts) {
    entry.incomplete = entry.attempts_recorded < config.attempts_per_task;
  }
  return counts;
}

std::set<std::string> select_instances(
    const std::map<std::string, PassCount>& counts, const CurationConfig& config) {
  std::set<std::string> kept;
  for (const auto& [key, entry] : counts) {
    // key is task_id \x1f scaffold; keep the task when any scaffold qualifies
    auto sep = key.find('\x1f');
    std::string task_id = key.substr(0, sep);
    if (config.keep_pass_counts.count(entry.count)) kept.insert(task_id);
  }
  return kept;
}

std::optional<Trajectory> sanitize_trajectory(const Trajectory& traj,
                                              const CurationConfig& config) {
  for (const auto& step : traj.steps) {
    for (const auto& forbidden : config.forbidden_action_substrings) {
      if (step.action.find(forbidden) != std::string::npos) {
        return std::nullopt;
      }
    }
  }
  Trajectory out = traj;
  for (auto& step : out.steps) {
    for (const auto& marker : config.error_observation_markers) {
      if (step.observation.find(marker) != std::string::npos) {
        step.mask = true;
        break;
      }
    }
  }
  return out;
}

namespace {

json trajectory_to_json(const Trajectory& traj) {
  json steps = json::array();
  for (const auto& step : traj.steps) {
    steps.push_back({{"action", step.action},
                     {"observation", step.observation},
                     {"mask", step.mask}});
  }
  return {{"steps", std::move(steps)},
          {"terminal_resolved", traj.terminal_resolved}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory traj;
  traj.terminal_resolved = j.value("terminal_resolved", false);
  for (const auto& s : j.value("steps", json::array())) {
    TrajectoryStep step;
    step.action = s.value("action", "");
    step.observation = s.value("observation", "");
    step.mask = s.value("mask", false);
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

}  // namespace

ExportReport export_training_set(const std::set<std::string>& kept_task_ids,
                                 const std::vector<RolloutRecord>& rollouts,
                                 const CurationConfig& config,
                                 const fs::path& out_path) {
  ExportReport report;
  std::set<std::string> tasks_seen;
  for (const auto& rollout : rollouts) tasks_seen.insert(rollout.task_id);
  report.tasks_in = tasks_seen.size();
  report.tasks_kept = kept_task_ids.size();

  std::string body;
  std::set<std::string> exported_tasks;
  for (const auto& rollout : rollouts) {
    if (!rollout.resolved || !kept_task_ids.count(rollout.task_id)) continue;
    auto sanitized = sanitize_trajectory(rollout.trajectory, config);
    if (!sanitized) continue;
    json record = {{"task_id", rollout.task_id},
                   {"scaffold", rollout.scaffold},
                   {"attempt_index", rollout.attempt_index},
                   {"trajectory", trajectory_to_json(*sanitized)}};
    body += record.dump();
    body += '\n';
    ++report.trajectories_out;
    exported_tasks.insert(rollout.task_id);
  }
  for (const auto& task_id : kept_task_ids) {
    if (!exported_tasks.count(task_id)) {
      report.kept_without_trajectories.push_back(task_id);
    }
  }
  atomic_write_file(out_path, body);
  return report;
}

std::string rollout_to_json(const RolloutRecord& record) {
  json j = {{"task_id", record.task_id},
            {"scaffold", record.scaffold},
            {"attempt_index", record.attempt_index},
            {"resolved", record.resolved},
            {"trajectory", trajectory_to_json(record.trajectory)},
            {"sampling",
             {{"temperature", record.sampling.temperature},
              {"context_limit", record.sampling.context_limit},
              {"step_limit", record.sampling.step_limit}}}};
  return j.dump();
}

RolloutRecord rollout_from_json(const std::string& line) {
  json j = json::parse(line);
  RolloutRecord record;
  record.task_id = j.at("task_id").get<std::string>();
  record.scaffold = j.value("scaffold", "");
  record.attempt_index = j.value("attempt_index", 1);
  record.resolved = j.value("resolved", false);
  if (j.contains("trajectory")) {
    record.trajectory = trajectory_from_json(j["trajectory"]);
  }
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    record.sampling.temperature = s.value("temperature", 1.0);
    record.sampling.context_limit = s.value("context_limit", 200'000);
    record.sampling.step_limit = s.value("step_limit", 300);
  }
  return record;
}

std::vector<RolloutRecord> load_rollouts(const fs::path& dir_or_file) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir_or_file)) {
    for (const auto& entry : fs::directory_iterator(dir_or_file)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(dir_or_file);
  }
  std::vector<RolloutRecord> records;
  for (const auto& file : files) {
    for (const auto& line : split_lines(read_file(file))) {
      if (trim(line).empty()) continue;
      records.push_back(rollout_from_json(line));
    }
  }
  return records;
}

}  // namespace openswe::curation
