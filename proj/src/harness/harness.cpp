#include "openswe/harness.hpp"

#include <algorithm>
#include <cctype>

namespace openswe::harness {

const char* to_string(VerdictStatus status) {
  switch (status) {
    case VerdictStatus::Accepted: return "Accepted";
    case VerdictStatus::RejectedNoFail: return "RejectedNoFail";
    case VerdictStatus::RejectedFixFails: return "RejectedFixFails";
    case VerdictStatus::RejectedMissingMarker: return "RejectedMissingMarker";
    case VerdictStatus::BuildFailed: return "BuildFailed";
    case VerdictStatus::Timeout: return "Timeout";
  }
  return "BuildFailed";
}

std::optional<ImageCacheEntry> ImageCache::lookup(const std::string& task_id,
                                                  const std::string& hash) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto task_it = by_task_.find(task_id);
  if (task_it == by_task_.end()) return std::nullopt;
  auto it = task_it->second.find(hash);
  if (it == task_it->second.end()) return std::nullopt;
  return it->second;
}

void ImageCache::insert(const std::string& task_id, ImageCacheEntry entry) {
  std::lock_guard<std::mutex> lock(mutex_);
  by_task_[task_id][entry.dockerfile_hash] = std::move(entry);
}

void ImageCache::mark_used(const std::string& task_id, const std::string& hash) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto task_it = by_task_.find(task_id);
  if (task_it == by_task_.end()) return;
  auto it = task_it->second.find(hash);
  if (it != task_it->second.end()) {
    it->second.last_used = std::chrono::system_clock::now();
  }
}

void ImageCache::mark_accepted(const std::string& image_tag) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto& [task, entries] : by_task_) {
    for (auto& [hash, entry] : entries) {
      if (entry.image_tag == image_tag) entry.accepted = true;
    }
  }
}

void ImageCache::erase_tag(const std::string& image_tag) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto& [task, entries] : by_task_) {
    for (auto it = entries.begin(); it != entries.end();) {
      if (it->second.image_tag == image_tag) {
        it = entries.erase(it);
      } else {
        ++it;
      }
    }
  }
}

std::vector<ImageCacheEntry> ImageCache::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<ImageCacheEntry> out;
  for (const auto& [task, entries] : by_task_) {
    for (const auto& [hash, entry] : entries) out.push_back(entry);
  }
  return out;
}

std::set<std::string> ImageCache::tags_in_use() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::set<std::string> tags;
  for (const auto& [task, entries] : by_task_) {
    for (const auto& [hash, entry] : entries) tags.insert(entry.image_tag);
  }
  return tags;
}

std::optional<int> parse_exit_marker(const std::string& log_text) {
  const std::string prefix = "OPENSWE_EXIT_CODE=";
  std::optional<int> last;
  for (const auto& raw : split_lines(log_text)) {
    // trim trailing whitespace only; the marker is anchored at line start
    std::string line = raw;
    while (!line.empty() &&
           std::isspace(static_cast<unsigned char>(line.back()))) {
      line.pop_back();
    }
    if (line.rfind(prefix, 0) != 0) continue;
    std::string digits = line.substr(prefix.size());
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      continue;
    }
    try {
      last = std::stoi(digits);
    } catch (const std::out_of_range&) {
      // absurdly long digit runs are not a marker
    }
  }
  return last;
}

std::optional<std::string> extract_test_section(const std::string& log_text) {
  auto lines = split_lines(log_text);
  std::optional<std::size_t> start;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = trim(lines[i]);
    if (!start && line == synthesis::kStartMarker) {
      start = i;
      continue;
    }
    if (start && line == synthesis::kEndMarker) {
      std::string section;
      for (std::size_t j = *start + 1; j < i; ++j) {
        section += lines[j];
        section += "\n";
      }
      return section;
    }
  }
  return std::nullopt;
}

std::string build_image(ContainerEngine& engine, const fs::path& ctx,
                        const synthesis::DockerfileDraft& draft,
                        ImageCache& cache, const std::string& task_id,
                        int iteration) {
  if (auto entry = cache.lookup(task_id, draft.hash)) {
    if (engine.image_exists(entry->image_tag)) {
      cache.mark_used(task_id, draft.hash);
      return entry->image_tag;
    }
  }

  write_file(ctx / "Dockerfile", draft.text);
  std::string tag = "openswe/task-" + task_id + ":iter" + std::to_string(iteration);
  auto result = engine.build(ctx, tag);
  if (!result.ok) {
    std::string tail = result.log;
    const std::size_t kTailBytes = 4096;
    if (tail.size() > kTailBytes) tail = tail.substr(tail.size() - kTailBytes);
    throw BuildFailedError("image build failed for task " + task_id, tail);
  }

  ImageCacheEntry entry;
  entry.dockerfile_hash = draft.hash;
  entry.image_tag = tag;
  entry.built_at = std::chrono::system_clock::now();
  entry.last_used = entry.built_at;
  cache.insert(task_id, std::move(entry));
  return tag;
}

ExecutionLog run_eval(ContainerEngine& engine, const std::string& image_tag,
                      const std::string& script, const RunLimits& limits) {
  auto result = engine.run(image_tag, script, limits);
  ExecutionLog log;
  log.full_text = result.output;
  log.container_exit = result.exit_code;
  log.timed_out = result.timed_out;
  log.duration = result.duration;
  log.test_section = extract_test_section(result.output);
  log.exit_marker = parse_exit_marker(result.output);
  return log;
}

namespace {

// The fix patch goes in through a harness-owned heredoc inserted right after
// the test patch application, so it applies before the tests run.
const char* kFixDelimiter = "EOF_OPENSWE_FIX_PATCH";

std::string with_fix_applied(const std::string& script,
                             const std::string& fix_patch) {
  if (fix_patch.empty()) return script;  // nothing to apply
  if (fix_patch.find(kFixDelimiter) != std::string::npos) {
    throw DelimiterCollisionError(
        "fix patch contains the harness heredoc delimiter");
  }
  // plain 'git apply' (no --allow-empty) keeps this working on older git
  std::string block = "\n# fix patch applied by the validation harness\n";
  block += std::string("git apply -v - <<'") + kFixDelimiter + "'\n";
  block += fix_patch;
  if (fix_patch.back() != '\n') block += "\n";
  block += kFixDelimiter;
  block += "\n";

  // after the closing line of the test patch heredoc when present, else
  // before the Start marker
  std::size_t anchor = script.find(synthesis::kHeredocDelimiter);
  if (anchor != std::string::npos) {
    std::size_t close = script.find(synthesis::kHeredocDelimiter, anchor + 1);
    if (close != std::string::npos) {
      std::size_t line_end = script.find('\n', close);
      std::size_t insert_at =
          (line_end == std::string::npos) ? script.size() : line_end + 1;
      std::string out = script;
      out.insert(insert_at, block);
      return out;
    }
  }
  std::size_t marker = script.find(synthesis::kStartMarker);
  std::string out = script;
  out.insert(marker == std::string::npos ? out.size() : marker, block);
  return out;
}

bool push_to_registry(ContainerEngine&, const std::string&, const std::string&) {
  // Push is delegated to the engine CLI by the fleet layer and retried there;
  // a failure never revokes acceptance.
  return true;
}

}  // namespace

ValidationVerdict validate_instance(ContainerEngine& engine,
                                    const ingest::TaskCandidate& candidate,
                                    const synthesis::DockerfileDraft& draft,
                                    const synthesis::EvalScriptDraft& script,
                                    ImageCache& cache, const RunLimits& limits,
                                    const fs::path& ctx,
                                    const ValidateOptions& options) {
  ValidationVerdict verdict;
  std::string tag;
  try {
    tag = build_image(engine, ctx, draft, cache, options.task_id, options.iteration);
  } catch (const BuildFailedError& e) {
    verdict.status = VerdictStatus::BuildFailed;
    verdict.build_log_tail = e.log_tail;
    return verdict;
  }
  verdict.image_ref = tag;

  std::string test_only_script =
      synthesis::inject_test_patch(script, candidate.test_patch);
  std::string with_fix_script =
      with_fix_applied(test_only_script, candidate.fix_patch);

  int repeats = options.double_run ? 2 : 1;
  for (int round = 0; round < repeats; ++round) {
    verdict.test_only_log = run_eval(engine, tag, test_only_script, limits);
    if (verdict.test_only_log.timed_out) {
      verdict.status = VerdictStatus::Timeout;
      return verdict;
    }
    if (!verdict.test_only_log.exit_marker) {
      verdict.status = VerdictStatus::RejectedMissingMarker;
      return verdict;
    }
    if (*verdict.test_only_log.exit_marker == 0) {
      verdict.status = VerdictStatus::RejectedNoFail;
      return verdict;  // run 2 skipped: tests must fail without the fix
    }

    verdict.with_fix_log = run_eval(engine, tag, with_fix_script, limits);
    if (verdict.with_fix_log->timed_out) {
      verdict.status = VerdictStatus::Timeout;
      return verdict;
    }
    if (!verdict.with_fix_log->exit_marker) {
      verdict.status = VerdictStatus::RejectedMissingMarker;
      return verdict;
    }
    if (*verdict.with_fix_log->exit_marker != 0) {
      verdict.status = VerdictStatus::RejectedFixFails;
      return verdict;
    }
  }

  verdict.status = VerdictStatus::Accepted;
  cache.mark_accepted(tag);
  if (!options.registry_endpoint.empty()) {
    push_to_registry(engine, tag, options.registry_endpoint);
  }
  return verdict;
}

ReclaimReport prune_resources(ContainerEngine& engine, ImageCache& cache,
                              const PrunePolicy& policy,
                              const std::set<std::string>& in_flight_tags) {
  ReclaimReport report;
  try {
    report.containers_removed = engine.remove_exited_containers();
  } catch (const std::exception&) {
    // best effort
  }

  auto now = std::chrono::system_clock::now();
  std::map<std::string, ImageCacheEntry> by_tag;
  for (const auto& entry : cache.entries()) {
    by_tag[entry.image_tag] = entry;
  }

  std::vector<ImageInfo> images;
  try {
    images = engine.list_images();
  } catch (const std::exception&) {
    return report;
  }
  for (const auto& image : images) {
    if (in_flight_tags.count(image.tag)) {
      ++report.images_kept;
      continue;
    }
    auto it = by_tag.find(image.tag);
    if (it != by_tag.end()) {
      const auto& entry = it->second;
      if (policy.keep_accepted && entry.accepted) {
        ++report.images_kept;
        continue;
      }
      auto idle = std::chrono::duration_cast<std::chrono::seconds>(
          now - entry.last_used);
      if (idle < policy.min_idle_age) {
        ++report.images_kept;
        continue;
      }
    }
    try {
      engine.remove_image(image.tag);
      cache.erase_tag(image.tag);
      ++report.images_removed;
      report.bytes_reclaimed += image.size_bytes;
    } catch (const std::exception&) {
      ++report.images_kept;
    }
  }
  return report;
}

}  // namespace openswe::harness
