#pragma once

#include <optional>
#include <string>
#include <vector>

#include "openswe/common.hpp"
#include "openswe/explorer.hpp"
#include "openswe/ingest.hpp"
#include "openswe/modelio.hpp"

namespace openswe::synthesis {

inline constexpr const char* kTestPatchPlaceholder = "[CONTENT OF TEST PATCH]";
inline constexpr const char* kHeredocDelimiter = "EOF_114329324912";
inline constexpr const char* kStartMarker = ">>>>> Start Test Output";
inline constexpr const char* kEndMarker = ">>>>> End Test Output";
inline constexpr const char* kBaseImageOverrideMarker = "# openswe: base-image-override";

// Python versions the openswe-python base image suite covers.
const std::vector<std::string>& allowed_python_versions();
bool is_allowed_python_version(const std::string& version);
std::string base_image_tag(const std::string& python_version);  // openswe-python-<v>

// Best-fit version: the report's pin when it maps into the allowed set,
// otherwise the highest allowed version.
std::string pick_python_version(const explorer::RetrievalReport& report);

struct DockerfileDraft {
  std::string text;
  std::string python_version;
  int iteration = 1;
  std::string hash;  // content_hash(text)
};

struct EvalScriptDraft {
  std::string template_text;  // placeholder not yet substituted
  int iteration = 1;
};

struct Violation {
  std::string code;
  std::string message;
};

// Static structural checks over the appendix contracts; empty = pass.
// Dockerfile codes: base-image, copy-repo, workdir, test-in-build,
// entrypoint, conda-env.
std::vector<Violation> lint_dockerfile(const std::string& text);
// Script codes: placeholder, heredoc, start-marker, end-marker, rc-capture,
// marker-echo, set-e.
std::vector<Violation> lint_eval_script(const std::string& text);

// Replaces the placeholder with the patch verbatim. A patch containing the
// heredoc delimiter is rejected rather than silently corrupted.
std::string inject_test_patch(const EvalScriptDraft& draft,
                              const std::string& test_patch);

// Local bare-clone cache plus per-task checkouts.
struct RepoCacheConfig {
  fs::path cache_root;
  // Where to clone from: a URL prefix ("https://github.com/") or a local
  // mirror root containing <owner>/<name> directories.
  std::string source_prefix = "https://github.com/";
};

// Ensures a bare clone exists and materializes a checkout of base_commit at
// dest ("<ctx>/repo"). Idempotent; a second call with the same inputs needs
// no network access.
void provision_repo(const ingest::TaskCandidate& candidate,
                    const RepoCacheConfig& config, const fs::path& dest);

// One automatic lint re-prompt before deferring to the analysis agent.
Outcome<DockerfileDraft> propose_dockerfile(
    const ingest::TaskCandidate& candidate,
    const explorer::RetrievalReport& report,
    const std::optional<std::string>& guidance, modelio::ModelClient& client,
    modelio::AuditLog& audit, int iteration = 1);

Outcome<EvalScriptDraft> propose_eval_script(
    const ingest::TaskCandidate& candidate,
    const explorer::RetrievalReport& report,
    const std::optional<std::string>& guidance, modelio::ModelClient& client,
    modelio::AuditLog& audit, int iteration = 1);

}  // namespace openswe::synthesis
