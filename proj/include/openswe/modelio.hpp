#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "openswe/common.hpp"

namespace openswe::modelio {

// Template ids for the four agent roles.
inline constexpr const char* kTemplateExploration = "exploration";
inline constexpr const char* kTemplateDockerfileInit = "dockerfile_init";
inline constexpr const char* kTemplateEvalScriptInit = "evalscript_init";
inline constexpr const char* kTemplateAnalysis = "analysis";

// Returns the template body for the given id; placeholders use {name} syntax.
const std::string& prompt_template(const std::string& template_id);

// Deterministic placeholder substitution. Throws UnboundPlaceholderError when
// the template references a name missing from the bindings.
std::string render_prompt(const std::string& template_id,
                          const std::map<std::string, std::string>& bindings);

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

class ModelClient {
public:
  virtual ~ModelClient() = default;
  // template_id identifies which agent role is calling; the scripted client
  // keys its reply queues on it.
  virtual std::string complete(const std::string& template_id,
                               const std::vector<Message>& messages) = 0;
};

struct ModelExchange {
  std::string template_id;
  std::vector<Message> messages;
  std::string response;
  std::size_t token_count = 0;
  std::chrono::milliseconds latency{0};
};

// Append-only JSONL log of every model exchange for one task.
class AuditLog {
public:
  AuditLog() = default;
  explicit AuditLog(fs::path file) : file_(std::move(file)) {}
  void record(const ModelExchange& exchange);
  const std::vector<ModelExchange>& exchanges() const { return exchanges_; }

private:
  fs::path file_;  // empty = in-memory only
  std::vector<ModelExchange> exchanges_;
};

// Calls the client and records exactly one ModelExchange. Transport errors
// propagate without corrupting the log.
std::string complete(ModelClient& client, const std::string& template_id,
                     const std::vector<Message>& messages, AuditLog& audit);

struct LiveClientConfig {
  std::string endpoint;       // e.g. http://host:port
  std::string api_key_env;    // env var holding the key
  std::string model;
  std::chrono::seconds timeout{120};
  int max_tokens = 8192;
  double temperature = 0.2;  // construction-side calls; config knob, no mandated value
};

std::unique_ptr<ModelClient> make_live_client(const LiveClientConfig& config);

// Scripted transcript: per-template FIFO queues of canned replies. Exhaustion
// throws FixtureExhaustedError.
std::unique_ptr<ModelClient> make_scripted_client(
    std::map<std::string, std::vector<std::string>> replies);
std::unique_ptr<ModelClient> make_scripted_client_from_file(const fs::path& file);

// Contents between the final <tag>...</tag> pair, with one leading/trailing
// newline trimmed. Absence is routed back as agent feedback, not thrown.
Outcome<std::string> extract_tagged_block(const std::string& text,
                                          const std::string& tag);

struct AnalysisDecision {
  bool is_finish = false;
  bool unsolvable = false;
  std::string guidance_for_write_dockerfile_agent;
  std::string guidance_for_write_eval_script_agent;
  std::string guidance_for_context_retrieval_agent;
};

// Parses the last well-formed JSON object in the text (fenced or bare);
// tolerates line comments and trailing commas. Absent guidance fields default
// to empty strings.
Outcome<AnalysisDecision> extract_analysis_decision(const std::string& text);

}  // namespace openswe::modelio
