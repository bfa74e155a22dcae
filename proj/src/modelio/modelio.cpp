#include "openswe/modelio.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace openswe::modelio {

using nlohmann::json;

std::string render_prompt(const std::string& template_id,
                          const std::map<std::string, std::string>& bindings) {
  const std::string& body = prompt_template(template_id);
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{' && i + 1 < body.size() &&
        (std::isalpha(static_cast<unsigned char>(body[i + 1])) || body[i + 1] == '_')) {
      std::size_t j = i + 1;
      while (j < body.size() &&
             (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '_')) {
        ++j;
      }
      if (j < body.size() && body[j] == '}') {
        std::string name = body.substr(i + 1, j - i - 1);
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw UnboundPlaceholderError(name);
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

void AuditLog::record(const ModelExchange& exchange) {
  exchanges_.push_back(exchange);
  if (file_.empty()) return;
  json msgs = json::array();
  for (const auto& m : exchange.messages) {
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  }
  json j = {{"template_id", exchange.template_id},
            {"messages", msgs},
            {"response", exchange.response},
            {"token_count", exchange.token_count},
            {"latency_ms", exchange.latency.count()}};
  std::ofstream out(file_, std::ios::app);
  out << j.dump() << "\n";
}

std::string complete(ModelClient& client, const std::string& template_id,
                     const std::vector<Message>& messages, AuditLog& audit) {
  if (messages.empty()) throw Error("complete() requires a non-empty message list");
  auto start = std::chrono::steady_clock::now();
  std::string response = client.complete(template_id, messages);
  auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);

  ModelExchange exchange;
  exchange.template_id = template_id;
  exchange.messages = messages;
  exchange.response = response;
  exchange.token_count = response.size() / 4;  // rough char-based estimate
  exchange.latency = latency;
  audit.record(exchange);
  return response;
}

namespace {

class LiveClient : public ModelClient {
public:
  explicit LiveClient(LiveClientConfig config) : config_(std::move(config)) {}

  std::string complete(const std::string&,
                       const std::vector<Message>& messages) override {
    json msgs = json::array();
    for (const auto& m : messages) {
      msgs.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body = {{"model", config_.model},
                 {"messages", msgs},
                 {"max_tokens", config_.max_tokens},
                 {"temperature", config_.temperature}};

    httplib::Client client(config_.endpoint);
    client.set_read_timeout(config_.timeout.count(), 0);
    client.set_connection_timeout(10, 0);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      throw TransportError("model endpoint unreachable: " + config_.endpoint);
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("model endpoint HTTP " + std::to_string(res->status));
    }
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  }

private:
  LiveClientConfig config_;
};

class ScriptedClient : public ModelClient {
public:
  explicit ScriptedClient(std::map<std::string, std::vector<std::string>> replies)
      : replies_(std::move(replies)) {}

  std::string complete(const std::string& template_id,
                       const std::vector<Message>&) override {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = replies_.find(template_id);
    if (it == replies_.end() || next_[template_id] >= it->second.size()) {
      throw FixtureExhaustedError("no scripted reply left for template: " +
                                  template_id);
    }
    return it->second[next_[template_id]++];
  }

private:
  std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> replies_;
  std::map<std::string, std::size_t> next_;
};

}  // namespace

std::unique_ptr<ModelClient> make_live_client(const LiveClientConfig& config) {
  return std::make_unique<LiveClient>(config);
}

std::unique_ptr<ModelClient> make_scripted_client(
    std::map<std::string, std::vector<std::string>> replies) {
  return std::make_unique<ScriptedClient>(std::move(replies));
}

std::unique_ptr<ModelClient> make_scripted_client_from_file(const fs::path& file) {
  json j = json::parse(read_file(file));
  std::map<std::string, std::vector<std::string>> replies;
  for (auto it = j.begin(); it != j.end(); ++it) {
    replies[it.key()] = it.value().get<std::vector<std::string>>();
  }
  return make_scripted_client(std::move(replies));
}

Outcome<std::string> extract_tagged_block(const std::string& text,
                                          const std::string& tag) {
  std::string open = "<" + tag + ">";
  std::string close = "</" + tag + ">";
  std::size_t best_start = std::string::npos;
  std::size_t best_end = std::string::npos;
  std::size_t pos = 0;
  while (true) {
    std::size_t s = text.find(open, pos);
    if (s == std::string::npos) break;
    std::size_t e = text.find(close, s + open.size());
    if (e == std::string::npos) break;
    best_start = s + open.size();
    best_end = e;
    pos = e + close.size();
  }
  if (best_start == std::string::npos) {
    return Outcome<std::string>::failure("no <" + tag + ">...</" + tag +
                                         "> block found in the response");
  }
  std::string inner = text.substr(best_start, best_end - best_start);
  if (!inner.empty() && inner.front() == '\n') inner.erase(0, 1);
  if (!inner.empty() && inner.back() == '\n') inner.pop_back();
  return Outcome<std::string>::success(std::move(inner));
}

namespace {

// Strips #/"//" line comments outside string literals and trailing commas, so
// the tolerant model-output JSON still parses.
std::string sanitize_json(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool in_string = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < raw.size()) {
        out += raw[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < raw.size() && raw[i + 1] == '/')) {
      while (i < raw.size() && raw[i] != '\n') ++i;
      if (i < raw.size()) out += '\n';
      continue;
    }
    out += c;
  }
  // trailing commas before } or ]
  static const std::regex kTrailingComma(R"(,(\s*[}\]]))");
  return std::regex_replace(out, kTrailingComma, "$1");
}

std::optional<json> try_parse_object(const std::string& candidate) {
  json j = json::parse(sanitize_json(candidate), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

// Balanced-brace candidate starting at `start`; returns one past the match.
std::optional<std::size_t> find_object_end(const std::string& text,
                                           std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

Outcome<AnalysisDecision> extract_analysis_decision(const std::string& text) {
  std::optional<json> parsed;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    auto end = find_object_end(text, pos);
    if (!end) break;
    if (auto j = try_parse_object(text.substr(pos, *end - pos))) {
      parsed = std::move(j);  // keep the last parseable object
      pos = *end;
    } else {
      ++pos;
    }
  }
  if (!parsed) {
    return Outcome<AnalysisDecision>::failure(
        "no parseable JSON object found in analysis response:\n" + text);
  }
  AnalysisDecision d;
  d.is_finish = parsed->value("is_finish", false);
  d.unsolvable = parsed->value("unsolvable", false);
  d.guidance_for_write_dockerfile_agent =
      parsed->value("guidance_for_write_dockerfile_agent", "");
  d.guidance_for_write_eval_script_agent =
      parsed->value("guidance_for_write_eval_script_agent", "");
  d.guidance_for_context_retrieval_agent =
      parsed->value("guidance_for_context_retrieval_agent", "");
  return Outcome<AnalysisDecision>::success(std::move(d));
}

}  // namespace openswe::modelio
