#pragma once

// Chat-completion gateway: one interface over remote OpenAI-style endpoints
// and a deterministic scripted backend driven by fixture files.
//
// Scripted fixture format (line oriented, '#' comments between records):
//
//   rule substring <text matched against the concatenated prompt>
//   rule hash <16 hex digits of the prompt's fnv1a64>
//   response <<END
//   ...verbatim response lines...
//   END
//
// A rule may carry several `response` blocks; a request for n samples cycles
// through them. Matching is first-rule-wins in file order. Substring matchers
// understand \n, \t and \\ escapes so a matcher can pin text spanning a line
// break (say, a prompt label plus the first line of an inserted trace).

#include <chrono>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dap/errors.hpp"
#include "dap/util.hpp"

namespace dap {

enum class ChatRole { system, user, assistant };

inline const char* to_string(ChatRole r) {
  switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 30000;
  int n_samples = 1;

  static ChatRequest single(std::string prompt, double temperature,
                            int max_tokens, int n_samples = 1) {
    ChatRequest r;
    r.messages.push_back({ChatRole::user, std::move(prompt)});
    r.temperature = temperature;
    r.max_tokens = max_tokens;
    r.n_samples = n_samples;
    return r;
  }
};

enum class BackendKind { remote, scripted };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string endpoint;     // full chat-completions URL (remote)
  std::string model_id;     // remote model name
  std::string auth_env_var; // bearer token env var; empty = no auth header
  std::string script_path;  // scripted rule file
  std::chrono::milliseconds request_timeout{120000};
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{1000};  // doubles per retry
};

struct ScriptedRule {
  enum class Matcher { prompt_hash, substring };
  Matcher matcher_kind = Matcher::substring;
  std::string matcher;
  std::vector<std::string> responses;
};

// Text a scripted matcher sees: message contents joined with newlines.
inline std::string prompt_match_text(const ChatRequest& request) {
  std::vector<std::string> parts;
  parts.reserve(request.messages.size());
  for (const auto& m : request.messages) parts.push_back(m.content);
  return join(parts, "\n");
}

inline std::string unescape_matcher(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      char next = raw[i + 1];
      if (next == 'n') { out.push_back('\n'); ++i; continue; }
      if (next == 't') { out.push_back('\t'); ++i; continue; }
      if (next == '\\') { out.push_back('\\'); ++i; continue; }
    }
    out.push_back(raw[i]);
  }
  return out;
}

inline std::vector<ScriptedRule> load_scripted_rules(
    const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  std::vector<ScriptedRule> rules;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  auto fail = [&](const std::string& msg) -> Error {
    return Error(Errc::parse_error,
                 path.filename().string() + " line " +
                     std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim_view(line);
    if (sv.empty() || sv.front() == '#') continue;
    if (sv.substr(0, 5) == "rule ") {
      std::string_view rest = ltrim_view(sv.substr(5));
      ScriptedRule rule;
      if (rest.substr(0, 10) == "substring ") {
        rule.matcher_kind = ScriptedRule::Matcher::substring;
        rule.matcher = unescape_matcher(rest.substr(10));
      } else if (rest.substr(0, 5) == "hash ") {
        rule.matcher_kind = ScriptedRule::Matcher::prompt_hash;
        rule.matcher = trim(rest.substr(5));
        if (rule.matcher.size() != 16)
          throw fail("hash matcher must be 16 hex digits");
      } else {
        throw fail("expected 'rule substring <text>' or 'rule hash <hex>'");
      }
      if (rule.matcher.empty()) throw fail("empty matcher");
      rules.push_back(std::move(rule));
      continue;
    }
    if (sv.substr(0, 8) == "response") {
      if (rules.empty()) throw fail("response before any rule");
      std::string_view rest = ltrim_view(sv.substr(8));
      if (rest.substr(0, 2) != "<<" || rest.size() <= 2)
        throw fail("expected 'response <<TOKEN'");
      std::string terminator(rest.substr(2));
      std::vector<std::string> body;
      bool terminated = false;
      while (std::getline(in, line)) {
        ++line_no;
        if (trim(line) == terminator) {
          terminated = true;
          break;
        }
        body.push_back(line);
      }
      if (!terminated) throw fail("unterminated response block");
      rules.back().responses.push_back(join(body, "\n"));
      continue;
    }
    throw fail("unrecognized directive: " + std::string(sv.substr(0, 40)));
  }

  for (const auto& r : rules)
    if (r.responses.empty())
      throw Error(Errc::parse_error, path.filename().string() +
                                         ": rule '" + r.matcher.substr(0, 40) +
                                         "' has no responses");
  return rules;
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<std::string> complete(const ChatRequest& request) const = 0;
  virtual std::string describe() const = 0;
};

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedRule> rules)
      : rules_(std::move(rules)) {}

  static ScriptedBackend from_file(const std::filesystem::path& path) {
    return ScriptedBackend(load_scripted_rules(path));
  }

  std::vector<std::string> complete(const ChatRequest& request) const override {
    std::string target = prompt_match_text(request);
    std::string target_hash = fnv1a64_hex(target);
    const ScriptedRule* match = nullptr;
    for (const auto& rule : rules_) {
      bool hit = rule.matcher_kind == ScriptedRule::Matcher::substring
                     ? target.find(rule.matcher) != std::string::npos
                     : rule.matcher == target_hash;
      if (hit) {
        match = &rule;
        break;
      }
    }
    if (match == nullptr)
      throw Error(Errc::no_matching_rule,
                  "no scripted rule matches prompt starting with '" +
                      target.substr(0, 60) + "'");
    std::vector<std::string> out;
    out.reserve(request.n_samples);
    for (int i = 0; i < request.n_samples; ++i)
      out.push_back(match->responses[i % match->responses.size()]);
    return out;
  }

  std::string describe() const override {
    return "scripted(" + std::to_string(rules_.size()) + " rules)";
  }

  const std::vector<ScriptedRule>& rules() const { return rules_; }

 private:
  std::vector<ScriptedRule> rules_;
};

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config) : config_(std::move(config)) {
    require(!config_.endpoint.empty(), Errc::config_error,
            "remote backend requires an endpoint");
    require(!config_.model_id.empty(), Errc::config_error,
            "remote backend requires a model id");
  }

  std::vector<std::string> complete(const ChatRequest& request) const override {
    std::string token;
    if (!config_.auth_env_var.empty()) {
      const char* value = std::getenv(config_.auth_env_var.c_str());
      if (value == nullptr || *value == '\0')
        throw Error(Errc::auth_missing,
                    "environment variable " + config_.auth_env_var +
                        " is not set");
      token = value;
    }

    nlohmann::json body;
    body["model"] = config_.model_id;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages)
      body["messages"].push_back(
          {{"role", to_string(m.role)}, {"content", m.content}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    body["n"] = request.n_samples;
    const std::string payload = body.dump();

    ParsedUrl url = parse_url(config_.endpoint);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    std::string last_failure = "no attempt made";
    bool rate_limited = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(config_.retry_backoff * (1 << (attempt - 1)));

      httplib::Client client(url.base);
      auto timeout = std::chrono::duration_cast<std::chrono::seconds>(
          config_.request_timeout);
      client.set_connection_timeout(timeout.count(), 0);
      client.set_read_timeout(timeout.count(), 0);
      client.set_write_timeout(timeout.count(), 0);

      auto res = client.Post(url.path, headers, payload, "application/json");
      if (!res) {
        last_failure = "connection error: " + httplib::to_string(res.error());
        rate_limited = false;
        continue;
      }
      if (res->status == 200) return parse_choices(res->body, request.n_samples);
      if (res->status == 429) {
        last_failure = "HTTP 429";
        rate_limited = true;
        continue;
      }
      if (res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
        rate_limited = false;
        continue;
      }
      throw Error(Errc::bad_response, "HTTP " + std::to_string(res->status) +
                                          ": " + res->body.substr(0, 200));
    }
    if (rate_limited)
      throw Error(Errc::rate_limited,
                  "rate limited after " + std::to_string(config_.max_retries) +
                      " retries");
    throw Error(Errc::backend_unreachable,
                config_.endpoint + ": " + last_failure);
  }

  std::string describe() const override {
    return "remote(" + config_.model_id + " @ " + config_.endpoint + ")";
  }

 private:
  static std::vector<std::string> parse_choices(const std::string& body,
                                                int expected) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::bad_response,
                  std::string("response is not JSON: ") + e.what());
    }
    if (!doc.contains("choices") || !doc["choices"].is_array())
      throw Error(Errc::bad_response, "response has no choices array");
    std::vector<std::string> out;
    for (const auto& choice : doc["choices"]) {
      if (choice.contains("message") && choice["message"].contains("content"))
        out.push_back(choice["message"]["content"].get<std::string>());
      else if (choice.contains("text"))
        out.push_back(choice["text"].get<std::string>());
    }
    if (static_cast<int>(out.size()) != expected)
      throw Error(Errc::bad_response,
                  "expected " + std::to_string(expected) + " choices, got " +
                      std::to_string(out.size()));
    return out;
  }

  BackendConfig config_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendKind::scripted) {
    require(!config.script_path.empty(), Errc::config_error,
            "scripted backend requires script_path");
    return std::make_unique<ScriptedBackend>(
        ScriptedBackend::from_file(config.script_path));
  }
  return std::make_unique<RemoteBackend>(config);
}

// Request-shape checks shared by every backend.
inline std::vector<std::string> complete(const Backend& backend,
                                         const ChatRequest& request) {
  require(!request.messages.empty(), Errc::precondition,
          "chat request has no messages");
  require(request.n_samples >= 1, Errc::precondition, "n_samples must be >= 1");
  require(request.max_tokens >= 1, Errc::precondition,
          "max_tokens must be >= 1");
  require(request.temperature >= 0.0, Errc::precondition,
          "temperature must be >= 0");
  auto out = backend.complete(request);
  require(static_cast<int>(out.size()) == request.n_samples,
          Errc::bad_response, "backend returned wrong sample count");
  return out;
}

}  // namespace dap
