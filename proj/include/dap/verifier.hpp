#pragma once

// Client for an external proof-checking service plus a deterministic mock.
//
// Remote protocol (JSON over HTTP, documented in the README):
//   POST <endpoint>/check   {"source", "timeout_s", "toolchain"}
//     -> {"status": "passed|compilation_error|timeout|service_error",
//         "diagnostics": [{"severity","message","line","column"}]}
//   GET  <endpoint>/health  -> {"status":"ok","toolchain":"4.15.0"}
//
// Mock rule table (JSON file): [{"source_hash","status","diagnostics":[...]}].
// Unmapped sources fail compilation. Either way, a source that still carries
// a standalone placeholder token is rejected client-side before any rule or
// network lookup, so an unfinished proof can never be reported passed.

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dap/errors.hpp"
#include "dap/statement.hpp"
#include "dap/util.hpp"

namespace dap {

enum class VerifyStatus {
  passed,
  compilation_error,
  contains_placeholder,
  timeout,
  service_error,
};

inline const char* to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::passed: return "passed";
    case VerifyStatus::compilation_error: return "compilation_error";
    case VerifyStatus::contains_placeholder: return "contains_placeholder";
    case VerifyStatus::timeout: return "timeout";
    case VerifyStatus::service_error: return "service_error";
  }
  return "service_error";
}

inline std::optional<VerifyStatus> verify_status_from(std::string_view name) {
  if (name == "passed") return VerifyStatus::passed;
  if (name == "compilation_error") return VerifyStatus::compilation_error;
  if (name == "contains_placeholder") return VerifyStatus::contains_placeholder;
  if (name == "timeout") return VerifyStatus::timeout;
  if (name == "service_error") return VerifyStatus::service_error;
  return std::nullopt;
}

struct Diagnostic {
  std::string severity;  // "error", "warning", "info"
  std::string message;
  int line = 0;
  int column = 0;
};

struct VerificationRequest {
  std::string source;
  std::chrono::milliseconds timeout{180000};
};

struct VerificationResult {
  VerifyStatus status = VerifyStatus::service_error;
  std::vector<Diagnostic> diagnostics;
};

enum class VerifierKind { remote, mock };

struct VerifierConfig {
  VerifierKind kind = VerifierKind::mock;
  std::string endpoint;
  std::string rules_path;  // mock rule table
  std::string toolchain_tag = "4.15.0";
  int max_concurrent = 4;
  std::chrono::milliseconds default_timeout{180000};
};

class Verifier {
 public:
  explicit Verifier(VerifierConfig config) : config_(std::move(config)) {
    if (config_.kind == VerifierKind::remote)
      require(!config_.endpoint.empty(), Errc::config_error,
              "remote verifier requires an endpoint");
    if (config_.kind == VerifierKind::mock && !config_.rules_path.empty())
      load_rules(config_.rules_path);
  }

  const VerifierConfig& config() const { return config_; }

  VerificationResult verify(const VerificationRequest& request) const {
    require(!request.source.empty(), Errc::precondition, "source is empty");
    // Client-side gate: never ship an unfinished proof.
    if (contains_placeholder_token(request.source))
      return {VerifyStatus::contains_placeholder,
              {{"error", "source still contains a placeholder token", 0, 0}}};
    if (config_.kind == VerifierKind::mock) return mock_verify(request);
    return remote_verify(request);
  }

  // Positionally aligned results; at most max_concurrent in flight. Per-item
  // failures become service_error results and never abort the batch.
  std::vector<VerificationResult> verify_batch(
      const std::vector<VerificationRequest>& requests) const {
    require(!requests.empty(), Errc::precondition, "empty batch");
    std::vector<VerificationResult> out(requests.size());
    size_t workers = std::min<size_t>(
        std::max(1, config_.max_concurrent), requests.size());
    std::atomic<size_t> next{0};
    auto run = [&] {
      size_t i;
      while ((i = next.fetch_add(1)) < requests.size()) {
        try {
          out[i] = verify(requests[i]);
        } catch (const std::exception& e) {
          out[i] = {VerifyStatus::service_error,
                    {{"error", e.what(), 0, 0}}};
        }
      }
    };
    if (workers == 1) {
      run();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
      for (auto& t : pool) t.join();
    }
    return out;
  }

  bool health_check() const {
    if (config_.kind == VerifierKind::mock) return true;
    ParsedUrl url = parse_url(config_.endpoint);
    httplib::Client client(url.base);
    auto timeout = std::chrono::duration_cast<std::chrono::seconds>(
        config_.default_timeout);
    client.set_connection_timeout(timeout.count(), 0);
    client.set_read_timeout(timeout.count(), 0);
    auto res = client.Get(join_path(url.path, "/health"));
    if (!res || res->status != 200) return false;
    try {
      auto doc = nlohmann::json::parse(res->body);
      if (doc.contains("toolchain")) {
        auto tag = doc["toolchain"].get<std::string>();
        if (tag != config_.toolchain_tag) {
          log_warning("verifier toolchain is '" + tag + "', expected '" +
                      config_.toolchain_tag + "'");
          return false;
        }
      }
    } catch (const nlohmann::json::exception&) {
      // Reachable but schema-less; treat as healthy.
    }
    return true;
  }

 private:
  static std::string join_path(const std::string& base,
                               const std::string& suffix) {
    if (base == "/" || base.empty()) return suffix;
    return base + suffix;
  }

  void load_rules(const std::string& path) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error,
                  path + ": " + std::string(e.what()));
    }
    require(doc.is_array(), Errc::parse_error,
            path + ": rule table must be a JSON array");
    for (const auto& entry : doc) {
      VerificationResult result;
      auto status = verify_status_from(
          entry.at("status").get<std::string>());
      require(status.has_value(), Errc::parse_error,
              path + ": unknown status " + entry.at("status").dump());
      result.status = *status;
      for (const auto& d : entry.value("diagnostics", nlohmann::json::array()))
        result.diagnostics.push_back({d.value("severity", "error"),
                                      d.value("message", ""),
                                      d.value("line", 0),
                                      d.value("column", 0)});
      if (result.status == VerifyStatus::passed)
        for (const auto& d : result.diagnostics)
          require(d.severity != "error", Errc::parse_error,
                  path + ": passed rule carries an error diagnostic");
      rules_[entry.at("source_hash").get<std::string>()] = std::move(result);
    }
  }

  VerificationResult mock_verify(const VerificationRequest& request) const {
    auto it = rules_.find(fnv1a64_hex(request.source));
    if (it != rules_.end()) return it->second;
    return {VerifyStatus::compilation_error, {{"error", "no rule", 0, 0}}};
  }

  VerificationResult remote_verify(const VerificationRequest& request) const {
    nlohmann::json body;
    body["source"] = request.source;
    body["timeout_s"] = static_cast<int>(
        std::chrono::duration_cast<std::chrono::seconds>(request.timeout)
            .count());
    body["toolchain"] = config_.toolchain_tag;

    ParsedUrl url = parse_url(config_.endpoint);
    httplib::Client client(url.base);
    auto http_timeout = std::chrono::duration_cast<std::chrono::seconds>(
        request.timeout + std::chrono::seconds(10));
    client.set_connection_timeout(http_timeout.count(), 0);
    client.set_read_timeout(http_timeout.count(), 0);
    client.set_write_timeout(http_timeout.count(), 0);

    auto res = client.Post(join_path(url.path, "/check"), body.dump(),
                           "application/json");
    if (!res) {
      bool timed_out = res.error() == httplib::Error::Read ||
                       res.error() == httplib::Error::ConnectionTimeout;
      return {timed_out ? VerifyStatus::timeout : VerifyStatus::service_error,
              {{"error", httplib::to_string(res.error()), 0, 0}}};
    }
    if (res->status != 200)
      return {VerifyStatus::service_error,
              {{"error", "HTTP " + std::to_string(res->status), 0, 0}}};

    try {
      auto doc = nlohmann::json::parse(res->body);
      VerificationResult result;
      auto status = verify_status_from(doc.value("status", ""));
      result.status = status.value_or(VerifyStatus::service_error);
      for (const auto& d : doc.value("diagnostics", nlohmann::json::array()))
        result.diagnostics.push_back({d.value("severity", "error"),
                                      d.value("message", ""),
                                      d.value("line", 0),
                                      d.value("column", 0)});
      if (result.status == VerifyStatus::passed)
        for (const auto& d : result.diagnostics)
          if (d.severity == "error") {
            result.status = VerifyStatus::service_error;
            result.diagnostics.push_back(
                {"error", "service reported passed with error diagnostics", 0,
                 0});
            break;
          }
      return result;
    } catch (const nlohmann::json::exception& e) {
      return {VerifyStatus::service_error,
              {{"error", std::string("bad response: ") + e.what(), 0, 0}}};
    }
  }

  VerifierConfig config_;
  std::unordered_map<std::string, VerificationResult> rules_;
};

}  // namespace dap
