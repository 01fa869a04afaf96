#pragma once

#include <stdexcept>
#include <string>

namespace dap {

// Failure categories surfaced by the pipeline. Soft outcomes (verification
// statuses, validation verdicts) are ordinary values, not errors.
enum class Errc {
  precondition,
  no_placeholder,
  malformed_declaration,
  no_answer_hole,
  type_mismatch,
  name_collision,
  parse_error,
  io_error,
  no_matching_rule,
  auth_missing,
  backend_unreachable,
  rate_limited,
  bad_response,
  discovery_failed,
  rewrite_failed,
  manifest_mismatch,
  aborted_run,
  config_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::precondition: return "PreconditionViolation";
    case Errc::no_placeholder: return "NoPlaceholder";
    case Errc::malformed_declaration: return "MalformedDeclaration";
    case Errc::no_answer_hole: return "NoAnswerHole";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::name_collision: return "NameCollision";
    case Errc::parse_error: return "ParseError";
    case Errc::io_error: return "IoError";
    case Errc::no_matching_rule: return "NoMatchingRule";
    case Errc::auth_missing: return "AuthMissing";
    case Errc::backend_unreachable: return "BackendUnreachable";
    case Errc::rate_limited: return "RateLimited";
    case Errc::bad_response: return "BadResponse";
    case Errc::discovery_failed: return "DiscoveryFailed";
    case Errc::rewrite_failed: return "RewriteFailed";
    case Errc::manifest_mismatch: return "ManifestMismatch";
    case Errc::aborted_run: return "AbortedRun";
    case Errc::config_error: return "ConfigError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace dap
