#pragma once

// Discovery agent loop: generate a natural-language solution, audit it,
// correct it under an iteration budget, and produce the single-placeholder
// rewrite of the formal statement. With the agent disabled (or a zero
// budget) the first generated answer is used as-is.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dap/errors.hpp"
#include "dap/llm_gateway.hpp"
#include "dap/prompts.hpp"
#include "dap/statement.hpp"

namespace dap {

struct SolutionTrace {
  std::string chain_of_thought;
  std::string final_answer;  // empty when extraction failed
};

enum class Severity { critical, major, minor };

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::critical: return "critical";
    case Severity::major: return "major";
    case Severity::minor: return "minor";
  }
  return "major";
}

struct Finding {
  std::string location;
  Severity severity = Severity::major;
  std::string description;
};

// Structured self-verification outcome. The verdict is derived: a report is
// clean exactly when no finding is critical or major; minor remarks alone do
// not trigger a correction round.
struct ErrorReport {
  std::vector<Finding> findings;

  bool clean() const {
    for (const auto& f : findings)
      if (f.severity != Severity::minor) return false;
    return true;
  }

  const char* verdict() const { return clean() ? "clean" : "flawed"; }
};

inline std::string render_report(const ErrorReport& report) {
  if (report.findings.empty()) return "(no findings)";
  std::vector<std::string> lines;
  for (const auto& f : report.findings)
    lines.push_back("- " + f.location + " [" + to_string(f.severity) +
                    "]: " + f.description);
  return join(lines, "\n");
}

// Findings arrive as "ERROR: <location> | <severity> | <description>" lines;
// a clean audit is the phrase "no errors found". Anything else is treated as
// an unparseable report and therefore flawed.
inline ErrorReport parse_error_report(const std::string& response) {
  ErrorReport report;
  size_t pos = 0;
  while (pos <= response.size()) {
    size_t eol = response.find('\n', pos);
    if (eol == std::string::npos) eol = response.size();
    std::string_view line = trim_view(
        std::string_view(response).substr(pos, eol - pos));
    if (line.substr(0, 6) == "ERROR:") {
      std::string rest(line.substr(6));
      std::vector<std::string> fields;
      size_t start = 0;
      while (fields.size() < 2) {
        size_t bar = rest.find('|', start);
        if (bar == std::string::npos) break;
        fields.push_back(trim(rest.substr(start, bar - start)));
        start = bar + 1;
      }
      fields.push_back(trim(rest.substr(start)));

      Finding f;
      if (fields.size() == 3) {
        f.location = fields[0];
        std::string sev = to_lower(fields[1]);
        if (sev == "critical") f.severity = Severity::critical;
        else if (sev == "minor") f.severity = Severity::minor;
        else f.severity = Severity::major;
        f.description = fields[2];
      } else {
        f.location = "report";
        f.severity = Severity::major;
        f.description = trim(rest);
      }
      report.findings.push_back(std::move(f));
    }
    if (eol == response.size()) break;
    pos = eol + 1;
  }
  if (report.findings.empty() && !contains_ci(response, "no errors found"))
    report.findings.push_back({"report", Severity::critical,
                               "unparseable report"});
  return report;
}

struct DiscoveryConfig {
  bool agent_enabled = true;
  int max_sv_iterations = 30;
  int rewrite_retries = 3;
  double temperature = 1.0;
  int max_tokens = 30000;
  PromptTemplates templates = PromptTemplates::defaults();
};

struct TranscriptEntry {
  std::string stage;  // generation | verification | correction | rewriting
  std::string prompt;
  std::string response;
};

struct DiscoveryOutcome {
  AnswerExpression answer;
  int iterations_used = 0;   // correction rounds consumed
  bool fallback_used = false;
  std::vector<TranscriptEntry> transcript;

  // Chain of thought backing the answer: the latest generation/correction.
  std::string final_trace() const {
    for (auto it = transcript.rbegin(); it != transcript.rend(); ++it)
      if (it->stage == "generation" || it->stage == "correction")
        return it->response;
    return {};
  }
};

namespace detail {

inline std::string ask(const Backend& backend, const DiscoveryConfig& config,
                       const std::string& stage, const std::string& prompt,
                       std::vector<TranscriptEntry>* transcript) {
  auto out = complete(backend, ChatRequest::single(prompt, config.temperature,
                                                   config.max_tokens));
  if (transcript != nullptr) transcript->push_back({stage, prompt, out[0]});
  return out[0];
}

}  // namespace detail

inline SolutionTrace generate_solution(
    const std::string& problem_nl, const DiscoveryConfig& config,
    const Backend& backend, std::vector<TranscriptEntry>* transcript = nullptr) {
  require(!problem_nl.empty(), Errc::precondition, "problem text is empty");
  std::string prompt =
      expand_template(config.templates.generation, {{"problem", problem_nl}});
  std::string response =
      detail::ask(backend, config, "generation", prompt, transcript);
  SolutionTrace trace;
  trace.chain_of_thought = response;
  trace.final_answer = extract_final_answer(response).value_or("");
  return trace;
}

inline ErrorReport self_verify(const std::string& problem_nl,
                               const SolutionTrace& trace,
                               const DiscoveryConfig& config,
                               const Backend& backend,
                               std::vector<TranscriptEntry>* transcript = nullptr) {
  require(!trace.chain_of_thought.empty(), Errc::precondition,
          "trace has no chain of thought");
  std::string prompt = expand_template(
      config.templates.verification,
      {{"problem", problem_nl}, {"trace", trace.chain_of_thought}});
  std::string response =
      detail::ask(backend, config, "verification", prompt, transcript);
  return parse_error_report(response);
}

inline SolutionTrace self_correct(
    const std::string& problem_nl, const SolutionTrace& trace,
    const ErrorReport& report, const DiscoveryConfig& config,
    const Backend& backend, std::vector<TranscriptEntry>* transcript = nullptr) {
  require(!report.clean(), Errc::precondition,
          "self_correct called with a clean report");
  std::string prompt = expand_template(config.templates.correction,
                                       {{"problem", problem_nl},
                                        {"trace", trace.chain_of_thought},
                                        {"report", render_report(report)}});
  std::string response =
      detail::ask(backend, config, "correction", prompt, transcript);
  SolutionTrace revised;
  revised.chain_of_thought = response;
  revised.final_answer = extract_final_answer(response).value_or("");
  return revised;
}

// The agent loop. Stages alternate verification/correction after the initial
// generation; the loop exits on a clean verdict or when the correction budget
// is exhausted, in which case the latest answer is used and the outcome is
// marked as a fallback.
inline DiscoveryOutcome run_discovery(const std::string& problem_nl,
                                      const FormalStatement& stmt,
                                      const DiscoveryConfig& config,
                                      const Backend& backend) {
  require(classify_style(stmt) == ProblemStyle::solution_style,
          Errc::precondition, "statement has no answer hole");

  DiscoveryOutcome outcome;
  SolutionTrace trace =
      generate_solution(problem_nl, config, backend, &outcome.transcript);
  std::string last_answer = trace.final_answer;

  if (config.agent_enabled && config.max_sv_iterations > 0) {
    for (;;) {
      ErrorReport report = self_verify(problem_nl, trace, config, backend,
                                       &outcome.transcript);
      if (report.clean()) break;
      if (outcome.iterations_used == config.max_sv_iterations) {
        outcome.fallback_used = true;
        break;
      }
      trace = self_correct(problem_nl, trace, report, config, backend,
                           &outcome.transcript);
      ++outcome.iterations_used;
      if (!trace.final_answer.empty()) last_answer = trace.final_answer;
    }
  }

  std::string chosen =
      !trace.final_answer.empty() ? trace.final_answer : last_answer;
  if (chosen.empty())
    throw Error(Errc::discovery_failed,
                "no extractable answer in any iteration");

  const Placeholder* hole = stmt.first_answer_hole();
  const Declaration* owner = stmt.declaration_at(hole->span.begin);
  outcome.answer = {chosen, owner != nullptr ? owner->declared_type : ""};
  return outcome;
}

// Ask the model for the Easy Mode rewrite and gate it with validate_rewrite;
// rejected attempts are retried with the violations appended, and after the
// retry budget the mechanical inline rewrite takes over.
inline FormalStatement llm_rewrite(
    const FormalStatement& stmt, const std::string& problem_nl,
    const SolutionTrace& trace, const DiscoveryConfig& config,
    const Backend& backend, std::vector<TranscriptEntry>* transcript = nullptr) {
  require(classify_style(stmt) == ProblemStyle::solution_style,
          Errc::precondition, "statement has no answer hole");
  require(!trace.final_answer.empty(), Errc::precondition,
          "trace has no final answer");

  std::string base_prompt =
      expand_template(config.templates.rewriting,
                      {{"problem", problem_nl},
                       {"statement", stmt.raw_source()},
                       {"trace", trace.chain_of_thought}});
  std::string prompt = base_prompt;
  for (int attempt = 0; attempt <= config.rewrite_retries; ++attempt) {
    std::string response =
        detail::ask(backend, config, "rewriting", prompt, transcript);
    auto verdict = validate_rewrite(stmt, extract_code_block(response));
    if (verdict.pass) return std::move(*verdict.statement);
    prompt = base_prompt +
             "\nYour previous rewrite was rejected:\n- " +
             join(verdict.violations, "\n- ") +
             "\nProduce a corrected Lean 4 code block.\n";
  }

  const Placeholder* hole = stmt.first_answer_hole();
  const Declaration* owner = stmt.declaration_at(hole->span.begin);
  AnswerExpression answer{trace.final_answer,
                          owner != nullptr ? owner->declared_type : ""};
  try {
    FormalStatement easy = inline_rewrite(stmt, answer);
    auto verdict = validate_rewrite(stmt, easy.raw_source());
    require(verdict.pass, Errc::rewrite_failed,
            "mechanical rewrite failed validation: " +
                join(verdict.violations, "; "));
    return easy;
  } catch (const Error& e) {
    if (e.code() == Errc::rewrite_failed) throw;
    throw Error(Errc::rewrite_failed,
                std::string("mechanical fallback failed: ") + e.what());
  }
}

}  // namespace dap
