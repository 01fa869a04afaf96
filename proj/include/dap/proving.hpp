#pragma once

// Proving stage: sample candidate proofs for a single-hole statement, verify
// them, and decide solved/unsolved under any-success semantics. Also hosts
// the three rewriting strategies and the spurious-proof screen that
// quarantines passes exploiting answer-placeholder visibility.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "dap/discovery.hpp"
#include "dap/errors.hpp"
#include "dap/llm_gateway.hpp"
#include "dap/prompts.hpp"
#include "dap/statement.hpp"
#include "dap/verifier.hpp"

namespace dap {

enum class RewritingStrategy { no_rewriting, straight_rewriting, proposed };

inline const char* to_string(RewritingStrategy s) {
  switch (s) {
    case RewritingStrategy::no_rewriting: return "no_rewriting";
    case RewritingStrategy::straight_rewriting: return "straight_rewriting";
    case RewritingStrategy::proposed: return "proposed";
  }
  return "proposed";
}

inline std::optional<RewritingStrategy> strategy_from(std::string_view name) {
  if (name == "no_rewriting") return RewritingStrategy::no_rewriting;
  if (name == "straight_rewriting") return RewritingStrategy::straight_rewriting;
  if (name == "proposed") return RewritingStrategy::proposed;
  return std::nullopt;
}

struct ProveConfig {
  int n_samples = 32;
  double temperature = 0.7;
  int max_tokens = 30000;
  std::chrono::milliseconds per_sample_timeout{180000};
  std::string prover_template = PromptTemplates::defaults().prover;
};

struct ProofAttempt {
  int sample_index = 0;
  std::string proof_source;  // extracted candidate, as sent for verification
  std::optional<VerificationResult> verification;  // nullopt = skipped
  std::vector<std::string> spurious_flags;

  bool skipped() const { return !verification.has_value(); }
  bool success() const {
    return verification.has_value() &&
           verification->status == VerifyStatus::passed &&
           spurious_flags.empty();
  }
};

struct ProveResult {
  bool solved = false;
  std::optional<int> first_success_index;
  std::vector<ProofAttempt> attempts;
  RewritingStrategy strategy = RewritingStrategy::proposed;
  std::string prover_prompt;  // exact text sent to the prover backend
};

inline constexpr const char* kFlagAnswerNameInProof = "ANSWER_NAME_IN_PROOF";
inline constexpr const char* kFlagStatementCopyFill = "STATEMENT_COPY_FILL";
inline constexpr const char* kFlagTrivialReflClose = "TRIVIAL_REFL_CLOSE";

// Heuristic lint over a complete proof candidate, relative to the original
// hard statement. Flags quarantine a pass for human review; they do not try
// to prove cheating.
//
//   ANSWER_NAME_IN_PROOF  an original answer-abbrev name occurs in a proof body
//   STATEMENT_COPY_FILL   an answer abbrev is filled with a verbatim copy of
//                         goal structure (whitespace-insensitive substring,
//                         ignoring fills shorter than 6 bytes)
//   TRIVIAL_REFL_CLOSE    the goal still references a filled answer abbrev and
//                         the proof is a bare reflexivity closer
inline std::vector<std::string> detect_spurious(
    const FormalStatement& original, const std::string& candidate_source) {
  std::vector<std::string> flags;
  if (candidate_source.empty()) return flags;
  auto names = original.answer_abbrev_names();
  if (names.empty()) return flags;

  auto scanned = detail::scan_source(candidate_source);
  const std::string& src = scanned.source;

  auto is_answer_name = [&](const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
  };

  bool name_in_proof = false;
  bool copy_fill = false;
  bool refl_close = false;

  std::vector<const Declaration*> filled_abbrevs;
  for (const auto& d : scanned.decls) {
    if (d.kind != DeclKind::answer_abbrev || !is_answer_name(d.name)) continue;
    if (d.body_span.empty()) continue;
    std::string_view body =
        std::string_view(src).substr(d.body_span.begin, d.body_span.size());
    if (trim_view(body) == kPlaceholderToken) continue;
    filled_abbrevs.push_back(&d);
  }

  static const std::vector<std::string> refl_closers = {
      "rfl",           "by rfl",          "exact rfl",
      "by exact rfl",  "Iff.rfl",         "by exact Iff.rfl"};

  for (const auto& d : scanned.decls) {
    if (d.kind != DeclKind::theorem) continue;

    for (const auto& name : names)
      if (!detail::find_code_token(src, scanned.mask, name, d.body_span.begin,
                                   d.body_span.end)
               .empty())
        name_in_proof = true;

    std::string goal = strip_all_ws(
        std::string_view(src).substr(d.goal_span.begin, d.goal_span.size()));
    for (const Declaration* abbrev : filled_abbrevs) {
      std::string fill = strip_all_ws(std::string_view(src).substr(
          abbrev->body_span.begin, abbrev->body_span.size()));
      if (fill.size() >= 6 && goal.find(fill) != std::string::npos)
        copy_fill = true;

      bool goal_refs_abbrev =
          !detail::find_code_token(src, scanned.mask, abbrev->name,
                                   d.goal_span.begin, d.goal_span.end)
               .empty();
      if (goal_refs_abbrev) {
        std::string body = collapse_ws(std::string_view(src).substr(
            d.body_span.begin, d.body_span.size()));
        if (std::find(refl_closers.begin(), refl_closers.end(), body) !=
            refl_closers.end())
          refl_close = true;
      }
    }
  }

  if (name_in_proof) flags.push_back(kFlagAnswerNameInProof);
  if (copy_fill) flags.push_back(kFlagStatementCopyFill);
  if (refl_close) flags.push_back(kFlagTrivialReflClose);
  return flags;
}

namespace detail {

// Shared sampling/verification core. `statement_text` is spliced into the
// prover template verbatim; `spurious_reference` supplies the answer-abbrev
// names the screen looks for. Verification fans out in waves bounded by the
// verifier's max_concurrent and stops at the first wave containing a
// non-spurious pass; later samples are recorded as skipped.
inline ProveResult sample_and_verify(const std::string& statement_text,
                                     const FormalStatement& spurious_reference,
                                     const ProveConfig& config,
                                     const Backend& prover,
                                     const Verifier& verifier,
                                     RewritingStrategy strategy) {
  ProveResult result;
  result.strategy = strategy;
  result.prover_prompt = expand_template(config.prover_template,
                                         {{"statement", statement_text}});

  auto completions =
      complete(prover, ChatRequest::single(result.prover_prompt,
                                           config.temperature,
                                           config.max_tokens,
                                           config.n_samples));

  result.attempts.resize(completions.size());
  for (size_t i = 0; i < completions.size(); ++i) {
    auto& attempt = result.attempts[i];
    attempt.sample_index = static_cast<int>(i);
    attempt.proof_source = extract_code_block(completions[i]);
    attempt.spurious_flags =
        detect_spurious(spurious_reference, attempt.proof_source);
  }

  const size_t wave = std::max(1, verifier.config().max_concurrent);
  for (size_t begin = 0; begin < result.attempts.size(); begin += wave) {
    size_t end = std::min(begin + wave, result.attempts.size());
    std::vector<VerificationRequest> batch;
    for (size_t i = begin; i < end; ++i)
      batch.push_back(
          {result.attempts[i].proof_source, config.per_sample_timeout});
    auto verdicts = verifier.verify_batch(batch);
    for (size_t i = begin; i < end; ++i)
      result.attempts[i].verification = verdicts[i - begin];

    bool wave_success = false;
    for (size_t i = begin; i < end; ++i)
      if (result.attempts[i].success()) {
        if (!result.first_success_index.has_value())
          result.first_success_index = static_cast<int>(i);
        wave_success = true;
        break;
      }
    if (wave_success) break;  // remaining samples stay skipped
  }

  result.solved = result.first_success_index.has_value();
  return result;
}

}  // namespace detail

// Standard ATP step over an Easy Mode statement: exactly one proof hole and
// no answer holes. `original` (when given) is the hard statement whose
// answer-abbrev names drive the spurious screen.
inline ProveResult prove_easy(const FormalStatement& easy_stmt,
                              const ProveConfig& config, const Backend& prover,
                              const Verifier& verifier,
                              const FormalStatement* original = nullptr,
                              RewritingStrategy strategy =
                                  RewritingStrategy::proposed) {
  require(easy_stmt.answer_hole_count() == 0 &&
              easy_stmt.proof_hole_count() == 1,
          Errc::precondition,
          "expected exactly one proof hole and no answer holes, got " +
              std::to_string(easy_stmt.proof_hole_count()) + " proof and " +
              std::to_string(easy_stmt.answer_hole_count()) + " answer holes");
  return detail::sample_and_verify(easy_stmt.raw_source(),
                                   original != nullptr ? *original : easy_stmt,
                                   config, prover, verifier, strategy);
}

// One problem under one rewriting strategy. Proof-style statements skip
// discovery entirely and are proved in their original form; the prover
// prompt is then identical across strategies.
inline ProveResult run_strategy(const FormalStatement& hard_stmt,
                                const std::string& problem_nl,
                                RewritingStrategy strategy,
                                const DiscoveryConfig& discovery_cfg,
                                const ProveConfig& prove_cfg,
                                const Backend& discovery_backend,
                                const Backend& prover_backend,
                                const Verifier& verifier,
                                std::optional<DiscoveryOutcome>* discovery_out
                                  = nullptr) {
  if (discovery_out != nullptr) discovery_out->reset();

  if (classify_style(hard_stmt) == ProblemStyle::proof_style)
    return prove_easy(hard_stmt, prove_cfg, prover_backend, verifier, nullptr,
                      strategy);

  switch (strategy) {
    case RewritingStrategy::no_rewriting:
      // Both holes go to the prover verbatim.
      return detail::sample_and_verify(hard_stmt.raw_source(), hard_stmt,
                                       prove_cfg, prover_backend, verifier,
                                       strategy);

    case RewritingStrategy::straight_rewriting: {
      std::string prompt =
          expand_template(discovery_cfg.templates.straight_rewriting,
                          {{"problem", problem_nl},
                           {"statement", hard_stmt.raw_source()}});
      auto responses = complete(
          discovery_backend,
          ChatRequest::single(prompt, discovery_cfg.temperature,
                              discovery_cfg.max_tokens));
      auto verdict =
          validate_rewrite(hard_stmt, extract_code_block(responses[0]));
      if (!verdict.pass) {
        ProveResult failed;
        failed.strategy = strategy;
        return failed;
      }
      return prove_easy(*verdict.statement, prove_cfg, prover_backend,
                        verifier, &hard_stmt, strategy);
    }

    case RewritingStrategy::proposed: {
      DiscoveryOutcome outcome = run_discovery(problem_nl, hard_stmt,
                                               discovery_cfg,
                                               discovery_backend);
      SolutionTrace trace{outcome.final_trace(), outcome.answer.expression};
      FormalStatement easy =
          llm_rewrite(hard_stmt, problem_nl, trace, discovery_cfg,
                      discovery_backend, &outcome.transcript);
      if (discovery_out != nullptr) *discovery_out = outcome;
      return prove_easy(easy, prove_cfg, prover_backend, verifier, &hard_stmt,
                        strategy);
    }
  }
  throw Error(Errc::precondition, "unknown strategy");
}

}  // namespace dap
