#pragma once

// Benchmark orchestration: fan problems out over a bounded worker pool, run
// the configured strategy on each, and aggregate the X/Y solved counts,
// discovery accuracy, and per-problem records into a report that renders as
// JSON (machine-readable, byte-stable) or markdown.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dap/dataset.hpp"
#include "dap/discovery.hpp"
#include "dap/errors.hpp"
#include "dap/llm_gateway.hpp"
#include "dap/proving.hpp"
#include "dap/verifier.hpp"

namespace dap {

using ordered_json = nlohmann::ordered_json;

enum class AnswerJudgment { correct, incorrect, needs_review };

inline const char* to_string(AnswerJudgment j) {
  switch (j) {
    case AnswerJudgment::correct: return "correct";
    case AnswerJudgment::incorrect: return "incorrect";
    case AnswerJudgment::needs_review: return "needs_review";
  }
  return "needs_review";
}

enum class FailureTag {
  misunderstood_problem,
  constraint_misuse,
  flawed_reasoning,
  arithmetic_slip,
  beyond_capability,
};

inline const char* to_string(FailureTag t) {
  switch (t) {
    case FailureTag::misunderstood_problem: return "misunderstood_problem";
    case FailureTag::constraint_misuse: return "constraint_misuse";
    case FailureTag::flawed_reasoning: return "flawed_reasoning";
    case FailureTag::arithmetic_slip: return "arithmetic_slip";
    case FailureTag::beyond_capability: return "beyond_capability";
  }
  return "flawed_reasoning";
}

inline std::optional<FailureTag> failure_tag_from(std::string_view name) {
  if (name == "misunderstood_problem") return FailureTag::misunderstood_problem;
  if (name == "constraint_misuse") return FailureTag::constraint_misuse;
  if (name == "flawed_reasoning") return FailureTag::flawed_reasoning;
  if (name == "arithmetic_slip") return FailureTag::arithmetic_slip;
  if (name == "beyond_capability") return FailureTag::beyond_capability;
  return std::nullopt;
}

struct RunConfig {
  std::filesystem::path benchmark_root;
  BenchmarkManifest manifest;
  RewritingStrategy strategy = RewritingStrategy::proposed;
  DiscoveryConfig discovery;
  ProveConfig prove;
  BackendConfig discovery_backend;
  BackendConfig prover_backend;
  VerifierConfig verifier;
  int parallelism = 1;
  uint64_t seed = 0;
  std::map<std::string, FailureTag> failure_tags;  // operator-assigned, by id
};

struct ProblemRecord {
  std::string id;
  ProblemStyle style = ProblemStyle::proof_style;
  std::optional<DiscoveryOutcome> discovery;
  std::optional<AnswerJudgment> answer_correct;
  ProveResult prove;
  std::optional<FailureTag> failure_tag;
  std::optional<std::string> error;  // per-problem pipeline failure
};

struct AccuracyCounts {
  int correct = 0;
  int incorrect = 0;
  int needs_review = 0;
  int total = 0;

  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
  }
};

struct RunReport {
  int schema_version = 1;
  std::string benchmark;
  int benchmark_total = 0;
  RewritingStrategy strategy = RewritingStrategy::proposed;
  int total_solved = 0;           // X
  int solution_style_solved = 0;  // Y
  AccuracyCounts discovery_accuracy;
  std::vector<ProblemRecord> per_problem;  // ordered by id
  std::vector<LoadError> excluded;
  ordered_json config_echo = ordered_json::object();
  double timing_seconds = 0.0;  // wall time; deliberately not serialized
};

// Normalized comparison of a discovered answer against the ground truth.
// Whitespace-equal means correct; equality that additionally needs outer
// parentheses stripped is ambiguous; two distinct plain atoms are a definite
// mismatch; anything else would require symbolic reasoning and is routed to
// human review.
inline AnswerJudgment judge_answer(const std::string& discovered,
                                   const std::string& truth) {
  if (collapse_ws(discovered) == collapse_ws(truth))
    return AnswerJudgment::correct;

  auto strip_outer_parens = [](std::string s) {
    for (;;) {
      if (s.size() < 2 || s.front() != '(' || s.back() != ')') return s;
      int depth = 0;
      bool wraps = true;
      for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(') ++depth;
        if (s[i] == ')') {
          --depth;
          if (depth == 0 && i + 1 != s.size()) {
            wraps = false;
            break;
          }
        }
      }
      if (!wraps) return s;
      s = s.substr(1, s.size() - 2);
    }
  };
  std::string cd = strip_outer_parens(strip_all_ws(discovered));
  std::string ct = strip_outer_parens(strip_all_ws(truth));
  if (cd == ct) return AnswerJudgment::needs_review;

  auto is_atom = [](const std::string& s) {
    if (s.empty()) return false;
    for (unsigned char c : s)
      if (!(std::isalnum(c) || c == '_' || c == '.' || c >= 0x80))
        return false;
    return true;
  };
  if (is_atom(cd) && is_atom(ct)) return AnswerJudgment::incorrect;
  return AnswerJudgment::needs_review;
}

// Accuracy over the ground-truth subset: judged for every record whose
// problem has a ground truth and whose strategy produced a discovery outcome.
inline AccuracyCounts answer_accuracy(
    const std::vector<ProblemRecord>& records,
    const std::vector<Problem>& problems) {
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;

  AccuracyCounts counts;
  for (const auto& record : records) {
    auto it = by_id.find(record.id);
    if (it == by_id.end()) continue;
    const Problem& problem = *it->second;
    if (!problem.ground_truth_answer.has_value() ||
        !record.discovery.has_value())
      continue;
    ++counts.total;
    switch (judge_answer(record.discovery->answer.expression,
                         *problem.ground_truth_answer)) {
      case AnswerJudgment::correct: ++counts.correct; break;
      case AnswerJudgment::incorrect: ++counts.incorrect; break;
      case AnswerJudgment::needs_review: ++counts.needs_review; break;
    }
  }
  return counts;
}

inline bool pass_at_k_verdict(const std::vector<bool>& passed_nonspurious,
                              int k) {
  require(k >= 1, Errc::precondition, "k must be >= 1");
  size_t limit = std::min<size_t>(k, passed_nonspurious.size());
  for (size_t i = 0; i < limit; ++i)
    if (passed_nonspurious[i]) return true;
  return false;
}

// --- serialization -----------------------------------------------------

inline ordered_json to_json(const VerificationResult& result) {
  ordered_json diags = ordered_json::array();
  for (const auto& d : result.diagnostics)
    diags.push_back({{"severity", d.severity},
                     {"message", d.message},
                     {"line", d.line},
                     {"column", d.column}});
  return {{"status", to_string(result.status)}, {"diagnostics", diags}};
}

inline ordered_json to_json(const ProofAttempt& attempt) {
  ordered_json j;
  j["sample_index"] = attempt.sample_index;
  j["skipped"] = attempt.skipped();
  j["verification"] = attempt.verification.has_value()
                          ? to_json(*attempt.verification)
                          : ordered_json(nullptr);
  j["spurious_flags"] = attempt.spurious_flags;
  j["proof_source"] = attempt.proof_source;
  return j;
}

inline ordered_json to_json(const ProveResult& result) {
  ordered_json j;
  j["strategy"] = to_string(result.strategy);
  j["solved"] = result.solved;
  j["first_success_index"] = result.first_success_index.has_value()
                                 ? ordered_json(*result.first_success_index)
                                 : ordered_json(nullptr);
  j["prover_prompt"] = result.prover_prompt;
  j["attempts"] = ordered_json::array();
  for (const auto& a : result.attempts) j["attempts"].push_back(to_json(a));
  return j;
}

inline ordered_json to_json(const DiscoveryOutcome& outcome) {
  ordered_json j;
  j["answer"] = {{"expression", outcome.answer.expression},
                 {"target_type", outcome.answer.target_type}};
  j["iterations_used"] = outcome.iterations_used;
  j["fallback_used"] = outcome.fallback_used;
  j["transcript"] = ordered_json::array();
  for (const auto& entry : outcome.transcript)
    j["transcript"].push_back({{"stage", entry.stage},
                               {"prompt", entry.prompt},
                               {"response", entry.response}});
  return j;
}

inline ordered_json to_json(const ProblemRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  j["style"] = to_string(record.style);
  j["solved"] = record.prove.solved;
  j["discovery"] = record.discovery.has_value() ? to_json(*record.discovery)
                                                : ordered_json(nullptr);
  j["answer_correct"] = record.answer_correct.has_value()
                            ? ordered_json(to_string(*record.answer_correct))
                            : ordered_json(nullptr);
  j["prove"] = to_json(record.prove);
  j["failure_tag"] = record.failure_tag.has_value()
                         ? ordered_json(to_string(*record.failure_tag))
                         : ordered_json(nullptr);
  j["error"] = record.error.has_value() ? ordered_json(*record.error)
                                        : ordered_json(nullptr);
  return j;
}

inline ordered_json to_json(const RunReport& report) {
  ordered_json j;
  j["schema_version"] = report.schema_version;
  j["benchmark"] = report.benchmark;
  j["benchmark_total"] = report.benchmark_total;
  j["strategy"] = to_string(report.strategy);
  j["total_solved"] = report.total_solved;
  j["solution_style_solved"] = report.solution_style_solved;
  j["discovery_accuracy"] = {
      {"correct", report.discovery_accuracy.correct},
      {"incorrect", report.discovery_accuracy.incorrect},
      {"needs_review", report.discovery_accuracy.needs_review},
      {"total", report.discovery_accuracy.total},
      {"fraction", report.discovery_accuracy.fraction()}};
  j["problems"] = ordered_json::array();
  for (const auto& record : report.per_problem)
    j["problems"].push_back(to_json(record));
  j["excluded"] = ordered_json::array();
  for (const auto& e : report.excluded)
    j["excluded"].push_back({{"file", e.file}, {"message", e.message}});
  j["config"] = report.config_echo;
  return j;
}

// Table cells follow the established layouts: solved counts render as
// "X / Y", accuracy as "n (p%)" with an integer percent.
inline std::string format_xy_cell(int x, int y) {
  return std::to_string(x) + " / " + std::to_string(y);
}

inline std::string format_accuracy_cell(int correct, int total) {
  long percent =
      total == 0 ? 0 : std::lround(100.0 * correct / total);
  return std::to_string(correct) + " (" + std::to_string(percent) + "%)";
}

enum class ReportFormat { json, markdown };

inline std::string markdown_from_json(const ordered_json& j) {
  std::string md;
  md += "# dap run report\n\n";
  md += "Benchmark **" + j.at("benchmark").get<std::string>() +
        "** (" + std::to_string(j.at("benchmark_total").get<int>()) +
        " problems), strategy `" + j.at("strategy").get<std::string>() +
        "`.\n\n";

  md += "| Benchmark | Solved (X / Y) |\n| --- | --- |\n";
  md += "| " + j.at("benchmark").get<std::string>() + " | " +
        format_xy_cell(j.at("total_solved").get<int>(),
                       j.at("solution_style_solved").get<int>()) +
        " |\n\n";

  const auto& acc = j.at("discovery_accuracy");
  md += "| Benchmark | Ground-truth problems | Discovery accuracy |\n";
  md += "| --- | --- | --- |\n";
  md += "| " + j.at("benchmark").get<std::string>() + " | " +
        std::to_string(acc.at("total").get<int>()) + " | " +
        format_accuracy_cell(acc.at("correct").get<int>(),
                             acc.at("total").get<int>()) +
        " |\n\n";

  md += "## Problems\n\n";
  md += "| Problem | Style | Solved | Answer | Error |\n";
  md += "| --- | --- | --- | --- | --- |\n";
  for (const auto& p : j.at("problems")) {
    std::string answer = p.at("answer_correct").is_null()
                             ? "-"
                             : p.at("answer_correct").get<std::string>();
    std::string error =
        p.at("error").is_null() ? "" : p.at("error").get<std::string>();
    md += "| " + p.at("id").get<std::string>() + " | " +
          p.at("style").get<std::string>() + " | " +
          (p.at("solved").get<bool>() ? "yes" : "no") + " | " + answer +
          " | " + error + " |\n";
  }

  if (!j.at("excluded").empty()) {
    md += "\n## Excluded\n\n| File | Reason |\n| --- | --- |\n";
    for (const auto& e : j.at("excluded"))
      md += "| " + e.at("file").get<std::string>() + " | " +
            e.at("message").get<std::string>() + " |\n";
  }
  return md;
}

inline std::string emit_report(const RunReport& report, ReportFormat format) {
  ordered_json j = to_json(report);
  if (format == ReportFormat::json) return j.dump(2) + "\n";
  return markdown_from_json(j);
}

// Deterministic echo of the knobs that shaped a run; secrets stay in the
// environment (only the variable names are recorded).
inline ordered_json config_to_json(const RunConfig& config) {
  auto backend_json = [](const BackendConfig& b) {
    return ordered_json{
        {"kind", b.kind == BackendKind::remote ? "remote" : "scripted"},
        {"endpoint", b.endpoint},
        {"model_id", b.model_id},
        {"auth_env_var", b.auth_env_var},
        {"script_path", b.script_path},
        {"request_timeout_s",
         static_cast<int>(b.request_timeout.count() / 1000)},
        {"max_retries", b.max_retries}};
  };
  ordered_json j;
  j["benchmark"] = {{"root", config.benchmark_root.string()},
                    {"name", config.manifest.name},
                    {"total_count", config.manifest.total_count},
                    {"hard_mode_count", config.manifest.hard_mode_count}};
  j["strategy"] = to_string(config.strategy);
  j["discovery"] = {{"agent_enabled", config.discovery.agent_enabled},
                    {"max_sv_iterations", config.discovery.max_sv_iterations},
                    {"rewrite_retries", config.discovery.rewrite_retries},
                    {"temperature", config.discovery.temperature},
                    {"max_tokens", config.discovery.max_tokens}};
  j["prove"] = {{"n_samples", config.prove.n_samples},
                {"temperature", config.prove.temperature},
                {"max_tokens", config.prove.max_tokens},
                {"per_sample_timeout_s",
                 static_cast<int>(config.prove.per_sample_timeout.count() /
                                  1000)}};
  j["backends"] = {
      {"discovery", backend_json(config.discovery_backend)},
      {"prover", backend_json(config.prover_backend)},
      {"verifier",
       {{"kind",
         config.verifier.kind == VerifierKind::remote ? "remote" : "mock"},
        {"endpoint", config.verifier.endpoint},
        {"rules_path", config.verifier.rules_path},
        {"toolchain_tag", config.verifier.toolchain_tag},
        {"max_concurrent", config.verifier.max_concurrent},
        {"default_timeout_s",
         static_cast<int>(config.verifier.default_timeout.count() / 1000)}}}};
  j["parallelism"] = config.parallelism;
  j["seed"] = config.seed;
  return j;
}

// Run the configured strategy over the whole benchmark. Per-problem failures
// are captured in the records; only unusable configuration at startup aborts.
inline RunReport run_pipeline(const RunConfig& config) {
  require(config.parallelism >= 1, Errc::precondition,
          "parallelism must be >= 1");
  auto start = std::chrono::steady_clock::now();

  Verifier verifier(config.verifier);
  if (config.verifier.kind == VerifierKind::remote && !verifier.health_check())
    throw Error(Errc::aborted_run, "verifier failed its health check");

  std::unique_ptr<Backend> discovery_backend;
  std::unique_ptr<Backend> prover_backend;
  try {
    discovery_backend = make_backend(config.discovery_backend);
    prover_backend = make_backend(config.prover_backend);
  } catch (const Error& e) {
    throw Error(Errc::aborted_run, std::string("backend setup failed: ") +
                                       e.what());
  }

  LoadResult loaded = load_benchmark(config.benchmark_root, config.manifest);
  const auto& problems = loaded.problems;

  // The seed shuffles only the processing order; records are aggregated by
  // problem index, so the report is order-invariant (tested).
  std::vector<size_t> schedule(problems.size());
  for (size_t i = 0; i < schedule.size(); ++i) schedule[i] = i;
  std::mt19937_64 rng(config.seed);
  std::shuffle(schedule.begin(), schedule.end(), rng);

  std::vector<ProblemRecord> records(problems.size());
  std::atomic<size_t> cursor{0};
  auto work = [&] {
    size_t slot;
    while ((slot = cursor.fetch_add(1)) < schedule.size()) {
      size_t index = schedule[slot];
      const Problem& problem = problems[index];
      ProblemRecord record;
      record.id = problem.id;
      record.style = problem.style;
      try {
        std::optional<DiscoveryOutcome> outcome;
        record.prove = run_strategy(problem.statement,
                                    problem.natural_language, config.strategy,
                                    config.discovery, config.prove,
                                    *discovery_backend, *prover_backend,
                                    verifier, &outcome);
        record.discovery = std::move(outcome);
      } catch (const std::exception& e) {
        record.error = e.what();
        record.prove.strategy = config.strategy;
      }
      if (problem.ground_truth_answer.has_value() &&
          record.discovery.has_value())
        record.answer_correct =
            judge_answer(record.discovery->answer.expression,
                         *problem.ground_truth_answer);
      auto tag = config.failure_tags.find(problem.id);
      if (tag != config.failure_tags.end()) record.failure_tag = tag->second;
      records[index] = std::move(record);
    }
  };

  size_t workers =
      std::min<size_t>(std::max(1, config.parallelism),
                       std::max<size_t>(1, problems.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  RunReport report;
  report.benchmark = config.manifest.name;
  report.benchmark_total = config.manifest.total_count;
  report.strategy = config.strategy;
  report.per_problem = std::move(records);
  report.excluded = loaded.exclusions;
  for (const auto& record : report.per_problem) {
    if (!record.prove.solved) continue;
    ++report.total_solved;
    if (record.style == ProblemStyle::solution_style)
      ++report.solution_style_solved;
  }
  report.discovery_accuracy = answer_accuracy(report.per_problem, problems);
  report.config_echo = config_to_json(config);
  report.timing_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace dap
