#pragma once

// Prompt templates and the text plumbing around model responses.
//
// Templates are plain text with named slots ({problem}, {statement}, {trace},
// {report}) substituted in a single pass; braces that do not spell a known
// slot pass through untouched, so Lean code inside a slot value is never
// re-expanded. Defaults ship in-code; a directory of <name>.txt files can
// override any of them.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "dap/util.hpp"

namespace dap {

struct PromptTemplates {
  std::string generation;
  std::string verification;
  std::string correction;
  std::string rewriting;
  std::string straight_rewriting;
  std::string prover;

  static const PromptTemplates& defaults();

  // Overrides read from <dir>/{generation,verification,correction,rewriting,
  // straight_rewriting,prover}.txt; missing files keep the default text.
  static PromptTemplates load_dir(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    auto maybe = [&](const char* name, std::string& slot) {
      auto path = dir / (std::string(name) + ".txt");
      if (std::filesystem::exists(path)) slot = read_text_file(path);
    };
    maybe("generation", t.generation);
    maybe("verification", t.verification);
    maybe("correction", t.correction);
    maybe("rewriting", t.rewriting);
    maybe("straight_rewriting", t.straight_rewriting);
    maybe("prover", t.prover);
    return t;
  }
};

inline std::string expand_template(
    std::string_view tpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tpl.size());
  size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      size_t close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string name(tpl.substr(i + 1, close - i - 1));
        auto it = slots.find(name);
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

// The answer marker the generation and correction templates mandate. The last
// marker in a response wins, so a model may restate its answer.
inline constexpr std::string_view kAnswerMarker = "FINAL ANSWER:";

inline std::optional<std::string> extract_final_answer(
    std::string_view response) {
  size_t pos = response.rfind(kAnswerMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  size_t start = pos + kAnswerMarker.size();
  size_t eol = response.find('\n', start);
  if (eol == std::string_view::npos) eol = response.size();
  std::string answer = trim(response.substr(start, eol - start));
  if (answer.empty()) return std::nullopt;
  return answer;
}

// Pull the last complete fenced code block out of a response; a fenceless
// response is used whole. Result is trimmed and newline-terminated so that
// verification sources hash stably.
inline std::string extract_code_block(std::string_view response) {
  std::vector<std::pair<size_t, size_t>> blocks;
  size_t pos = 0;
  std::optional<size_t> open;
  while (pos <= response.size()) {
    size_t line_end = response.find('\n', pos);
    if (line_end == std::string_view::npos) line_end = response.size();
    std::string_view line = trim_view(response.substr(pos, line_end - pos));
    if (line.substr(0, 3) == "```") {
      if (!open.has_value()) {
        open = line_end == response.size() ? response.size() : line_end + 1;
      } else {
        blocks.emplace_back(*open, pos);
        open.reset();
      }
    }
    if (line_end == response.size()) break;
    pos = line_end + 1;
  }
  std::string_view body = response;
  if (!blocks.empty())
    body = response.substr(blocks.back().first,
                           blocks.back().second - blocks.back().first);
  std::string out(rtrim_view(body));
  size_t skip = 0;
  while (skip < out.size() && (out[skip] == '\n' || out[skip] == '\r')) ++skip;
  out.erase(0, skip);
  out.push_back('\n');
  return out;
}

inline const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = [] {
    PromptTemplates d;
    d.generation =
        "You are an expert competition mathematician. Solve the problem "
        "below.\n"
        "Reason step by step and justify every deduction.\n"
        "End your reply with exactly one line of the form\n"
        "FINAL ANSWER: <closed-form answer>\n"
        "where the answer is a Lean 4 expression (a numeral, a set, or a "
        "function) with no commentary on that line.\n"
        "\n"
        "Problem:\n"
        "{problem}\n";
    d.verification =
        "You are auditing a proposed solution to a mathematics problem.\n"
        "Check every step for logical gaps, misused hypotheses, and "
        "arithmetic slips.\n"
        "If the reasoning and the final answer are sound, reply with the "
        "single line\n"
        "NO ERRORS FOUND\n"
        "Otherwise report each defect on its own line, exactly as\n"
        "ERROR: <location> | <critical|major|minor> | <description>\n"
        "\n"
        "Problem:\n"
        "{problem}\n"
        "\n"
        "Candidate solution:\n"
        "{trace}\n";
    d.correction =
        "A reviewer found defects in the solution below. Write a corrected "
        "solution that addresses every finding, reasoning step by step.\n"
        "End your reply with exactly one line of the form\n"
        "FINAL ANSWER: <closed-form answer>\n"
        "\n"
        "Problem:\n"
        "{problem}\n"
        "\n"
        "Previous solution:\n"
        "{trace}\n"
        "\n"
        "Error report:\n"
        "{report}\n";
    d.rewriting =
        "Rewrite the Lean 4 statement below so the answer definition "
        "disappears: delete the answer abbrev and substitute the final "
        "answer from the reasoning for every use of its name. Keep the "
        "theorem name, hypotheses, and goal structure unchanged. The result "
        "must contain exactly one `sorry`, the proof body. Reply with a "
        "single Lean 4 code block.\n"
        "\n"
        "Problem:\n"
        "{problem}\n"
        "\n"
        "Hard statement:\n"
        "```lean\n"
        "{statement}\n"
        "```\n"
        "\n"
        "Reasoning:\n"
        "{trace}\n";
    d.straight_rewriting =
        "Solve the problem below and rewrite the Lean 4 statement in one "
        "step: determine the answer yourself, delete the answer abbrev, and "
        "substitute the answer for every use of its name. Keep the theorem "
        "name and hypotheses unchanged. The result must contain exactly one "
        "`sorry`, the proof body. Reply with a single Lean 4 code block.\n"
        "\n"
        "Problem:\n"
        "{problem}\n"
        "\n"
        "Hard statement:\n"
        "```lean\n"
        "{statement}\n"
        "```\n";
    d.prover =
        "Complete the following Lean 4 theorem by replacing the final "
        "`sorry` with a full proof. Reply with a single Lean 4 code block "
        "containing the complete file.\n"
        "\n"
        "```lean\n"
        "{statement}\n"
        "```\n";
    return d;
  }();
  return t;
}

}  // namespace dap
