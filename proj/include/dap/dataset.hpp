#pragma once

// Benchmark ingestion. Canonical on-disk layout, one problem per id:
//
//   <root>/<id>.lean         formal statement (required)
//   <root>/<id>.nl.txt       natural-language problem (required)
//   <root>/<id>.answer.txt   ground-truth answer (solution-style only)
//
// plus a manifest file {"name", "total_count", "hard_mode_count"} naming the
// benchmark and pinning how many problems (and how many solution-style ones)
// the directory must contain. Broken files exclude a problem, not the run;
// exclusions are reported and surface in the run report.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dap/errors.hpp"
#include "dap/statement.hpp"
#include "dap/util.hpp"

namespace dap {

struct Problem {
  std::string id;
  std::string benchmark;
  std::string natural_language;
  FormalStatement statement;
  std::optional<std::string> ground_truth_answer;
  ProblemStyle style = ProblemStyle::proof_style;
};

struct BenchmarkManifest {
  std::string name;
  int total_count = 0;
  int hard_mode_count = 0;

  static BenchmarkManifest load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, path.string() + ": " + e.what());
    }
    BenchmarkManifest m;
    try {
      m.name = doc.at("name").get<std::string>();
      m.total_count = doc.at("total_count").get<int>();
      m.hard_mode_count = doc.at("hard_mode_count").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, path.string() + ": " + e.what());
    }
    require(m.hard_mode_count >= 0 && m.hard_mode_count <= m.total_count,
            Errc::parse_error,
            path.string() + ": hard_mode_count must lie in [0, total_count]");
    return m;
  }
};

struct LoadError {
  std::string file;
  std::string message;
};

struct LoadResult {
  std::vector<Problem> problems;   // sorted by id
  std::vector<LoadError> exclusions;
};

// Load every <id>.lean under root. Per-file failures exclude the problem and
// are reported; counts are then checked against the manifest. The style tally
// is only checkable when nothing was excluded.
inline LoadResult load_benchmark(const std::filesystem::path& root,
                                 const BenchmarkManifest& manifest) {
  require(std::filesystem::is_directory(root), Errc::io_error,
          root.string() + " is not a directory");

  std::vector<std::filesystem::path> statement_files;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".lean")
      statement_files.push_back(entry.path());
  std::sort(statement_files.begin(), statement_files.end());

  LoadResult result;
  for (const auto& path : statement_files) {
    const std::string id = path.stem().string();
    try {
      Problem problem;
      problem.id = id;
      problem.benchmark = manifest.name;
      problem.statement = parse_statement(read_text_file(path));
      problem.style = classify_style(problem.statement);

      auto nl_path = root / (id + ".nl.txt");
      require(std::filesystem::exists(nl_path), Errc::io_error,
              "missing natural-language file " + nl_path.filename().string());
      problem.natural_language = trim(read_text_file(nl_path));
      require(!problem.natural_language.empty(), Errc::io_error,
              nl_path.filename().string() + " is empty");

      auto answer_path = root / (id + ".answer.txt");
      if (std::filesystem::exists(answer_path)) {
        require(problem.style == ProblemStyle::solution_style,
                Errc::malformed_declaration,
                "proof-style problem carries a ground-truth answer file");
        problem.ground_truth_answer = trim(read_text_file(answer_path));
      }

      result.problems.push_back(std::move(problem));
    } catch (const Error& e) {
      result.exclusions.push_back({path.filename().string(), e.what()});
    }
  }

  std::sort(result.problems.begin(), result.problems.end(),
            [](const Problem& a, const Problem& b) { return a.id < b.id; });

  const int discovered = static_cast<int>(result.problems.size() +
                                          result.exclusions.size());
  if (discovered != manifest.total_count) {
    int solution = 0;
    for (const auto& p : result.problems)
      if (p.style == ProblemStyle::solution_style) ++solution;
    throw Error(Errc::manifest_mismatch,
                manifest.name + ": found " + std::to_string(discovered) +
                    " problems, manifest says " +
                    std::to_string(manifest.total_count) + " (" +
                    std::to_string(solution) + " solution-style, " +
                    std::to_string(result.problems.size() - solution) +
                    " proof-style loaded)");
  }
  if (result.exclusions.empty()) {
    int solution = 0;
    for (const auto& p : result.problems)
      if (p.style == ProblemStyle::solution_style) ++solution;
    if (solution != manifest.hard_mode_count)
      throw Error(Errc::manifest_mismatch,
                  manifest.name + ": " + std::to_string(solution) +
                      " solution-style problems, manifest says " +
                      std::to_string(manifest.hard_mode_count) + " (" +
                      std::to_string(result.problems.size() - solution) +
                      " proof-style)");
  }
  return result;
}

inline std::pair<std::vector<Problem>, std::vector<Problem>> split_by_style(
    const std::vector<Problem>& problems) {
  std::pair<std::vector<Problem>, std::vector<Problem>> out;
  for (const auto& p : problems)
    (p.style == ProblemStyle::solution_style ? out.first : out.second)
        .push_back(p);
  return out;
}

}  // namespace dap
