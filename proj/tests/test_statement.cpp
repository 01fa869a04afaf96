#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dap/statement.hpp"
#include "dap/util.hpp"
#include "support/test_paths.hpp"

using namespace dap;
namespace fs = std::filesystem;

namespace {

FormalStatement load_fixture(const fs::path& path) {
  return parse_statement(read_text_file(path));
}

FormalStatement corpus_stmt(const std::string& id) {
  return load_fixture(corpus_dir() / (id + ".lean"));
}

// Answer whose type matches the first answer abbrev of the statement.
AnswerExpression answer_for(const FormalStatement& stmt,
                            const std::string& expr) {
  const Placeholder* hole = stmt.first_answer_hole();
  REQUIRE(hole != nullptr);
  const Declaration* owner = stmt.declaration_at(hole->span.begin);
  REQUIRE(owner != nullptr);
  return AnswerExpression{expr, owner->declared_type};
}

std::vector<fs::path> corpus_files() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(corpus_dir()))
    if (entry.path().extension() == ".lean") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_CASE("parse locates and classifies both holes of the two-hole shape") {
  auto stmt = corpus_stmt("mathd_algebra_320");
  REQUIRE(stmt.placeholders().size() == 2);
  CHECK(stmt.placeholders()[0].kind == HoleKind::answer_hole);
  CHECK(stmt.placeholders()[0].owner == "mathd_algebra_320_solution");
  CHECK(stmt.placeholders()[1].kind == HoleKind::proof_hole);
  CHECK(stmt.placeholders()[1].owner == "mathd_algebra_320");

  const Declaration* abbrev = stmt.declaration_at(
      stmt.placeholders()[0].span.begin);
  REQUIRE(abbrev != nullptr);
  CHECK(abbrev->kind == DeclKind::answer_abbrev);
  CHECK(abbrev->declared_type == "ℕ");
}

TEST_CASE("parse rejects a source without any placeholder token") {
  auto source = read_text_file(edge_dir() / "add_comm_example.lean");
  try {
    parse_statement(source);
    FAIL("expected NoPlaceholder");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_placeholder);
  }
}

TEST_CASE("parse rejects a placeholder outside abbrev/theorem declarations") {
  auto source = read_text_file(edge_dir() / "stray_sorry.lean");
  try {
    parse_statement(source);
    FAIL("expected MalformedDeclaration");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_declaration);
  }
}

TEST_CASE("filled abbrev plus open proof parses to a single proof hole") {
  // Oracle: construct the fixture by substitution, then re-parse it.
  auto hard = corpus_stmt("mathd_algebra_320");
  auto filled = substitute_answer(hard, answer_for(hard, "26"));
  auto reparsed = parse_statement(filled.raw_source());
  CHECK(reparsed.answer_hole_count() == 0);
  CHECK(reparsed.proof_hole_count() == 1);
  CHECK(classify_style(reparsed) == ProblemStyle::proof_style);
}

TEST_CASE("style classification") {
  CHECK(classify_style(corpus_stmt("mathd_algebra_320")) ==
        ProblemStyle::solution_style);
  CHECK(classify_style(corpus_stmt("imo_1959_p1")) ==
        ProblemStyle::proof_style);

  // Multi-answer statement: brute-force oracle is "any answer hole present".
  auto multi = load_fixture(edge_dir() / "comb_pair.lean");
  CHECK(multi.answer_hole_count() == 2);
  bool any_answer = false;
  for (const auto& p : multi.placeholders())
    any_answer |= p.kind == HoleKind::answer_hole;
  CHECK(any_answer);
  CHECK(classify_style(multi) == ProblemStyle::solution_style);
}

TEST_CASE("substitute_answer fills exactly the first answer hole") {
  auto hard = corpus_stmt("mathd_algebra_320");
  auto filled = substitute_answer(hard, answer_for(hard, "26"));
  CHECK(filled.raw_source().find(":= 26") != std::string::npos);
  CHECK(filled.answer_hole_count() == 0);
  CHECK(filled.proof_hole_count() == 1);

  SECTION("no answer hole left") {
    try {
      substitute_answer(filled, AnswerExpression{"1", "ℕ"});
      FAIL("expected NoAnswerHole");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::no_answer_hole);
    }
  }

  SECTION("textual type mismatch is rejected") {
    try {
      substitute_answer(hard, AnswerExpression{"26", "ℤ"});
      FAIL("expected TypeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::type_mismatch);
    }
  }

  SECTION("type comparison ignores whitespace") {
    auto fe = corpus_stmt("fe_cauchy");
    auto out = substitute_answer(fe, AnswerExpression{"fun x => x", "ℝ→ℝ"});
    CHECK(out.answer_hole_count() == 0);
  }
}

TEST_CASE("substitute_answer fills multiple holes in source order") {
  auto multi = load_fixture(edge_dir() / "comb_pair.lean");
  size_t before = multi.answer_hole_count();
  auto once = substitute_answer(multi, answer_for(multi, "0"));
  CHECK(once.answer_hole_count() == before - 1);
  CHECK(once.proof_hole_count() == multi.proof_hole_count());
  // The remaining hole belongs to the second abbrev.
  REQUIRE(once.first_answer_hole() != nullptr);
  CHECK(once.first_answer_hole()->owner == "comb_pair_second_solution");
}

TEST_CASE("inline_rewrite deletes the abbrev and splices the value") {
  auto hard = corpus_stmt("mathd_algebra_320");
  auto easy = inline_rewrite(hard, answer_for(hard, "26"));
  CHECK(easy.raw_source().find("a + b + c = (26 : ℕ)") != std::string::npos);
  CHECK(easy.placeholders().size() == 1);
  CHECK(easy.placeholders().front().kind == HoleKind::proof_hole);
  CHECK(easy.raw_source().find("mathd_algebra_320_solution") ==
        std::string::npos);
  CHECK(easy.answer_abbrev_names().empty());
}

TEST_CASE("inline_rewrite on a proof-style statement fails") {
  auto stmt = corpus_stmt("imo_1959_p1");
  try {
    inline_rewrite(stmt, AnswerExpression{"1", "ℕ"});
    FAIL("expected NoAnswerHole");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_answer_hole);
  }
}

TEST_CASE("inline_rewrite replaces every reference inside the theorem") {
  auto stmt = corpus_stmt("comb_grid_paths");
  auto easy = inline_rewrite(stmt, answer_for(stmt, "70"));
  // Oracle: plain textual scan for residual references.
  CHECK(easy.raw_source().find("comb_grid_paths_solution") ==
        std::string::npos);
  CHECK(easy.raw_source().find("(70 : ℕ)") != std::string::npos);
}

TEST_CASE("inline_rewrite refuses when the name hides in a comment") {
  auto stmt = load_fixture(edge_dir() / "tricky_ref.lean");
  try {
    inline_rewrite(stmt, answer_for(stmt, "2"));
    FAIL("expected NameCollision");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::name_collision);
  }
}

TEST_CASE("validate_rewrite gates the Easy Mode shape") {
  auto hard = corpus_stmt("mathd_algebra_320");

  SECTION("inline output passes") {
    auto easy = inline_rewrite(hard, answer_for(hard, "26"));
    auto v = validate_rewrite(hard, easy.raw_source());
    CHECK(v.pass);
    CHECK(v.violations.empty());
  }

  SECTION("leaking the abbrev name fails") {
    auto v = validate_rewrite(hard, hard.raw_source());
    CHECK_FALSE(v.pass);
    bool exposed = false;
    for (const auto& m : v.violations)
      exposed |= m.find("answer name exposed") != std::string::npos;
    CHECK(exposed);
  }

  SECTION("two placeholders fail") {
    auto easy = inline_rewrite(hard, answer_for(hard, "26"));
    std::string two = easy.raw_source() +
                      "\ntheorem extra_goal : 1 = 1 := by\n  sorry\n";
    auto v = validate_rewrite(hard, two);
    CHECK_FALSE(v.pass);
    bool counted = false;
    for (const auto& m : v.violations)
      counted |= m.find("placeholder count 2 != 1") != std::string::npos;
    CHECK(counted);
  }

  SECTION("renamed theorem fails") {
    auto easy = inline_rewrite(hard, answer_for(hard, "26"));
    std::string renamed = easy.raw_source();
    auto pos = renamed.find("theorem mathd_algebra_320");
    REQUIRE(pos != std::string::npos);
    renamed.replace(pos, std::string("theorem mathd_algebra_320").size(),
                    "theorem renamed_320");
    auto v = validate_rewrite(hard, renamed);
    CHECK_FALSE(v.pass);
    bool flagged = false;
    for (const auto& m : v.violations)
      flagged |= m.find("theorem name not preserved") != std::string::npos;
    CHECK(flagged);
  }

  SECTION("unparseable rewrite fails with a parse violation") {
    auto v = validate_rewrite(hard, "theorem broken : 1 = 1 := by\n  rfl\n");
    CHECK_FALSE(v.pass);
    bool parse_violation = false;
    for (const auto& m : v.violations)
      parse_violation |= m.find("does not parse") != std::string::npos;
    CHECK(parse_violation);
  }
}

TEST_CASE("corpus round-trips byte-identically and classifies as expected") {
  auto expected = nlohmann::json::parse(
      read_text_file(corpus_dir() / "expected.json"));
  size_t checked = 0;
  for (const auto& path : corpus_files()) {
    INFO(path.filename().string());
    std::string raw = read_text_file(path);
    auto stmt = parse_statement(raw);
    CHECK(stmt.reconstruct() == raw);

    auto exp = expected.at(path.stem().string());
    CHECK(std::string(to_string(classify_style(stmt))) ==
          exp.at("style").get<std::string>());
    CHECK(stmt.answer_hole_count() == exp.at("answer_holes").get<size_t>());
    CHECK(stmt.proof_hole_count() == exp.at("proof_holes").get<size_t>());
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("hole monotonicity: substitution removes one answer hole") {
  for (const auto& path : corpus_files()) {
    auto stmt = parse_statement(read_text_file(path));
    if (classify_style(stmt) != ProblemStyle::solution_style) continue;
    INFO(path.filename().string());
    auto out = substitute_answer(stmt, answer_for(stmt, "0"));
    CHECK(out.answer_hole_count() == stmt.answer_hole_count() - 1);
    CHECK(out.proof_hole_count() == stmt.proof_hole_count());
  }
}

TEST_CASE("answer hiding: inline_rewrite always validates") {
  const std::vector<std::string> answers = {
      "26", "0", "-1", "fun n => n + 1", "{p | p.1 = p.2}"};
  for (const auto& path : corpus_files()) {
    auto stmt = parse_statement(read_text_file(path));
    if (classify_style(stmt) != ProblemStyle::solution_style) continue;
    for (const auto& expr : answers) {
      INFO(path.filename().string() + " with " + expr);
      auto easy = inline_rewrite(stmt, answer_for(stmt, expr));
      auto v = validate_rewrite(stmt, easy.raw_source());
      CHECK(v.pass);
    }
  }
}

TEST_CASE("classification flips only when the last answer hole is filled") {
  auto stmt = load_fixture(edge_dir() / "comb_pair.lean");
  REQUIRE(stmt.answer_hole_count() == 2);
  auto once = substitute_answer(stmt, answer_for(stmt, "3"));
  CHECK(classify_style(once) == ProblemStyle::solution_style);
  auto twice = substitute_answer(once, answer_for(once, "7"));
  CHECK(classify_style(twice) == ProblemStyle::proof_style);
}
