#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dap/proving.hpp"
#include "dap/util.hpp"
#include "support/test_paths.hpp"

using namespace dap;
namespace fs = std::filesystem;

namespace {

struct ScriptSpec {
  std::string matcher;
  std::vector<std::string> responses;
};

// Render rule files in the scripted-fixture format at test setup.
fs::path write_script(const std::string& name,
                      const std::vector<ScriptSpec>& rules) {
  std::string text;
  for (const auto& rule : rules) {
    text += "rule substring " + rule.matcher + "\n";
    for (const auto& response : rule.responses) {
      text += "response <<EOF_RESPONSE\n";
      text += response;
      if (!response.empty() && response.back() != '\n') text += "\n";
      text += "EOF_RESPONSE\n";
    }
  }
  auto path = fs::temp_directory_path() / name;
  write_text_file(path, text);
  return path;
}

Verifier mock_verifier(const std::vector<std::string>& passing_sources,
                       const std::string& name, int max_concurrent = 1) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& source : passing_sources)
    rules.push_back(
        {{"source_hash", fnv1a64_hex(source)}, {"status", "passed"}});
  auto path = fs::temp_directory_path() / name;
  write_text_file(path, rules.dump(2));
  VerifierConfig cfg;
  cfg.rules_path = path.string();
  cfg.max_concurrent = max_concurrent;
  return Verifier(cfg);
}

FormalStatement corpus_stmt(const std::string& id) {
  return parse_statement(read_text_file(corpus_dir() / (id + ".lean")));
}

const std::string kEasyQuickSum =
    "theorem quick_sum : 2 + 3 = (5 : ℕ) := sorry\n";

const std::string kGoodProofBlock =
    "theorem quick_sum : 2 + 3 = (5 : ℕ) := by\n  norm_num";

std::string fenced(const std::string& body) {
  return "```lean\n" + body + "\n```";
}

ProveConfig small_prove(int n) {
  ProveConfig cfg;
  cfg.n_samples = n;
  return cfg;
}

}  // namespace

TEST_CASE("spurious screen flags the reflexive statement-copy pattern") {
  auto original = corpus_stmt("fimo_2009_algebra_p3");
  auto candidate = read_text_file(edge_dir() / "spurious_candidate.lean");
  auto flags = detect_spurious(original, candidate);
  CHECK(std::count(flags.begin(), flags.end(), kFlagStatementCopyFill) == 1);
  CHECK(std::count(flags.begin(), flags.end(), kFlagTrivialReflClose) == 1);
}

TEST_CASE("spurious screen passes an honest proof") {
  auto original = corpus_stmt("mathd_algebra_320");
  auto candidate = read_text_file(edge_dir() / "honest_candidate.lean");
  CHECK(detect_spurious(original, candidate).empty());
}

TEST_CASE("spurious screen flags answer names used inside proof bodies") {
  auto original = corpus_stmt("fimo_2009_algebra_p3");
  std::string candidate =
      "abbrev fimo_2009_algebra_p3_solution : Set (ℕ → ℕ) := {f | True}\n"
      "\n"
      "theorem fimo_2009_algebra_p3\n"
      "    : fimo_2009_algebra_p3_solution = {f : ℕ → ℕ | ∀ n : ℕ, f (f n) = "
      "n ∧ f n ≤ n + 1} := by\n"
      "  simp [fimo_2009_algebra_p3_solution]\n";
  auto flags = detect_spurious(original, candidate);
  CHECK(std::count(flags.begin(), flags.end(), kFlagAnswerNameInProof) == 1);
}

TEST_CASE("spurious screen ignores empty candidates") {
  auto original = corpus_stmt("fimo_2009_algebra_p3");
  CHECK(detect_spurious(original, "").empty());
}

TEST_CASE("prove_easy finds a valid proof among samples and skips the rest") {
  auto easy = parse_statement(kEasyQuickSum);
  auto script = write_script(
      "dap_prover_mixed.txt",
      {{"quick_sum", {fenced("theorem quick_sum : 2 + 3 = (5 : ℕ) := by\n  "
                             "bogus_tactic"),
                      fenced(kGoodProofBlock),
                      fenced("theorem quick_sum : 2 + 3 = (5 : ℕ) := by\n  "
                             "another_bogus")}}});
  auto prover = ScriptedBackend::from_file(script);
  auto verifier = mock_verifier({extract_code_block(fenced(kGoodProofBlock))},
                                "dap_ver_mixed.json");

  auto result = prove_easy(easy, small_prove(3), prover, verifier);
  CHECK(result.solved);
  REQUIRE(result.first_success_index.has_value());
  CHECK(*result.first_success_index == 1);
  REQUIRE(result.attempts.size() == 3);
  CHECK(result.attempts[0].verification->status ==
        VerifyStatus::compilation_error);
  CHECK(result.attempts[1].success());
  CHECK(result.attempts[2].skipped());

  // Pass@k equivalence: solved matches a brute-force any() over attempts.
  bool brute = false;
  for (const auto& a : result.attempts) brute = brute || a.success();
  CHECK(result.solved == brute);
}

TEST_CASE("prove_easy with a single failing sample is unsolved") {
  auto easy = parse_statement(kEasyQuickSum);
  auto script = write_script(
      "dap_prover_bad.txt",
      {{"quick_sum", {fenced("theorem quick_sum : 2 + 3 = (5 : ℕ) := by\n  "
                             "bogus")}}});
  auto prover = ScriptedBackend::from_file(script);
  auto verifier = mock_verifier({}, "dap_ver_empty.json");
  auto result = prove_easy(easy, small_prove(1), prover, verifier);
  CHECK_FALSE(result.solved);
  CHECK_FALSE(result.first_success_index.has_value());
  REQUIRE(result.attempts.size() == 1);
  CHECK_FALSE(result.attempts[0].skipped());
}

TEST_CASE("prove_easy rejects statements that are not Easy Mode") {
  auto hard = corpus_stmt("mathd_algebra_320");
  auto script = write_script("dap_prover_unused.txt", {{"x", {"y"}}});
  auto prover = ScriptedBackend::from_file(script);
  auto verifier = mock_verifier({}, "dap_ver_unused.json");
  try {
    prove_easy(hard, small_prove(1), prover, verifier);
    FAIL("expected precondition failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::precondition);
  }
}

TEST_CASE("a verified but flagged pass does not count as solved") {
  auto hard = corpus_stmt("fimo_2009_algebra_p3");
  auto spurious = read_text_file(edge_dir() / "spurious_candidate.lean");
  auto script =
      write_script("dap_prover_spurious.txt",
                   {{"fimo_2009_algebra_p3", {fenced(spurious)}}});
  auto prover = ScriptedBackend::from_file(script);
  auto verifier = mock_verifier({extract_code_block(fenced(spurious))},
                                "dap_ver_spurious.json");

  auto result = run_strategy(hard, "the fimo functional equation problem",
                             RewritingStrategy::no_rewriting,
                             DiscoveryConfig{}, small_prove(1), prover,
                             prover, verifier);
  CHECK_FALSE(result.solved);
  REQUIRE(result.attempts.size() == 1);
  REQUIRE(result.attempts[0].verification.has_value());
  CHECK(result.attempts[0].verification->status == VerifyStatus::passed);
  CHECK_FALSE(result.attempts[0].spurious_flags.empty());
}

TEST_CASE("proposed strategy hides the answer abbrev from the prover") {
  auto hard = corpus_stmt("quick_sum");
  auto discovery = ScriptedBackend::from_file(fixtures_dir() / "discovery" /
                                              "rewrite_quick_sum.txt");
  auto prover_script = write_script(
      "dap_prover_proposed.txt", {{"quick_sum", {fenced(kGoodProofBlock)}}});
  auto prover = ScriptedBackend::from_file(prover_script);
  auto verifier = mock_verifier({extract_code_block(fenced(kGoodProofBlock))},
                                "dap_ver_proposed.json");

  std::optional<DiscoveryOutcome> outcome;
  auto result = run_strategy(hard, "quick_sum_nl problem",
                             RewritingStrategy::proposed, DiscoveryConfig{},
                             small_prove(1), discovery, prover, verifier,
                             &outcome);
  CHECK(result.solved);
  CHECK(result.prover_prompt.find("quick_sum_solution") == std::string::npos);
  REQUIRE(outcome.has_value());
  CHECK(outcome->answer.expression == "5");
}

TEST_CASE("no_rewriting feeds both holes to the prover verbatim") {
  auto hard = corpus_stmt("quick_sum");
  auto script = write_script(
      "dap_prover_norw.txt",
      {{"quick_sum", {fenced("abbrev quick_sum_solution : ℕ := 5\n\ntheorem "
                             "quick_sum : 2 + 3 = quick_sum_solution := by\n  "
                             "norm_num [quick_sum_solution]")}}});
  auto prover = ScriptedBackend::from_file(script);
  auto verifier = mock_verifier({}, "dap_ver_norw.json");

  auto result = run_strategy(hard, "quick_sum_nl problem",
                             RewritingStrategy::no_rewriting,
                             DiscoveryConfig{}, small_prove(1), prover,
                             prover, verifier);
  CHECK(result.prover_prompt.find(hard.raw_source()) != std::string::npos);
  CHECK(result.prover_prompt.find("quick_sum_solution : ℕ := sorry") !=
        std::string::npos);
  // The candidate references the abbrev name in its proof body: quarantined.
  REQUIRE(result.attempts.size() == 1);
  CHECK_FALSE(result.attempts[0].spurious_flags.empty());
}

TEST_CASE("straight rewriting validates the combined output") {
  auto hard = corpus_stmt("quick_sum");
  auto prover_script = write_script(
      "dap_prover_straight.txt", {{"quick_sum", {fenced(kGoodProofBlock)}}});
  auto prover = ScriptedBackend::from_file(prover_script);
  auto verifier = mock_verifier({extract_code_block(fenced(kGoodProofBlock))},
                                "dap_ver_straight.json");

  SECTION("a valid single-step rewrite reaches the prover") {
    auto discovery_script = write_script(
        "dap_straight_ok.txt",
        {{"Hard statement:", {fenced(trim(kEasyQuickSum))}}});
    auto discovery = ScriptedBackend::from_file(discovery_script);
    auto result = run_strategy(hard, "quick_sum_nl problem",
                               RewritingStrategy::straight_rewriting,
                               DiscoveryConfig{}, small_prove(1), discovery,
                               prover, verifier);
    CHECK(result.solved);
    CHECK(result.strategy == RewritingStrategy::straight_rewriting);
    CHECK(result.prover_prompt.find("quick_sum_solution") ==
          std::string::npos);
  }

  SECTION("an invalid single-step rewrite yields an unsolved result") {
    auto discovery_script = write_script(
        "dap_straight_bad.txt",
        {{"Hard statement:", {fenced(hard.raw_source())}}});
    auto discovery = ScriptedBackend::from_file(discovery_script);
    auto result = run_strategy(hard, "quick_sum_nl problem",
                               RewritingStrategy::straight_rewriting,
                               DiscoveryConfig{}, small_prove(1), discovery,
                               prover, verifier);
    CHECK_FALSE(result.solved);
    CHECK(result.attempts.empty());
  }
}

TEST_CASE("proof-style problems bypass discovery under every strategy") {
  auto stmt = corpus_stmt("imo_1959_p1");
  auto prover_script = write_script(
      "dap_prover_proof_style.txt",
      {{"imo_1959_p1", {fenced("theorem imo_1959_p1\n    (n : ℕ)\n    (h_n : "
                               "0 < n)\n    : Nat.gcd (21 * n + 4) (14 * n + "
                               "3) = 1 := by\n  omega")}}});
  auto prover = ScriptedBackend::from_file(prover_script);
  // A discovery backend with no rules: touching it would throw.
  auto empty_script = write_script("dap_discovery_empty.txt", {});
  auto discovery = ScriptedBackend::from_file(empty_script);
  auto verifier = mock_verifier({}, "dap_ver_proof_style.json");

  std::vector<std::string> prompts;
  for (auto strategy :
       {RewritingStrategy::no_rewriting, RewritingStrategy::straight_rewriting,
        RewritingStrategy::proposed}) {
    auto result =
        run_strategy(stmt, "gcd problem", strategy, DiscoveryConfig{},
                     small_prove(1), discovery, prover, verifier);
    prompts.push_back(result.prover_prompt);
  }
  CHECK(prompts[0] == prompts[1]);
  CHECK(prompts[1] == prompts[2]);
}
