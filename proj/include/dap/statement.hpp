#pragma once

// Formal statement model: a lossless, token-level parse of Lean-style
// sources into declarations and placeholder holes, plus the rewriting
// operations that turn a two-hole statement into a single-hole one.
//
// Parsing is deliberately shallow. Placeholder detection is a word-boundary
// token scan with comments and string literals masked out; no elaboration or
// type inference happens here. Benchmark statements follow a fixed skeleton
// (an answer `abbrev` ending in `sorry` plus a `theorem` whose proof is
// `sorry`) and the scanner only needs to be faithful to that shape.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dap/errors.hpp"
#include "dap/util.hpp"

namespace dap {

inline constexpr std::string_view kPlaceholderToken = "sorry";

struct SourceSpan {
  size_t begin = 0;
  size_t end = 0;  // half-open byte range

  size_t size() const { return end - begin; }
  bool empty() const { return begin >= end; }
  bool contains(size_t pos) const { return pos >= begin && pos < end; }
};

enum class DeclKind { answer_abbrev, theorem, other };
enum class HoleKind { answer_hole, proof_hole };
enum class ProblemStyle { solution_style, proof_style };

inline const char* to_string(DeclKind k) {
  switch (k) {
    case DeclKind::answer_abbrev: return "answer_abbrev";
    case DeclKind::theorem: return "theorem";
    case DeclKind::other: return "other";
  }
  return "?";
}

inline const char* to_string(HoleKind k) {
  return k == HoleKind::answer_hole ? "answer_hole" : "proof_hole";
}

inline const char* to_string(ProblemStyle s) {
  return s == ProblemStyle::solution_style ? "solution_style" : "proof_style";
}

struct Declaration {
  DeclKind kind = DeclKind::other;
  std::string name;           // empty for unnamed declarations
  std::string declared_type;  // abbrev result type, verbatim (trimmed)
  SourceSpan span;            // full extent, including trailing trivia
  SourceSpan body_span;       // text after the top-level ":=", trivia-trimmed
  SourceSpan goal_span;       // theorem goal between ":" and ":=", trimmed
};

struct Placeholder {
  HoleKind kind = HoleKind::proof_hole;
  SourceSpan span;
  std::string owner;  // name of the enclosing declaration
};

// A candidate value for an answer hole. `target_type` must match the owning
// abbrev's declared type textually (whitespace-insensitive); real type
// checking is the verifier's job.
struct AnswerExpression {
  std::string expression;
  std::string target_type;
};

namespace detail {

// Byte classification for the raw source. Token scans look only at code
// bytes; trivia trimming distinguishes comments from string literals.
enum MaskByte : char { kComment = 0, kCode = 1, kString = 2 };

inline std::vector<char> code_mask(std::string_view src) {
  std::vector<char> mask(src.size(), kCode);
  size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (c == '"') {
      mask[i] = kString;
      ++i;
      while (i < src.size()) {
        mask[i] = kString;
        if (src[i] == '\\' && i + 1 < src.size()) {
          mask[i + 1] = kString;
          i += 2;
          continue;
        }
        if (src[i] == '"') {
          ++i;
          break;
        }
        ++i;
      }
      continue;
    }
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
      while (i < src.size() && src[i] != '\n') mask[i++] = kComment;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '-') {
      int depth = 0;
      while (i < src.size()) {
        if (i + 1 < src.size() && src[i] == '/' && src[i + 1] == '-') {
          mask[i] = mask[i + 1] = kComment;
          i += 2;
          ++depth;
          continue;
        }
        if (i + 1 < src.size() && src[i] == '-' && src[i + 1] == '/') {
          mask[i] = mask[i + 1] = kComment;
          i += 2;
          if (--depth == 0) break;
          continue;
        }
        mask[i++] = kComment;
      }
      continue;
    }
    ++i;
  }
  return mask;
}

// Identifier continuation bytes. Any non-ASCII byte counts so that unicode
// identifiers and symbols never produce a false word boundary.
inline bool ident_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '\'' || c >= 0x80;
}

inline bool boundary_before(std::string_view src, size_t pos) {
  return pos == 0 || !ident_char(static_cast<unsigned char>(src[pos - 1]));
}

inline bool boundary_after(std::string_view src, size_t pos) {
  return pos >= src.size() ||
         !ident_char(static_cast<unsigned char>(src[pos]));
}

// Word-boundary occurrences of `word`, anywhere in the text (comments and
// strings included). Used for answer-hiding checks, where even a comment
// leaks the name.
inline std::vector<size_t> find_word(std::string_view src,
                                     std::string_view word) {
  std::vector<size_t> out;
  if (word.empty()) return out;
  size_t pos = 0;
  while ((pos = src.find(word, pos)) != std::string_view::npos) {
    if (boundary_before(src, pos) && boundary_after(src, pos + word.size()))
      out.push_back(pos);
    ++pos;
  }
  return out;
}

// Word-boundary occurrences restricted to code bytes.
inline std::vector<size_t> find_code_token(std::string_view src,
                                           const std::vector<char>& mask,
                                           std::string_view word,
                                           size_t begin = 0,
                                           size_t end = std::string_view::npos) {
  std::vector<size_t> out;
  if (end == std::string_view::npos) end = src.size();
  for (size_t pos : find_word(src, word)) {
    if (pos < begin || pos + word.size() > end) continue;
    bool in_code = true;
    for (size_t i = pos; i < pos + word.size(); ++i)
      if (mask[i] != kCode) {
        in_code = false;
        break;
      }
    if (in_code) out.push_back(pos);
  }
  return out;
}

inline const std::unordered_set<std::string>& decl_keywords() {
  static const std::unordered_set<std::string> kw = {
      "abbrev",    "def",       "theorem",   "lemma",     "example",
      "instance",  "structure", "inductive", "class",     "axiom",
      "opaque",    "import",    "open",      "namespace", "section",
      "end",       "variable",  "variables", "universe",  "universes",
      "set_option", "attribute", "notation",  "macro",     "macro_rules",
      "syntax",    "infix",     "infixl",    "infixr",    "prefix",
      "postfix",   "mutual",    "deriving"};
  return kw;
}

inline const std::unordered_set<std::string>& decl_modifiers() {
  static const std::unordered_set<std::string> kw = {
      "noncomputable", "private", "protected", "partial", "unsafe",
      "scoped",        "local"};
  return kw;
}

inline bool named_kind(std::string_view keyword) {
  return keyword == "abbrev" || keyword == "def" || keyword == "theorem" ||
         keyword == "lemma" || keyword == "structure" ||
         keyword == "inductive" || keyword == "class" ||
         keyword == "axiom" || keyword == "opaque" || keyword == "instance";
}

struct Scanned {
  std::string source;
  std::vector<char> mask;
  std::vector<Declaration> decls;
  std::vector<Placeholder> holes;        // inside abbrev/theorem declarations
  std::vector<SourceSpan> stray_holes;   // placeholder outside those
  size_t preamble_end = 0;               // bytes before the first declaration
};

inline std::string read_ident(std::string_view src, size_t& pos) {
  size_t start = pos;
  while (pos < src.size() && ident_char(static_cast<unsigned char>(src[pos])))
    ++pos;
  return std::string(src.substr(start, pos - start));
}

// Structural scan shared by parse_statement (which additionally demands
// placeholders) and the spurious-proof detector (which must digest complete,
// hole-free proof candidates).
inline Scanned scan_source(std::string source) {
  Scanned s;
  s.source = std::move(source);
  s.mask = code_mask(s.source);
  const std::string_view src = s.source;

  // Locate declaration starts: lines at bracket depth 0 whose first token is
  // a declaration keyword, a modifier, an attribute, or a '#' command.
  std::vector<size_t> starts;
  long depth = 0;
  size_t i = 0;
  while (i < src.size()) {
    size_t line_begin = i;
    size_t eol = src.find('\n', i);
    if (eol == std::string_view::npos) eol = src.size();
    if (depth == 0) {
      size_t t = line_begin;
      while (t < eol && (src[t] == ' ' || src[t] == '\t')) ++t;
      if (t < eol && s.mask[t] == kCode) {
        if (src[t] == '@' && t + 1 < eol && src[t + 1] == '[') {
          starts.push_back(line_begin);
        } else if (src[t] == '#') {
          starts.push_back(line_begin);
        } else if (ident_char(static_cast<unsigned char>(src[t]))) {
          size_t p = t;
          std::string word = read_ident(src, p);
          if (decl_keywords().count(word) || decl_modifiers().count(word))
            starts.push_back(line_begin);
        }
      }
    }
    for (size_t j = line_begin; j < eol; ++j) {
      if (s.mask[j] != kCode) continue;
      char c = src[j];
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') depth = std::max(0L, depth - 1);
    }
    i = eol + 1;
  }

  s.preamble_end = starts.empty() ? src.size() : starts.front();

  for (size_t d = 0; d < starts.size(); ++d) {
    Declaration decl;
    decl.span = {starts[d],
                 d + 1 < starts.size() ? starts[d + 1] : src.size()};

    // Header: skip modifiers and attributes, then read the keyword and name.
    size_t pos = decl.span.begin;
    std::string keyword;
    while (pos < decl.span.end) {
      if (s.mask[pos] != kCode ||
          std::isspace(static_cast<unsigned char>(src[pos]))) {
        ++pos;
        continue;
      }
      if (src[pos] == '@' && pos + 1 < decl.span.end && src[pos + 1] == '[') {
        long bd = 0;
        pos += 1;
        while (pos < decl.span.end) {
          if (s.mask[pos] == kCode && src[pos] == '[') ++bd;
          if (s.mask[pos] == kCode && src[pos] == ']' && --bd == 0) {
            ++pos;
            break;
          }
          ++pos;
        }
        continue;
      }
      if (!ident_char(static_cast<unsigned char>(src[pos]))) break;
      std::string word = read_ident(src, pos);
      if (decl_modifiers().count(word)) continue;
      keyword = word;
      break;
    }

    if (keyword == "abbrev")
      decl.kind = DeclKind::answer_abbrev;
    else if (keyword == "theorem" || keyword == "lemma")
      decl.kind = DeclKind::theorem;
    else
      decl.kind = DeclKind::other;

    size_t after_name = pos;
    if (named_kind(keyword)) {
      while (after_name < decl.span.end &&
             std::isspace(static_cast<unsigned char>(src[after_name])))
        ++after_name;
      if (after_name < decl.span.end &&
          ident_char(static_cast<unsigned char>(src[after_name])))
        decl.name = read_ident(src, after_name);
    }

    // Top-level ':' (goal / declared type) and ':=' (body) within the span.
    long bd = 0;
    size_t colon_pos = std::string_view::npos;
    size_t assign_pos = std::string_view::npos;
    for (size_t j = after_name; j < decl.span.end; ++j) {
      if (s.mask[j] != kCode) continue;
      char c = src[j];
      if (c == '(' || c == '[' || c == '{') ++bd;
      if (c == ')' || c == ']' || c == '}') bd = std::max(0L, bd - 1);
      if (bd != 0) continue;
      if (c == ':' && j + 1 < decl.span.end && src[j + 1] == '=') {
        assign_pos = j;
        break;
      }
      if (c == ':' && colon_pos == std::string_view::npos) colon_pos = j;
    }

    auto trim_span = [&](size_t from, size_t to) {
      while (from < to && (std::isspace(static_cast<unsigned char>(src[to - 1])) ||
                           s.mask[to - 1] == kComment))
        --to;
      while (from < to && (std::isspace(static_cast<unsigned char>(src[from])) ||
                           s.mask[from] == kComment))
        ++from;
      return SourceSpan{from, to};
    };

    if (assign_pos != std::string_view::npos) {
      decl.body_span = trim_span(assign_pos + 2, decl.span.end);
      if (decl.kind == DeclKind::answer_abbrev &&
          colon_pos != std::string_view::npos) {
        auto ty = trim_span(colon_pos + 1, assign_pos);
        decl.declared_type =
            trim(std::string_view(src.substr(ty.begin, ty.size())));
      }
      if (decl.kind == DeclKind::theorem &&
          colon_pos != std::string_view::npos)
        decl.goal_span = trim_span(colon_pos + 1, assign_pos);
    }

    s.decls.push_back(std::move(decl));
  }

  // Placeholder tokens, classified by enclosing declaration.
  for (size_t pos : find_code_token(src, s.mask, kPlaceholderToken)) {
    SourceSpan hole{pos, pos + kPlaceholderToken.size()};
    const Declaration* owner = nullptr;
    for (const auto& d : s.decls)
      if (d.span.contains(pos)) {
        owner = &d;
        break;
      }
    if (owner == nullptr || owner->kind == DeclKind::other) {
      s.stray_holes.push_back(hole);
      continue;
    }
    Placeholder p;
    p.kind = owner->kind == DeclKind::answer_abbrev ? HoleKind::answer_hole
                                                    : HoleKind::proof_hole;
    p.span = hole;
    p.owner = owner->name;
    s.holes.push_back(std::move(p));
  }

  return s;
}

}  // namespace detail

class FormalStatement {
 public:
  static FormalStatement from_scanned(detail::Scanned s) {
    FormalStatement stmt;
    stmt.raw_source_ = std::move(s.source);
    stmt.mask_ = std::move(s.mask);
    stmt.declarations_ = std::move(s.decls);
    stmt.placeholders_ = std::move(s.holes);
    stmt.preamble_end_ = s.preamble_end;
    return stmt;
  }

  const std::string& raw_source() const { return raw_source_; }
  const std::vector<Declaration>& declarations() const {
    return declarations_;
  }
  const std::vector<Placeholder>& placeholders() const {
    return placeholders_;
  }

  std::string_view text(SourceSpan span) const {
    return std::string_view(raw_source_).substr(span.begin, span.size());
  }

  // Byte-identical reassembly from the parsed pieces; the declaration spans
  // tile the source after the preamble.
  std::string reconstruct() const {
    std::string out(raw_source_.substr(0, preamble_end_));
    for (const auto& d : declarations_) out += text(d.span);
    return out;
  }

  size_t answer_hole_count() const {
    size_t n = 0;
    for (const auto& p : placeholders_)
      if (p.kind == HoleKind::answer_hole) ++n;
    return n;
  }

  size_t proof_hole_count() const {
    size_t n = 0;
    for (const auto& p : placeholders_)
      if (p.kind == HoleKind::proof_hole) ++n;
    return n;
  }

  const Placeholder* first_answer_hole() const {
    for (const auto& p : placeholders_)
      if (p.kind == HoleKind::answer_hole) return &p;
    return nullptr;
  }

  const Declaration* declaration_at(size_t pos) const {
    for (const auto& d : declarations_)
      if (d.span.contains(pos)) return &d;
    return nullptr;
  }

  const Declaration* first_theorem() const {
    for (const auto& d : declarations_)
      if (d.kind == DeclKind::theorem) return &d;
    return nullptr;
  }

  std::vector<std::string> answer_abbrev_names() const {
    std::vector<std::string> out;
    for (const auto& d : declarations_)
      if (d.kind == DeclKind::answer_abbrev && !d.name.empty())
        out.push_back(d.name);
    return out;
  }

  const std::vector<char>& mask() const { return mask_; }

 private:
  std::string raw_source_;
  std::vector<char> mask_;
  std::vector<Declaration> declarations_;
  std::vector<Placeholder> placeholders_;
  size_t preamble_end_ = 0;
};

// True if the text contains the placeholder keyword as a standalone code
// token (comments and string literals do not count).
inline bool contains_placeholder_token(std::string_view source) {
  auto mask = detail::code_mask(source);
  return !detail::find_code_token(source, mask, kPlaceholderToken).empty();
}

inline FormalStatement parse_statement(const std::string& source) {
  require(!source.empty(), Errc::precondition, "source is empty");
  auto scanned = detail::scan_source(source);
  if (scanned.holes.empty() && scanned.stray_holes.empty())
    throw Error(Errc::no_placeholder,
                "source contains no placeholder token");
  if (!scanned.stray_holes.empty())
    throw Error(Errc::malformed_declaration,
                "placeholder at byte " +
                    std::to_string(scanned.stray_holes.front().begin) +
                    " is outside any abbrev or theorem declaration");
  // An answer abbrev holds at most one placeholder.
  for (const auto& d : scanned.decls) {
    if (d.kind != DeclKind::answer_abbrev) continue;
    size_t holes_in_decl = 0;
    for (const auto& h : scanned.holes)
      if (d.span.contains(h.span.begin)) ++holes_in_decl;
    if (holes_in_decl > 1)
      throw Error(Errc::malformed_declaration,
                  "answer abbrev '" + d.name + "' contains " +
                      std::to_string(holes_in_decl) + " placeholders");
  }
  return FormalStatement::from_scanned(std::move(scanned));
}

inline ProblemStyle classify_style(const FormalStatement& stmt) {
  return stmt.answer_hole_count() > 0 ? ProblemStyle::solution_style
                                      : ProblemStyle::proof_style;
}

// Fill the first answer hole with `answer.expression`, leaving every other
// byte untouched.
inline FormalStatement substitute_answer(const FormalStatement& stmt,
                                         const AnswerExpression& answer) {
  const Placeholder* hole = stmt.first_answer_hole();
  if (hole == nullptr)
    throw Error(Errc::no_answer_hole, "statement has no answer hole");
  require(!answer.expression.empty(), Errc::precondition,
          "answer expression is empty");
  require(!contains_placeholder_token(answer.expression), Errc::precondition,
          "answer expression contains a placeholder token");
  const Declaration* owner = stmt.declaration_at(hole->span.begin);
  if (owner != nullptr && strip_all_ws(answer.target_type) !=
                              strip_all_ws(owner->declared_type))
    throw Error(Errc::type_mismatch,
                "answer type '" + answer.target_type +
                    "' does not match declared type '" +
                    owner->declared_type + "'");
  std::string rewritten = stmt.raw_source().substr(0, hole->span.begin) +
                          answer.expression +
                          stmt.raw_source().substr(hole->span.end);
  return parse_statement(rewritten);
}

// Delete the abbrev that owns the first answer hole and splice
// `(expression : declared_type)` over every reference to it inside theorem
// declarations. The ascription keeps operator precedence intact regardless
// of what the expression looks like.
inline FormalStatement inline_rewrite(const FormalStatement& stmt,
                                      const AnswerExpression& answer) {
  const Placeholder* hole = stmt.first_answer_hole();
  if (hole == nullptr)
    throw Error(Errc::no_answer_hole, "statement has no answer hole");
  require(!answer.expression.empty(), Errc::precondition,
          "answer expression is empty");
  const Declaration* target = stmt.declaration_at(hole->span.begin);
  require(target != nullptr && !target->name.empty(), Errc::precondition,
          "answer hole owner has no name");

  std::string replacement = "(" + answer.expression;
  if (!target->declared_type.empty())
    replacement += " : " + target->declared_type;
  replacement += ")";

  const std::string& src = stmt.raw_source();
  std::string out = src.substr(0, stmt.declarations().empty()
                                      ? src.size()
                                      : stmt.declarations().front().span.begin);
  for (const auto& d : stmt.declarations()) {
    if (&d == target) continue;
    if (d.kind != DeclKind::theorem) {
      out += stmt.text(d.span);
      continue;
    }
    auto refs = detail::find_code_token(src, stmt.mask(), target->name,
                                        d.span.begin, d.span.end);
    size_t cursor = d.span.begin;
    std::string piece;
    for (size_t pos : refs) {
      piece += src.substr(cursor, pos - cursor);
      piece += replacement;
      cursor = pos + target->name.size();
    }
    piece += src.substr(cursor, d.span.end - cursor);
    out += piece;
  }

  // Token-aware residue scan: a surviving mention (say, inside a comment or
  // string literal) would leak the deleted name.
  auto residue = detail::find_word(out, target->name);
  if (!residue.empty())
    throw Error(Errc::name_collision,
                "identifier '" + target->name + "' still occurs at byte " +
                    std::to_string(residue.front()) + " after inlining");

  return parse_statement(out);
}

struct RewriteValidation {
  bool pass = false;
  std::vector<std::string> violations;
  std::optional<FormalStatement> statement;  // set when the source parsed
};

// Structural gate for Easy Mode rewrites: parses, exactly one placeholder
// (the proof hole), none of the original answer-abbrev names survive, and
// the theorem keeps its name. Failures are reported, not thrown.
inline RewriteValidation validate_rewrite(const FormalStatement& original,
                                          const std::string& rewritten_source) {
  RewriteValidation v;

  for (const auto& name : original.answer_abbrev_names())
    if (!detail::find_word(rewritten_source, name).empty())
      v.violations.push_back("answer name exposed: " + name);

  try {
    FormalStatement rewritten = parse_statement(rewritten_source);
    if (rewritten.placeholders().size() != 1)
      v.violations.push_back(
          "placeholder count " +
          std::to_string(rewritten.placeholders().size()) + " != 1");
    else if (rewritten.placeholders().front().kind != HoleKind::proof_hole)
      v.violations.push_back("sole placeholder is not a proof hole");
    if (const Declaration* thm = original.first_theorem()) {
      bool preserved = false;
      for (const auto& d : rewritten.declarations())
        if (d.kind == DeclKind::theorem && d.name == thm->name)
          preserved = true;
      if (!preserved)
        v.violations.push_back("theorem name not preserved: " + thm->name);
    }
    v.statement = std::move(rewritten);
  } catch (const Error& e) {
    v.violations.push_back(std::string("does not parse: ") + e.what());
  }

  v.pass = v.violations.empty();
  return v;
}

}  // namespace dap
