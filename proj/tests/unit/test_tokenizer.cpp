#include <string>
#include <vector>

#include "bugforge/errors.hpp"
#include "bugforge/tokenizer.hpp"
#include "doctest.h"

using namespace bugforge;

namespace {

std::vector<std::string> texts(const TokenSequence& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq.tokens) out.push_back(t.text);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("conditional fragment tokenizes with expected kinds") {
  TokenSequence seq = tokenize("if (x <= n)");
  CHECK(texts(seq) ==
        std::vector<std::string>{"[CLS]", "if", "(", "x", "<=", "n", ")", "[EOS]"});
  CHECK(seq.tokens[1].kind == TokenKind::keyword);
  CHECK(seq.tokens[2].kind == TokenKind::punctuation);
  CHECK(seq.tokens[3].kind == TokenKind::identifier);
  CHECK(seq.tokens[4].kind == TokenKind::binary_operator);
  CHECK(seq.tokens[5].kind == TokenKind::identifier);
  CHECK(seq.tokens[6].kind == TokenKind::punctuation);
}

TEST_CASE("sentinels bracket every sequence") {
  TokenSequence seq = tokenize("int f() { }");
  REQUIRE(seq.size() >= 2);
  CHECK(seq.tokens.front().text == kClsText);
  CHECK(seq.tokens.back().text == kEosText);
  // Empty body: just signature plus braces between the sentinels.
  CHECK(texts(seq) ==
        std::vector<std::string>{"[CLS]", "int", "f", "(", ")", "{", "}", "[EOS]"});
}

TEST_CASE("call names are distinguishable from receiver identifiers") {
  TokenSequence seq = tokenize("boolean ok() { return graph.hasNodes(); }");
  int call = -1, receiver = -1;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.tokens[i].text == "hasNodes") call = static_cast<int>(i);
    if (seq.tokens[i].text == "graph") receiver = static_cast<int>(i);
  }
  REQUIRE(call >= 0);
  REQUIRE(receiver >= 0);
  CHECK(seq.tokens[call].kind == TokenKind::call_name);
  CHECK(seq.tokens[receiver].kind == TokenKind::identifier);
}

TEST_CASE("variable roles track declaration before use") {
  TokenSequence seq =
      tokenize("int f(int a, int b) { int c = a; if (c < b) { return c; } return b; }");
  int decl_c = -1;
  std::vector<int> uses_c;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.tokens[i].text != "c") continue;
    if (seq.tokens[i].role == TokenRole::var_decl) decl_c = static_cast<int>(i);
    if (seq.tokens[i].role == TokenRole::var_use) uses_c.push_back(static_cast<int>(i));
  }
  REQUIRE(decl_c >= 0);
  REQUIRE(uses_c.size() == 2);
  for (int u : uses_c) CHECK(u > decl_c);

  // Parameters read as declarations at the signature, uses afterwards.
  bool param_seen = false, param_use_seen = false;
  for (const auto& t : seq.tokens) {
    if (t.text == "a" && t.role == TokenRole::param_decl) param_seen = true;
    if (t.text == "a" && t.role == TokenRole::var_use) param_use_seen = true;
  }
  CHECK(param_seen);
  CHECK(param_use_seen);
}

TEST_CASE("operators lex as atomic symbols") {
  // Multi-character operators never split, and compound assignment stays
  // out of the mutable kind.
  TokenSequence seq = tokenize("int f(int a, int b) { a += b << 2; return a >= b; }");
  bool shl = false, ge = false;
  for (const auto& t : seq.tokens) {
    if (t.text == "<<") {
      shl = true;
      CHECK(t.kind == TokenKind::binary_operator);
    }
    if (t.text == ">=") {
      ge = true;
      CHECK(t.kind == TokenKind::binary_operator);
    }
    if (t.text == "+=") CHECK(t.kind == TokenKind::other);
  }
  CHECK(shl);
  CHECK(ge);
}

TEST_CASE("render inverts tokenize at the token level") {
  const std::string src =
      "int mix(int u, int v) { int w = u * v; if (w != 0) { return w % 7; } return 0; }";
  TokenSequence seq = tokenize(src);
  TokenSequence again = tokenize(render(seq));
  CHECK(texts(again) == texts(seq));
}

TEST_CASE("single-token source edits move exactly one token") {
  // Mutation locality precondition: a one-token change in the source gives
  // sequences that differ at exactly one index.
  TokenSequence a = tokenize("int f(int x) { if (x < 3) { return 1; } return 0; }");
  TokenSequence b = tokenize("int f(int x) { if (x > 3) { return 1; } return 0; }");
  REQUIRE(a.size() == b.size());
  int diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.tokens[i].text != b.tokens[i].text) ++diff;
  CHECK(diff == 1);
}

TEST_CASE("parse errors carry a position") {
  try {
    tokenize("int f( { \"unterminated");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(" at ") != std::string::npos);
    CHECK(e.line >= 1);
  }
}

TEST_SUITE_END();
