#include <set>
#include <string>
#include <vector>

#include "bugforge/bpe.hpp"
#include "bugforge/errors.hpp"
#include "bugforge/tokenizer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bugforge;

TEST_SUITE_BEGIN("data");

TEST_CASE("merge training follows pair counts with the documented tie rule") {
  // Single token "aaab": pair (a,a) occurs twice, (a,b) once, so the first
  // merge is forced. Afterwards "aa,a,b" ties (aa,a) vs (a,b) at one
  // occurrence each; the tie rule prefers the smaller merged string, and
  // "aaa" < "ab".
  TokenSequence seq = tokenize("int f() { return aaab; }");
  SubtokenModel m = train_bpe({seq}, 2);
  REQUIRE(m.merges.size() == 2);
  CHECK(m.merges[0] == std::pair<std::string, std::string>{"a", "a"});
  CHECK(m.merges[1] == std::pair<std::string, std::string>{"aa", "a"});

  SubtokenModel again = train_bpe({seq}, 2);
  CHECK(again.merges == m.merges);
  CHECK(again.vocab == m.vocab);
}

TEST_CASE("merge exhaustion is reported") {
  TokenSequence seq = tokenize("int f() { return ab; }");
  SubtokenModel m = train_bpe({seq}, 100000);
  CHECK(m.exhausted);
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_AS(train_bpe({}, 10), ConfigError);
}

TEST_CASE("encoding aligns spans with tokens") {
  Corpus corpus = fixtures::comparison_corpus(20, 3);
  SubtokenModel m = fixtures::fixture_subtokens(corpus);

  TokenSequence seq = tokenize(corpus.records[0].source);
  SubtokenEncoding enc = encode(seq, m);

  // Spans partition the id range: contiguous, non-overlapping, full cover.
  REQUIRE(enc.spans.size() == seq.size());
  int cursor = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    CHECK(enc.spans[t].first == cursor);
    CHECK(enc.spans[t].second > enc.spans[t].first);
    cursor = enc.spans[t].second;
  }
  CHECK(cursor == static_cast<int>(enc.ids.size()));

  // Sentinels map to exactly one reserved id each.
  CHECK(enc.spans.front() == std::pair<int, int>{0, 1});
  CHECK(enc.ids.front() == m.cls_id);
  CHECK(enc.ids.back() == m.eos_id);
}

TEST_CASE("multi-piece identifiers stay within one span") {
  TokenSequence seq = tokenize("int f() { return getPathIterator; }");
  // The trainer never sees the long identifier, so it must fragment; its
  // characters all appear in other words, so the roundtrip stays lossless.
  SubtokenModel m = train_bpe({tokenize("int go(int Path, int Iter) { return Path; }")}, 50);
  SubtokenEncoding enc = encode(seq, m);
  int idx = -1;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.tokens[i].text == "getPathIterator") idx = static_cast<int>(i);
  REQUIRE(idx >= 0);
  CHECK(enc.spans[idx].second - enc.spans[idx].first >= 2);
  CHECK(decode(enc, m)[idx] == "getPathIterator");
}

TEST_CASE("decode inverts encode across a fixture corpus") {
  Corpus corpus = fixtures::comparison_corpus(50, 9);
  SubtokenModel m = fixtures::fixture_subtokens(corpus);
  for (const auto& rec : corpus.records) {
    TokenSequence seq = tokenize(rec.source);
    std::vector<std::string> round = decode(encode(seq, m), m);
    REQUIRE(round.size() == seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(round[i] == seq.tokens[i].text);
  }
}

TEST_CASE("vocabulary hits encode to single-id spans") {
  Corpus corpus = fixtures::comparison_corpus(20, 4);
  SubtokenModel m = fixtures::fixture_subtokens(corpus);
  // "int" recurs in every record, so it must have been merged to one piece.
  const std::vector<int> ids = encode_token_text("int", m);
  CHECK(ids.size() == 1);
}

TEST_CASE("characters outside the alphabet map to UNK and a glyph") {
  SubtokenModel m = fixtures::fixture_subtokens(fixtures::comparison_corpus(5, 1));
  const std::vector<int> ids = encode_token_text("\xC3\xA9", m);  // é, never seen
  REQUIRE(!ids.empty());
  for (int id : ids) CHECK(id == m.unk_id);
  CHECK(m.piece(m.unk_id) == "[UNK]");
}

TEST_CASE("model JSON round-trips") {
  fixtures::TempDir dir("bpe");
  SubtokenModel m = fixtures::fixture_subtokens(fixtures::comparison_corpus(20, 6));
  const std::string path = dir.file("subtok.json");
  save_subtoken_model(path, m);
  SubtokenModel r = load_subtoken_model(path);
  CHECK(r.merges == m.merges);
  CHECK(r.vocab == m.vocab);
  CHECK(r.exhausted == m.exhausted);
  CHECK(r.mask_id == m.mask_id);
}

TEST_SUITE_END();
