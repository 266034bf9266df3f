#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bugforge/classical_mutators.hpp"
#include "bugforge/tokenizer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bugforge;

namespace {

AnnotatedFunction annotate_one(const std::string& source, BugType bt,
                               const CallVocabulary* vocab = nullptr) {
  AnnotatedFunction fn;
  fn.record = {"one", source, ""};
  fn.tokens = tokenize(source);
  fn.targets = annotate(fn.tokens, bt, vocab);
  return fn;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("target sampling is uniform over annotated slots") {
  // Five operator slots; frequencies must settle near 1/5.
  AnnotatedFunction fn = annotate_one(
      "int f(int a, int b) { int r = a + b; r = r - a; r = r * b; r = r / a;"
      " return r % b; }",
      BugType::bor_strong);
  REQUIRE(fn.targets.size() == 5);

  Rng rng(3);
  std::map<std::size_t, int> hits;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto pos = sample_target(fn, rng);
    REQUIRE(pos.has_value());
    ++hits[*pos];
  }
  REQUIRE(hits.size() == 5);
  for (const auto& [pos, n] : hits) CHECK(std::abs(n / double(draws) - 0.2) < 0.01);
}

TEST_CASE("degenerate target counts behave") {
  AnnotatedFunction one = annotate_one(
      "int f(int a, int b) { if (a < b) { return 1; } return 0; }", BugType::bor_weak);
  REQUIRE(one.targets.size() == 1);
  Rng rng(1);
  CHECK(sample_target(one, rng).value() == 0);

  AnnotatedFunction none = annotate_one("int f(int a) { return a; }", BugType::bor_weak);
  CHECK(!sample_target(none, rng).has_value());
}

TEST_CASE("single-candidate replacement is forced") {
  AnnotatedFunction fn = annotate_one(
      "int f(int a, int b) { if (a > 0 && b > 0) { return 1; } return 0; }",
      BugType::bor_strong);
  std::size_t and_pos = 0;
  bool found = false;
  for (std::size_t i = 0; i < fn.targets.size(); ++i)
    if (fn.tokens.tokens[fn.targets[i].index].text == "&&") {
      and_pos = i;
      found = true;
    }
  REQUIRE(found);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Mutation m = sample_classical(fn, and_pos, rng);
    CHECK(m.original == "&&");
    CHECK(m.replacement == "||");
  }
}

TEST_CASE("weak replacement reaches other operator classes") {
  AnnotatedFunction fn = annotate_one(
      "int f(int a, int b) { if (a <= b) { return 1; } return 0; }", BugType::bor_weak);
  REQUIRE(fn.targets.size() == 1);
  const double expected = 1.0 / fn.targets[0].candidates.size();

  Rng rng(17);
  int plus = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    plus += sample_classical(fn, 0, rng).replacement == "+" ? 1 : 0;
  CHECK(std::abs(plus / double(draws) - expected) < 0.01);
}

TEST_CASE("applied mutations change exactly one token") {
  std::vector<AnnotatedFunction> fns =
      fixtures::annotated_corpus(40, 23, BugType::bor_weak);
  Rng rng(29);
  int checked = 0;
  for (const auto& fn : fns) {
    auto pos = sample_target(fn, rng);
    if (!pos) continue;
    Mutation m = sample_classical(fn, *pos, rng);
    TokenSequence mutated = apply_mutation(fn.tokens, m.token_index, m.replacement);
    REQUIRE(mutated.size() == fn.tokens.size());
    int diff = 0;
    for (std::size_t i = 0; i < mutated.size(); ++i)
      if (mutated.tokens[i].text != fn.tokens.tokens[i].text) ++diff;
    CHECK(diff == 1);
    CHECK(mutated.tokens[m.token_index].text == m.replacement);
    ++checked;
  }
  CHECK(checked == 40);
}

TEST_CASE("static sets pair every mutant with a real copy") {
  std::vector<AnnotatedFunction> fns =
      fixtures::annotated_corpus(100, 31, BugType::bor_weak);
  Rng rng(37);
  std::vector<StaticExample> set = generate_static(fns, 1, rng);
  CHECK(set.size() == 200);

  int mutants = 0;
  for (const auto& ex : set) {
    if (ex.label == 1) {
      ++mutants;
      CHECK(ex.gold_location > 0);
    } else {
      CHECK(ex.gold_location == 0);
    }
  }
  CHECK(mutants == 100);
}

TEST_CASE("multiplicity three respects the distinctness cap") {
  // One target with one candidate can only produce one distinct mutant.
  AnnotatedFunction capped = annotate_one(
      "int f(int a, int b) { if (a > 0 && b > 0) { return 1; } return 0; }",
      BugType::bor_strong);
  // Keep only the && slot so the pair space is exactly one.
  std::vector<TargetAnnotation> only_and;
  for (const auto& t : capped.targets)
    if (capped.tokens.tokens[t.index].text == "&&") only_and.push_back(t);
  capped.targets = only_and;
  REQUIRE(capped.targets.size() == 1);

  Rng rng(41);
  std::vector<StaticExample> set = generate_static({capped}, 3, rng);
  CHECK(set.size() == 2);  // one mutant + its paired real

  // Two targets with five candidates each leave room for three distinct mutants.
  AnnotatedFunction roomy = annotate_one(
      "int f(int a, int b) { if (a < b) { return 1; } if (a > b) { return 2; } return 0; }",
      BugType::bor_strong);
  REQUIRE(roomy.targets.size() == 2);
  std::vector<StaticExample> six = generate_static({roomy}, 3, rng);
  CHECK(six.size() == 6);
  int mutants = 0;
  std::set<std::pair<int, std::string>> combos;
  for (const auto& ex : six) {
    if (ex.label != 1) continue;
    ++mutants;
    combos.insert({ex.gold_location, ex.tokens.tokens[ex.gold_location].text});
  }
  CHECK(mutants == 3);
  CHECK(combos.size() == 3);  // no duplicated (position, replacement) pair
}

TEST_CASE("functions without targets contribute nothing to static sets") {
  AnnotatedFunction none = annotate_one("int f(int a) { return a; }", BugType::bor_weak);
  Rng rng(43);
  CHECK(generate_static({none}, 3, rng).empty());
}

TEST_CASE("static examples round-trip through JSON") {
  fixtures::TempDir dir("static");
  std::vector<AnnotatedFunction> fns = fixtures::annotated_corpus(10, 47, BugType::bor_weak);
  Rng rng(53);
  std::vector<StaticExample> set = generate_static(fns, 3, rng);
  REQUIRE(!set.empty());
  const std::string path = dir.file("set.jsonl");
  write_example_set(path, set);
  std::vector<StaticExample> back = load_example_set(path);
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(back[i].source_id == set[i].source_id);
    CHECK(back[i].label == set[i].label);
    CHECK(back[i].gold_location == set[i].gold_location);
    REQUIRE(back[i].tokens.size() == set[i].tokens.size());
    for (std::size_t t = 0; t < set[i].tokens.size(); ++t)
      CHECK(back[i].tokens.tokens[t].text == set[i].tokens.tokens[t].text);
  }
}

TEST_SUITE_END();
