#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "bugforge/annotator.hpp"
#include "bugforge/tokenizer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bugforge;

namespace {

std::set<std::string> candidate_set(const TargetAnnotation& t) {
  return {t.candidates.begin(), t.candidates.end()};
}

const TargetAnnotation* target_at_text(const TokenSequence& seq,
                                       const std::vector<TargetAnnotation>& targets,
                                       const std::string& text) {
  for (const auto& t : targets)
    if (seq.tokens[t.index].text == text) return &t;
  return nullptr;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("strong operator candidates stay within the class") {
  TokenSequence seq = tokenize("int f(int x, int n) { if (x <= n && x > 0) { return 1; } return 0; }");
  std::vector<TargetAnnotation> targets = annotate_bor(seq, /*strong=*/true);

  const TargetAnnotation* le = target_at_text(seq, targets, "<=");
  REQUIRE(le != nullptr);
  CHECK(candidate_set(*le) == std::set<std::string>{"==", "!=", "<", ">", ">="});

  const TargetAnnotation* land = target_at_text(seq, targets, "&&");
  REQUIRE(land != nullptr);
  CHECK(land->candidates == std::vector<std::string>{"||"});
}

TEST_CASE("weak operator candidates span the whole alphabet minus the original") {
  TokenSequence seq = tokenize("int f(int x, int n) { if (x <= n) { return 1; } return 0; }");
  std::vector<TargetAnnotation> targets = annotate_bor(seq, /*strong=*/false);
  const TargetAnnotation* le = target_at_text(seq, targets, "<=");
  REQUIRE(le != nullptr);

  // Enumeration oracle: every operator in the published alphabet except the
  // original itself.
  const auto& alphabet = binary_operator_alphabet();
  CHECK(le->candidates.size() == alphabet.size() - 1);
  std::set<std::string> got = candidate_set(*le);
  CHECK(got.count("<=") == 0);
  CHECK(got.count("+") == 1);  // cross-class replacement reachable in weak mode
  for (const auto& op : alphabet)
    if (op != "<=") CHECK(got.count(op) == 1);
}

TEST_CASE("operator class table is consistent with the alphabet") {
  const auto& classes = binary_operator_classes();
  std::set<std::string> from_classes;
  for (const auto& cls : classes)
    for (const auto& op : cls) CHECK(from_classes.insert(op).second);
  std::set<std::string> alphabet(binary_operator_alphabet().begin(),
                                 binary_operator_alphabet().end());
  CHECK(from_classes == alphabet);
}

TEST_CASE("variable misuse proposes earlier-declared names only") {
  TokenSequence seq = tokenize(
      "int f(int a, int b) { int c = a; int d = b; if (c < d) { return c; } return a; }");
  std::vector<TargetAnnotation> targets = annotate_varmisuse(seq);
  REQUIRE(!targets.empty());

  // The "c" use inside the condition sees a, b, c, d declared before it;
  // candidates exclude the original.
  int cond_c = -1;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq.tokens[i].text == "c" && seq.tokens[i + 1].text == "<") cond_c = static_cast<int>(i);
  REQUIRE(cond_c > 0);
  const TargetAnnotation* t = nullptr;
  for (const auto& cand : targets)
    if (cand.index == cond_c) t = &cand;
  REQUIRE(t != nullptr);
  CHECK(candidate_set(*t) == std::set<std::string>{"a", "b", "d"});

  // At the "a" use in "int c = a;" the declared-before set is {a, b, c}:
  // the declaring token of c itself precedes the initializer. Minus the
  // original that leaves {b, c}, in declaration order.
  int init_a = -1;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    if (seq.tokens[i].text == "a" && seq.tokens[i + 1].text == ";") {
      init_a = static_cast<int>(i);
      break;
    }
  REQUIRE(init_a > 0);
  for (const auto& cand : targets)
    if (cand.index == init_a)
      CHECK(cand.candidates == std::vector<std::string>{"b", "c"});
}

TEST_CASE("single-variable functions yield no misuse targets") {
  TokenSequence seq = tokenize("int f(int a) { return a; }");
  CHECK(annotate_varmisuse(seq).empty());
}

TEST_CASE("a crowded scope keeps uniform selection below 15 percent") {
  TokenSequence seq = tokenize(
      "int f(int p1, int p2, int it1, int it2, int d1, int d2, int done, int extra) {"
      " return p2; }");
  std::vector<TargetAnnotation> targets = annotate_varmisuse(seq);
  REQUIRE(targets.size() == 1);
  CHECK(targets[0].candidates.size() >= 7);
  CHECK(1.0 / targets[0].candidates.size() < 0.15);
  CHECK(candidate_set(targets[0]).count("p2") == 0);
}

TEST_CASE("api misuse unions the vocabulary with local calls") {
  TokenSequence seq = tokenize(
      "boolean ok() { if (graph.hasNodes()) { return reset(); } return false; }");
  CallVocabulary vocab;
  vocab.names = {"hasEdges", "hasNodes", "clear"};
  for (const auto& n : vocab.names) vocab.counts[n] = 1;

  std::vector<TargetAnnotation> targets = annotate_apimisuse(seq, vocab);
  const TargetAnnotation* t = target_at_text(seq, targets, "hasNodes");
  REQUIRE(t != nullptr);
  std::set<std::string> got = candidate_set(*t);
  CHECK(got.count("hasEdges") == 1);  // from the vocabulary
  CHECK(got.count("reset") == 1);     // local call outside the vocabulary
  CHECK(got.count("hasNodes") == 0);
  CHECK(got == std::set<std::string>{"hasEdges", "clear", "reset"});
}

TEST_CASE("lone call with an empty vocabulary has no alternatives") {
  TokenSequence seq = tokenize("boolean ok() { return reset(); }");
  CallVocabulary empty;
  CHECK(annotate_apimisuse(seq, empty).empty());
}

TEST_CASE("call vocabulary counts and truncates by frequency") {
  std::vector<TokenSequence> corpus = {
      tokenize("int a() { return f(); }"),
      tokenize("int b() { return f() + f(); }"),
      tokenize("int c() { return g(); }"),
  };
  CallVocabulary vocab = build_call_vocabulary(corpus);
  CHECK(vocab.counts.at("f") == 3);
  CHECK(vocab.counts.at("g") == 1);

  CallVocabulary top1 = build_call_vocabulary(corpus, 1);
  CHECK(top1.names == std::vector<std::string>{"f"});
  CHECK(!top1.contains("g"));
}

TEST_CASE("every target excludes its original and matches its kind") {
  Corpus corpus = fixtures::comparison_corpus(40, 13, /*with_calls=*/true);
  std::vector<TokenSequence> seqs = fixtures::token_sequences(corpus);
  CallVocabulary vocab = build_call_vocabulary(seqs);

  for (const auto& seq : seqs) {
    for (BugType bt : {BugType::bor_weak, BugType::bor_strong, BugType::varmisuse,
                       BugType::apimisuse}) {
      for (const auto& t : annotate(seq, bt, &vocab)) {
        REQUIRE(t.index > 0);
        REQUIRE(t.index + 1 < static_cast<int>(seq.size()));
        CHECK(!t.candidates.empty());
        const Token& tok = seq.tokens[t.index];
        for (const auto& c : t.candidates) CHECK(c != tok.text);
        switch (bt) {
          case BugType::bor_weak:
          case BugType::bor_strong:
            CHECK(tok.kind == TokenKind::binary_operator);
            break;
          case BugType::varmisuse:
            CHECK(tok.kind == TokenKind::identifier);
            CHECK(tok.role == TokenRole::var_use);
            break;
          case BugType::apimisuse:
            CHECK(tok.kind == TokenKind::call_name);
            break;
        }
      }
    }
  }
}

TEST_CASE("annotation is pure") {
  TokenSequence seq = tokenize("int f(int x, int n) { if (x <= n) { return 1; } return 0; }");
  auto a = annotate_bor(seq, true);
  auto b = annotate_bor(seq, true);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index == b[i].index);
    CHECK(a[i].candidates == b[i].candidates);
  }
}

TEST_CASE("annotated functions round-trip through JSON") {
  fixtures::TempDir dir("ann");
  std::vector<AnnotatedFunction> fns =
      fixtures::annotated_corpus(5, 21, BugType::bor_weak);
  REQUIRE(!fns.empty());
  const std::string path = dir.file("ann.jsonl");
  write_annotated(path, fns);
  std::vector<AnnotatedFunction> back = load_annotated(path);
  REQUIRE(back.size() == fns.size());
  for (std::size_t i = 0; i < fns.size(); ++i) {
    CHECK(back[i].record.id == fns[i].record.id);
    REQUIRE(back[i].tokens.size() == fns[i].tokens.size());
    REQUIRE(back[i].targets.size() == fns[i].targets.size());
    for (std::size_t t = 0; t < fns[i].targets.size(); ++t) {
      CHECK(back[i].targets[t].index == fns[i].targets[t].index);
      CHECK(back[i].targets[t].candidates == fns[i].targets[t].candidates);
    }
  }
}

TEST_SUITE_END();
