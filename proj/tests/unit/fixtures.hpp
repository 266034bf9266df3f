#pragma once

// Deterministic corpora for tests: small java-like functions covering every
// mutable kind (binary operators, declared-then-used variables, calls).
// Everything derives from an explicit seed so failures replay exactly.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "bugforge/annotator.hpp"
#include "bugforge/bpe.hpp"
#include "bugforge/corpus.hpp"
#include "bugforge/rng.hpp"
#include "bugforge/tokenizer.hpp"

namespace fixtures {

// Functions in the proven-to-parse shape:
//   int check7(int x, int y) { int lim = 55; if (x < lim) { return y + 4; } return y - 4; }
// Two operator slots (one relational, one arithmetic pair), three variables
// with uses after declaration, and optionally a call for the api bug type.
inline bugforge::Corpus comparison_corpus(int n, std::uint64_t seed, bool with_calls = false) {
  bugforge::Rng rng(seed);
  const std::vector<std::string> rel = {"<", ">", "==", "!=", "<=", ">="};
  const std::vector<std::string> calls = {"clamp", "scale", "wrap", "fold"};
  bugforge::Corpus corpus;
  for (int i = 0; i < n; ++i) {
    const std::string& op = rel[rng.uniform_index(rel.size())];
    const int lim = static_cast<int>(rng.uniform_index(90)) + 1;
    const int delta = static_cast<int>(rng.uniform_index(9)) + 1;
    std::string body;
    if (with_calls) {
      const std::string& callee = calls[rng.uniform_index(calls.size())];
      body = "int check" + std::to_string(i) + "(int x, int y) { int lim = " +
             std::to_string(lim) + "; if (x " + op + " lim) { return " + callee +
             "(y) + " + std::to_string(delta) + "; } return y - " + std::to_string(delta) +
             "; }";
    } else {
      body = "int check" + std::to_string(i) + "(int x, int y) { int lim = " +
             std::to_string(lim) + "; if (x " + op + " lim) { return y + " +
             std::to_string(delta) + "; } return y - " + std::to_string(delta) + "; }";
    }
    corpus.records.push_back({"fn" + std::to_string(i), body, "java-like"});
  }
  return corpus;
}

inline std::vector<bugforge::AnnotatedFunction> annotated_corpus(int n, std::uint64_t seed,
                                                                 bugforge::BugType bug_type,
                                                                 bool with_calls = false) {
  bugforge::Corpus corpus = comparison_corpus(n, seed, with_calls);
  bugforge::AnnotateResult res = bugforge::annotate_corpus(corpus, bug_type);
  return std::move(res.functions);
}

inline std::vector<bugforge::TokenSequence> token_sequences(const bugforge::Corpus& corpus) {
  std::vector<bugforge::TokenSequence> seqs;
  for (const auto& rec : corpus.records) seqs.push_back(bugforge::tokenize(rec.source));
  return seqs;
}

// A subtoken model trained on the fixture corpus itself; merge count small
// enough to exhaust so retraining stays cheap and deterministic.
inline bugforge::SubtokenModel fixture_subtokens(const bugforge::Corpus& corpus,
                                                 std::size_t merges = 120) {
  return bugforge::train_bpe(token_sequences(corpus), merges);
}

// Scratch directory that cleans up after itself; unique per construction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bugforge_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
