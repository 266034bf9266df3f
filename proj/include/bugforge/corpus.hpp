#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bugforge {

// One function-level record of the input corpus.
struct FunctionRecord {
  std::string id;
  std::string source;
  std::string language;
};

struct Corpus {
  std::vector<FunctionRecord> records;
  // Loader bookkeeping, so callers can report what was dropped and why.
  std::size_t malformed_skipped = 0;
  std::size_t duplicates_removed = 0;
  std::vector<std::string> issues;
};

// Reads JSONL records {"id","source","language"}. Records with missing/empty
// id or source, duplicate ids, or invalid JSON are skipped with a note in
// `issues` (or raise ParseError when strict).
Corpus load_corpus(const std::string& path, bool strict = false);

// Order-preserving dedup on whitespace-normalized `source` text; first
// occurrence wins. Returns the number of records removed (also accumulated
// on the corpus). Near-duplicates beyond reformatting are kept.
std::size_t deduplicate(Corpus& corpus);

struct SplitResult {
  Corpus train, validate, test;
  std::uint64_t seed = 0;
};

// Seeded shuffle followed by a ratio split. validate and test take
// floor(n*ratio) records each and train absorbs the remainder, so nothing is
// lost to rounding. Ratios must be non-negative and sum to 1. The same seed
// always yields the same membership.
SplitResult split_corpus(const Corpus& corpus, double train_ratio, double validate_ratio,
                         double test_ratio, std::uint64_t seed);

// Manifest format: {"seed": u64, "train": [ids], "validate": [ids], "test": [ids]}.
void write_split_manifest(const std::string& path, const SplitResult& split);

// Reapplies a manifest onto a corpus. Every listed id must exist exactly once.
SplitResult apply_split_manifest(const Corpus& corpus, const std::string& path);

void write_corpus(const std::string& path, const Corpus& corpus);

struct FilterStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

// Drops records whose measured length exceeds max_len. The measurer is
// supplied by the caller (the pipeline passes encoded subtoken length,
// sentinels included) so this module stays independent of the tokenizer.
FilterStats filter_by_length(Corpus& corpus, std::size_t max_len,
                             const std::function<std::size_t(const FunctionRecord&)>& length_of);

}  // namespace bugforge
