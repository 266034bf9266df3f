#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bugforge/jsonl.hpp"
#include "bugforge/tokenizer.hpp"

namespace bugforge {

// Byte-pair subtoken model learned over token texts. Operator and punctuation
// lexemes are atomic symbols: they get their own vocabulary entry and are
// never split or merged into anything else.
struct SubtokenModel {
  std::vector<std::pair<std::string, std::string>> merges;  // in training order
  std::map<std::string, int> vocab;                         // subtoken -> id
  int pad_id = 0, unk_id = 1, cls_id = 2, eos_id = 3, mask_id = 4;
  // True when pair space ran out before the requested merge count.
  bool exhausted = false;

  const std::string& piece(int id) const;  // inverse vocab lookup
  int vocab_size() const { return static_cast<int>(vocab.size()); }

 private:
  mutable std::vector<std::string> pieces_;  // lazy inverse table for piece()
};

// Trains merges on the token texts of a corpus of tokenized functions.
// Merge selection: highest pair count, ties by lexicographically smallest
// merged string, then smallest left part. Deterministic for a given corpus.
SubtokenModel train_bpe(const std::vector<TokenSequence>& corpus, std::size_t merge_count);

// Subtoken ids for one token sequence plus the token -> subtoken alignment.
// spans[t] = [begin, end) into ids for token t; sentinels map to single ids.
struct SubtokenEncoding {
  std::vector<int> ids;
  std::vector<std::pair<int, int>> spans;

  std::size_t length() const { return ids.size(); }
  int first_subtoken(std::size_t token_index) const { return spans[token_index].first; }
};

SubtokenEncoding encode(const TokenSequence& seq, const SubtokenModel& model);

// Subtoken ids for a bare token text (no sentinels). Used for candidate
// embeddings and replacement splicing.
std::vector<int> encode_token_text(const std::string& text, const SubtokenModel& model);

// Token texts reassembled from an encoding via its alignment spans
// (sentinels included). Unknown ids render as U+FFFD.
std::vector<std::string> decode(const SubtokenEncoding& enc, const SubtokenModel& model);

void save_subtoken_model(const std::string& path, const SubtokenModel& model);
SubtokenModel load_subtoken_model(const std::string& path);

Json subtoken_model_to_json(const SubtokenModel& model);
SubtokenModel subtoken_model_from_json(const Json& j);

}  // namespace bugforge
