#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bugforge/corpus.hpp"
#include "bugforge/jsonl.hpp"
#include "bugforge/tokenizer.hpp"

namespace bugforge {

enum class BugType { bor_weak, bor_strong, varmisuse, apimisuse };

std::string to_string(BugType t);
BugType bug_type_from_string(const std::string& s);

// One mutable slot in a function: the token that can be replaced and the
// replacements that keep the function well-formed. The original text is never
// in `candidates`.
struct TargetAnnotation {
  int index = 0;  // token index, sentinels counted (0 is [CLS])
  BugType bug_type = BugType::bor_weak;
  std::vector<std::string> candidates;
};

struct AnnotatedFunction {
  FunctionRecord record;
  TokenSequence tokens;
  std::vector<TargetAnnotation> targets;  // ascending by index
};

// Call names ranked by corpus frequency (count desc, then name asc).
struct CallVocabulary {
  std::vector<std::string> names;
  std::map<std::string, long long> counts;

  bool contains(const std::string& name) const { return counts.count(name) > 0; }
};

// The 18 mutable binary operators, grouped into relational / arithmetic /
// logical / bitwise classes. Weak mode draws candidates from the whole
// alphabet, strong mode only from the original's class.
const std::vector<std::string>& binary_operator_alphabet();
const std::vector<std::vector<std::string>>& binary_operator_classes();

std::vector<TargetAnnotation> annotate_bor(const TokenSequence& seq, bool strong);

// Targets are variable uses; candidates are other names declared before the
// use (parameters count as declared at the signature). Uses with no
// alternative in scope are not targets.
std::vector<TargetAnnotation> annotate_varmisuse(const TokenSequence& seq);

// Targets are call names; candidates come from the shared call vocabulary
// plus calls local to the function, minus the original.
std::vector<TargetAnnotation> annotate_apimisuse(const TokenSequence& seq,
                                                 const CallVocabulary& vocab);

// top_k = 0 keeps every name.
CallVocabulary build_call_vocabulary(const std::vector<TokenSequence>& corpus, std::size_t top_k = 0);

std::vector<TargetAnnotation> annotate(const TokenSequence& seq, BugType bug_type,
                                       const CallVocabulary* vocab = nullptr);

// Annotates a whole corpus; functions that fail to parse are skipped and
// reported in `issues` (strict mode throws instead).
struct AnnotateResult {
  std::vector<AnnotatedFunction> functions;
  std::size_t parse_failures = 0;
  std::vector<std::string> issues;
};
AnnotateResult annotate_corpus(const Corpus& corpus, BugType bug_type,
                               const CallVocabulary* vocab = nullptr, bool strict = false);

// JSONL form: {"id", "tokens": [texts, sentinels included],
//              "targets": [{"index", "bug_type", "candidates"}]}.
Json annotated_to_json(const AnnotatedFunction& fn);
AnnotatedFunction annotated_from_json(const Json& j);
void write_annotated(const std::string& path, const std::vector<AnnotatedFunction>& fns);
std::vector<AnnotatedFunction> load_annotated(const std::string& path, bool strict = false,
                                              std::vector<std::string>* issues = nullptr);

CallVocabulary call_vocabulary_from_json(const Json& j);
Json call_vocabulary_to_json(const CallVocabulary& vocab);

}  // namespace bugforge
