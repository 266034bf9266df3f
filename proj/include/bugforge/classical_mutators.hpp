#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bugforge/annotator.hpp"
#include "bugforge/rng.hpp"

namespace bugforge {

struct Mutation {
  int token_index = 0;       // position of the replaced token
  std::string original;
  std::string replacement;   // drawn from the target's candidates
  BugType bug_type = BugType::bor_weak;
};

// Uniform draw over the function's annotated targets; nullopt when there are
// none. Returns an index into fn.targets.
std::optional<std::size_t> sample_target(const AnnotatedFunction& fn, Rng& rng);

// Uniform draw over the chosen target's candidates.
Mutation sample_classical(const AnnotatedFunction& fn, std::size_t target_pos, Rng& rng);

// Single-token replacement; token count and every other token are unchanged.
// The replaced token keeps only its text (kind/role are not recomputed).
TokenSequence apply_mutation(const TokenSequence& seq, int token_index,
                             const std::string& replacement);

// One labelled sequence of a static pretraining set.
struct StaticExample {
  std::string source_id;
  int label = 0;          // 1 = mutant, 0 = unmodified
  int gold_location = 0;  // token index of the planted bug; 0 for reals
  TokenSequence tokens;
};

// Builds mutant/real pairs: up to `multiplicity` (1 or 3) distinct mutants per
// function, each paired with an unmodified copy. Functions without targets are
// skipped. Distinctness is over (target index, replacement); when a function
// cannot yield enough distinct mutants it contributes as many as it has.
std::vector<StaticExample> generate_static(const std::vector<AnnotatedFunction>& fns,
                                           int multiplicity, Rng& rng);

Json static_example_to_json(const StaticExample& ex);
StaticExample static_example_from_json(const Json& j);
void write_example_set(const std::string& path, const std::vector<StaticExample>& set);
std::vector<StaticExample> load_example_set(const std::string& path, bool strict = false,
                                            std::vector<std::string>* issues = nullptr);

}  // namespace bugforge
