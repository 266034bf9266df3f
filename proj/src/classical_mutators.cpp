#include "bugforge/classical_mutators.hpp"

#include <algorithm>
#include <set>

#include "bugforge/errors.hpp"

namespace bugforge {

std::optional<std::size_t> sample_target(const AnnotatedFunction& fn, Rng& rng) {
  if (fn.targets.empty()) return std::nullopt;
  return rng.uniform_index(fn.targets.size());
}

Mutation sample_classical(const AnnotatedFunction& fn, std::size_t target_pos, Rng& rng) {
  const TargetAnnotation& target = fn.targets.at(target_pos);
  if (target.candidates.empty()) throw ConfigError("target has no candidates");
  Mutation m;
  m.token_index = target.index;
  m.original = fn.tokens.tokens.at(target.index).text;
  m.replacement = target.candidates[rng.uniform_index(target.candidates.size())];
  m.bug_type = target.bug_type;
  return m;
}

TokenSequence apply_mutation(const TokenSequence& seq, int token_index,
                             const std::string& replacement) {
  if (token_index < 1 || token_index + 1 >= static_cast<int>(seq.size())) {
    throw ConfigError("mutation index out of range");
  }
  TokenSequence out = seq;
  Token& tok = out.tokens[token_index];
  tok.text = replacement;
  // Kind/role describe the original parse; a fresh tokenize of the rendered
  // mutant is the way to recover them when needed.
  return out;
}

std::vector<StaticExample> generate_static(const std::vector<AnnotatedFunction>& fns,
                                           int multiplicity, Rng& rng) {
  if (multiplicity < 1) throw ConfigError("multiplicity must be >= 1");
  std::vector<StaticExample> out;
  for (const auto& fn : fns) {
    if (fn.targets.empty()) continue;

    // Two-stage sampling (uniform target, then uniform replacement) with
    // rejection of repeats. A bounded retry count keeps generation total even
    // when a function has fewer distinct mutants than requested.
    std::set<std::pair<int, std::string>> seen;
    const int tries_budget = 20 * multiplicity;
    int tries = 0;
    while (static_cast<int>(seen.size()) < multiplicity && tries < tries_budget) {
      ++tries;
      const std::size_t target_pos = *sample_target(fn, rng);
      const Mutation m = sample_classical(fn, target_pos, rng);
      if (!seen.insert({m.token_index, m.replacement}).second) continue;

      StaticExample buggy;
      buggy.source_id = fn.record.id;
      buggy.label = 1;
      buggy.gold_location = m.token_index;
      buggy.tokens = apply_mutation(fn.tokens, m.token_index, m.replacement);
      out.push_back(std::move(buggy));

      StaticExample real;
      real.source_id = fn.record.id;
      real.label = 0;
      real.gold_location = 0;
      real.tokens = fn.tokens;
      out.push_back(std::move(real));
    }
  }
  return out;
}

Json static_example_to_json(const StaticExample& ex) {
  Json tokens = Json::array();
  for (const auto& tok : ex.tokens.tokens) tokens.push_back(tok.text);
  return Json{{"source_id", ex.source_id},
              {"label", ex.label},
              {"gold_location", ex.gold_location},
              {"tokens", std::move(tokens)}};
}

StaticExample static_example_from_json(const Json& j) {
  for (const char* key : {"source_id", "label", "gold_location", "tokens"}) {
    if (!j.contains(key)) throw ParseError("example missing \"" + std::string(key) + "\"");
  }
  StaticExample ex;
  ex.source_id = j["source_id"].get<std::string>();
  ex.label = j["label"].get<int>();
  ex.gold_location = j["gold_location"].get<int>();
  const auto& tokens = j["tokens"];
  if (!tokens.is_array() || tokens.size() < 2 ||
      tokens.front().get<std::string>() != kClsText || tokens.back().get<std::string>() != kEosText) {
    throw ParseError("example " + ex.source_id + ": bad token array");
  }
  for (const auto& text : tokens) {
    Token tok;
    tok.text = text.get<std::string>();
    ex.tokens.tokens.push_back(std::move(tok));
  }
  if (ex.label != 0 && ex.label != 1) throw ParseError("example label must be 0 or 1");
  if (ex.gold_location < 0 || ex.gold_location + 1 >= static_cast<int>(ex.tokens.size())) {
    throw ParseError("example " + ex.source_id + ": gold location out of range");
  }
  if (ex.label == 0 && ex.gold_location != 0) {
    throw ParseError("example " + ex.source_id + ": unmodified example with nonzero location");
  }
  return ex;
}

void write_example_set(const std::string& path, const std::vector<StaticExample>& set) {
  std::vector<Json> records;
  records.reserve(set.size());
  for (const auto& ex : set) records.push_back(static_example_to_json(ex));
  write_jsonl(path, records);
}

std::vector<StaticExample> load_example_set(const std::string& path, bool strict,
                                            std::vector<std::string>* issues) {
  std::vector<StaticExample> set;
  auto stats = for_each_jsonl(path, strict, [&](std::size_t lineno, const Json& j) {
    try {
      set.push_back(static_example_from_json(j));
    } catch (const ParseError& e) {
      if (strict) throw;
      if (issues) issues->push_back(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  if (issues) issues->insert(issues->end(), stats.issues.begin(), stats.issues.end());
  return set;
}

}  // namespace bugforge
