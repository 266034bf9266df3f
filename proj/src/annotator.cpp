#include "bugforge/annotator.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "bugforge/errors.hpp"

namespace bugforge {

std::string to_string(BugType t) {
  switch (t) {
    case BugType::bor_weak: return "bor-weak";
    case BugType::bor_strong: return "bor-strong";
    case BugType::varmisuse: return "varmisuse";
    case BugType::apimisuse: return "apimisuse";
  }
  return "bor-weak";
}

BugType bug_type_from_string(const std::string& s) {
  if (s == "bor-weak") return BugType::bor_weak;
  if (s == "bor-strong") return BugType::bor_strong;
  if (s == "varmisuse") return BugType::varmisuse;
  if (s == "apimisuse") return BugType::apimisuse;
  throw ConfigError("unknown bug type \"" + s + "\"");
}

const std::vector<std::vector<std::string>>& binary_operator_classes() {
  static const std::vector<std::vector<std::string>> classes = {
      {"==", "!=", "<", ">", "<=", ">="},  // relational
      {"+", "-", "*", "/", "%"},           // arithmetic
      {"&&", "||"},                        // logical
      {"&", "|", "^", "<<", ">>"},         // bitwise
  };
  return classes;
}

const std::vector<std::string>& binary_operator_alphabet() {
  static const std::vector<std::string> alphabet = [] {
    std::vector<std::string> all;
    for (const auto& cls : binary_operator_classes()) {
      all.insert(all.end(), cls.begin(), cls.end());
    }
    return all;
  }();
  return alphabet;
}

namespace {

const std::vector<std::string>* class_of(const std::string& op) {
  for (const auto& cls : binary_operator_classes()) {
    if (std::find(cls.begin(), cls.end(), op) != cls.end()) return &cls;
  }
  return nullptr;
}

}  // namespace

std::vector<TargetAnnotation> annotate_bor(const TokenSequence& seq, bool strong) {
  std::vector<TargetAnnotation> targets;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    const Token& tok = seq.tokens[i];
    if (tok.kind != TokenKind::binary_operator) continue;
    const std::vector<std::string>* pool = strong ? class_of(tok.text) : &binary_operator_alphabet();
    if (!pool) continue;  // operator outside the alphabet
    TargetAnnotation t;
    t.index = static_cast<int>(i);
    t.bug_type = strong ? BugType::bor_strong : BugType::bor_weak;
    for (const auto& op : *pool) {
      if (op != tok.text) t.candidates.push_back(op);
    }
    if (!t.candidates.empty()) targets.push_back(std::move(t));
  }
  return targets;
}

std::vector<TargetAnnotation> annotate_varmisuse(const TokenSequence& seq) {
  // Declaration order: every declaring token, earliest first.
  std::vector<std::pair<int, std::string>> decls;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    const Token& tok = seq.tokens[i];
    if (tok.role == TokenRole::param_decl || tok.role == TokenRole::var_decl) {
      decls.emplace_back(static_cast<int>(i), tok.text);
    }
  }

  std::vector<TargetAnnotation> targets;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    const Token& tok = seq.tokens[i];
    if (tok.role != TokenRole::var_use) continue;
    TargetAnnotation t;
    t.index = static_cast<int>(i);
    t.bug_type = BugType::varmisuse;
    std::set<std::string> seen;
    for (const auto& [pos, name] : decls) {
      if (pos >= static_cast<int>(i)) break;  // declared-before-use only
      if (name != tok.text && seen.insert(name).second) t.candidates.push_back(name);
    }
    if (!t.candidates.empty()) targets.push_back(std::move(t));
  }
  return targets;
}

CallVocabulary build_call_vocabulary(const std::vector<TokenSequence>& corpus, std::size_t top_k) {
  std::unordered_map<std::string, long long> counts;
  for (const auto& seq : corpus) {
    for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
      if (seq.tokens[i].kind == TokenKind::call_name) ++counts[seq.tokens[i].text];
    }
  }
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (top_k > 0 && ranked.size() > top_k) ranked.resize(top_k);

  CallVocabulary vocab;
  for (const auto& [name, count] : ranked) {
    vocab.names.push_back(name);
    vocab.counts[name] = count;
  }
  return vocab;
}

std::vector<TargetAnnotation> annotate_apimisuse(const TokenSequence& seq,
                                                 const CallVocabulary& vocab) {
  // Local call names in first-appearance order, appended after the shared
  // vocabulary so replacements can come from either.
  std::vector<std::string> local;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    if (seq.tokens[i].kind != TokenKind::call_name) continue;
    const std::string& name = seq.tokens[i].text;
    if (!vocab.contains(name) && std::find(local.begin(), local.end(), name) == local.end()) {
      local.push_back(name);
    }
  }

  std::vector<TargetAnnotation> targets;
  for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
    const Token& tok = seq.tokens[i];
    if (tok.kind != TokenKind::call_name) continue;
    TargetAnnotation t;
    t.index = static_cast<int>(i);
    t.bug_type = BugType::apimisuse;
    for (const auto& name : vocab.names) {
      if (name != tok.text) t.candidates.push_back(name);
    }
    for (const auto& name : local) {
      if (name != tok.text) t.candidates.push_back(name);
    }
    if (!t.candidates.empty()) targets.push_back(std::move(t));
  }
  return targets;
}

std::vector<TargetAnnotation> annotate(const TokenSequence& seq, BugType bug_type,
                                       const CallVocabulary* vocab) {
  switch (bug_type) {
    case BugType::bor_weak: return annotate_bor(seq, /*strong=*/false);
    case BugType::bor_strong: return annotate_bor(seq, /*strong=*/true);
    case BugType::varmisuse: return annotate_varmisuse(seq);
    case BugType::apimisuse: {
      static const CallVocabulary empty;
      return annotate_apimisuse(seq, vocab ? *vocab : empty);
    }
  }
  return {};
}

AnnotateResult annotate_corpus(const Corpus& corpus, BugType bug_type,
                               const CallVocabulary* vocab, bool strict) {
  AnnotateResult result;
  for (const auto& rec : corpus.records) {
    try {
      AnnotatedFunction fn;
      fn.record = rec;
      fn.tokens = tokenize(rec.source);
      fn.targets = annotate(fn.tokens, bug_type, vocab);
      result.functions.push_back(std::move(fn));
    } catch (const ParseError& e) {
      if (strict) throw;
      ++result.parse_failures;
      result.issues.push_back(rec.id + ": " + e.what());
    }
  }
  return result;
}

Json annotated_to_json(const AnnotatedFunction& fn) {
  Json j;
  j["id"] = fn.record.id;
  Json tokens = Json::array();
  for (const auto& tok : fn.tokens.tokens) tokens.push_back(tok.text);
  j["tokens"] = std::move(tokens);
  Json targets = Json::array();
  for (const auto& t : fn.targets) {
    targets.push_back(Json{{"index", t.index},
                           {"bug_type", to_string(t.bug_type)},
                           {"candidates", t.candidates}});
  }
  j["targets"] = std::move(targets);
  return j;
}

AnnotatedFunction annotated_from_json(const Json& j) {
  for (const char* key : {"id", "tokens", "targets"}) {
    if (!j.contains(key)) throw ParseError("annotated record missing \"" + std::string(key) + "\"");
  }
  AnnotatedFunction fn;
  fn.record.id = j["id"].get<std::string>();
  const auto& tokens = j["tokens"];
  if (!tokens.is_array() || tokens.size() < 2 ||
      tokens.front().get<std::string>() != kClsText || tokens.back().get<std::string>() != kEosText) {
    throw ParseError("annotated record " + fn.record.id + ": bad token array");
  }
  for (const auto& text : tokens) {
    Token tok;
    tok.text = text.get<std::string>();
    fn.tokens.tokens.push_back(std::move(tok));
  }
  // Loaded sequences carry texts only (kinds/roles live in the candidates),
  // so keep a renderable source around for demos and diagnostics.
  fn.record.source = render(fn.tokens);
  for (const auto& t : j["targets"]) {
    TargetAnnotation ann;
    ann.index = t.at("index").get<int>();
    if (ann.index < 1 || ann.index + 1 >= static_cast<int>(fn.tokens.size())) {
      throw ParseError("annotated record " + fn.record.id + ": target index out of range");
    }
    ann.bug_type = bug_type_from_string(t.at("bug_type").get<std::string>());
    for (const auto& c : t.at("candidates")) ann.candidates.push_back(c.get<std::string>());
    if (ann.candidates.empty()) {
      throw ParseError("annotated record " + fn.record.id + ": empty candidate list");
    }
    fn.targets.push_back(std::move(ann));
  }
  std::sort(fn.targets.begin(), fn.targets.end(),
            [](const TargetAnnotation& a, const TargetAnnotation& b) { return a.index < b.index; });
  return fn;
}

void write_annotated(const std::string& path, const std::vector<AnnotatedFunction>& fns) {
  std::vector<Json> records;
  records.reserve(fns.size());
  for (const auto& fn : fns) records.push_back(annotated_to_json(fn));
  write_jsonl(path, records);
}

std::vector<AnnotatedFunction> load_annotated(const std::string& path, bool strict,
                                              std::vector<std::string>* issues) {
  std::vector<AnnotatedFunction> fns;
  auto stats = for_each_jsonl(path, strict, [&](std::size_t lineno, const Json& j) {
    try {
      fns.push_back(annotated_from_json(j));
    } catch (const ParseError& e) {
      if (strict) throw;
      if (issues) issues->push_back(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  if (issues) issues->insert(issues->end(), stats.issues.begin(), stats.issues.end());
  return fns;
}

Json call_vocabulary_to_json(const CallVocabulary& vocab) {
  Json j;
  Json names = Json::array();
  for (const auto& name : vocab.names) {
    names.push_back(Json{{"name", name}, {"count", vocab.counts.at(name)}});
  }
  j["calls"] = std::move(names);
  return j;
}

CallVocabulary call_vocabulary_from_json(const Json& j) {
  CallVocabulary vocab;
  if (!j.contains("calls")) throw ParseError("call vocabulary missing \"calls\"");
  for (const auto& entry : j["calls"]) {
    const std::string name = entry.at("name").get<std::string>();
    vocab.names.push_back(name);
    vocab.counts[name] = entry.value("count", 1LL);
  }
  return vocab;
}

}  // namespace bugforge
