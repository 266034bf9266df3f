#include "bugforge/bpe.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "bugforge/errors.hpp"

namespace bugforge {

namespace {

const std::unordered_set<std::string>& atomic_set() {
  static const std::unordered_set<std::string> atoms = [] {
    std::unordered_set<std::string> s;
    for (const auto& lex : operator_punctuation_lexemes()) s.insert(lex);
    return s;
  }();
  return atoms;
}

const std::vector<std::string>& special_pieces() {
  static const std::vector<std::string> pieces = {"[PAD]", "[UNK]", "[CLS]", "[EOS]", "[MASK]"};
  return pieces;
}

std::vector<std::string> to_chars(const std::string& word) {
  std::vector<std::string> symbols;
  symbols.reserve(word.size());
  for (char c : word) symbols.emplace_back(1, c);
  return symbols;
}

// Left-to-right, non-overlapping replacement of (l, r) with l+r.
void apply_merge(std::vector<std::string>& symbols, const std::string& l, const std::string& r) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  std::size_t j = 0;
  while (j < symbols.size()) {
    if (j + 1 < symbols.size() && symbols[j] == l && symbols[j + 1] == r) {
      out.push_back(l + r);
      j += 2;
    } else {
      out.push_back(std::move(symbols[j]));
      ++j;
    }
  }
  symbols = std::move(out);
}

void insert_piece(SubtokenModel& model, const std::string& piece) {
  model.vocab.emplace(piece, static_cast<int>(model.vocab.size()));
}

}  // namespace

const std::string& SubtokenModel::piece(int id) const {
  if (pieces_.size() != vocab.size()) {
    pieces_.assign(vocab.size(), std::string{});
    for (const auto& [text, pid] : vocab) {
      if (pid < 0 || pid >= static_cast<int>(pieces_.size())) {
        throw ParseError("subtoken model has non-dense ids");
      }
      pieces_[pid] = text;
    }
  }
  if (id < 0 || id >= static_cast<int>(pieces_.size())) {
    throw ConfigError("subtoken id out of range: " + std::to_string(id));
  }
  return pieces_[id];
}

SubtokenModel train_bpe(const std::vector<TokenSequence>& corpus, std::size_t merge_count) {
  if (corpus.empty()) throw ConfigError("train_bpe: empty corpus");
  // Distinct non-atomic token texts with corpus counts; merge statistics are
  // weighted by how often the word occurs.
  std::unordered_map<std::string, long long> word_counts;
  for (const auto& seq : corpus) {
    for (std::size_t i = seq.inner_begin(); i < seq.inner_end(); ++i) {
      const std::string& text = seq.tokens[i].text;
      if (!atomic_set().count(text)) ++word_counts[text];
    }
  }

  struct Word {
    std::vector<std::string> symbols;
    long long count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  std::unordered_set<std::string> char_symbols;
  for (const auto& [text, count] : word_counts) {
    Word w{to_chars(text), count};
    for (const auto& s : w.symbols) char_symbols.insert(s);
    words.push_back(std::move(w));
  }

  SubtokenModel model;
  for (std::size_t i = 0; i < merge_count; ++i) {
    std::map<std::pair<std::string, std::string>, long long> pair_counts;
    for (const auto& w : words) {
      for (std::size_t j = 0; j + 1 < w.symbols.size(); ++j) {
        pair_counts[{w.symbols[j], w.symbols[j + 1]}] += w.count;
      }
    }
    if (pair_counts.empty()) {
      model.exhausted = true;
      break;
    }
    // Highest count wins; ties prefer the smallest merged string, then the
    // smallest left part. std::map order makes the scan deterministic.
    const std::pair<std::string, std::string>* best = nullptr;
    long long best_count = 0;
    std::string best_merged;
    for (const auto& [pair, count] : pair_counts) {
      const std::string merged = pair.first + pair.second;
      const bool better =
          count > best_count ||
          (count == best_count && best &&
           (merged < best_merged || (merged == best_merged && pair.first < best->first)));
      if (!best || better) {
        best = &pair;
        best_count = count;
        best_merged = merged;
      }
    }
    model.merges.emplace_back(best->first, best->second);
    const auto [l, r] = *best;
    for (auto& w : words) apply_merge(w.symbols, l, r);
  }

  // Vocabulary: specials, atomic lexemes, single characters, merge products.
  for (const auto& piece : special_pieces()) insert_piece(model, piece);
  std::vector<std::string> base(atomic_set().begin(), atomic_set().end());
  base.insert(base.end(), char_symbols.begin(), char_symbols.end());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  for (const auto& piece : base) insert_piece(model, piece);
  for (const auto& [l, r] : model.merges) insert_piece(model, l + r);
  return model;
}

std::vector<int> encode_token_text(const std::string& text, const SubtokenModel& model) {
  if (text == kClsText) return {model.cls_id};
  if (text == kEosText) return {model.eos_id};
  if (text == kMaskText) return {model.mask_id};
  auto lookup = [&](const std::string& piece) {
    auto it = model.vocab.find(piece);
    return it == model.vocab.end() ? model.unk_id : it->second;
  };
  if (atomic_set().count(text)) return {lookup(text)};

  std::vector<std::string> symbols = to_chars(text);
  std::unordered_map<std::string, std::size_t> rank;
  rank.reserve(model.merges.size());
  for (std::size_t i = 0; i < model.merges.size(); ++i) {
    rank.emplace(model.merges[i].first + '\x1f' + model.merges[i].second, i);
  }
  while (symbols.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    for (std::size_t j = 0; j + 1 < symbols.size(); ++j) {
      auto it = rank.find(symbols[j] + '\x1f' + symbols[j + 1]);
      if (it != rank.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == SIZE_MAX) break;
    const auto& m = model.merges[best_rank];
    apply_merge(symbols, m.first, m.second);
  }

  std::vector<int> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(lookup(s));
  return ids;
}

SubtokenEncoding encode(const TokenSequence& seq, const SubtokenModel& model) {
  SubtokenEncoding enc;
  enc.spans.reserve(seq.size());
  for (const Token& tok : seq.tokens) {
    const int begin = static_cast<int>(enc.ids.size());
    const std::vector<int> piece_ids = encode_token_text(tok.text, model);
    enc.ids.insert(enc.ids.end(), piece_ids.begin(), piece_ids.end());
    enc.spans.emplace_back(begin, static_cast<int>(enc.ids.size()));
  }
  return enc;
}

std::vector<std::string> decode(const SubtokenEncoding& enc, const SubtokenModel& model) {
  std::vector<std::string> texts;
  texts.reserve(enc.spans.size());
  for (const auto& [begin, end] : enc.spans) {
    std::string text;
    for (int i = begin; i < end; ++i) {
      if (enc.ids[i] == model.unk_id) {
        text += "\xEF\xBF\xBD";  // U+FFFD replacement character
      } else {
        text += model.piece(enc.ids[i]);
      }
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

Json subtoken_model_to_json(const SubtokenModel& model) {
  Json j;
  j["merges"] = Json::array();
  for (const auto& [l, r] : model.merges) j["merges"].push_back(Json::array({l, r}));
  j["vocab"] = Json::object();
  for (const auto& [piece, id] : model.vocab) j["vocab"][piece] = id;
  j["special"] = {{"pad", model.pad_id}, {"unk", model.unk_id}, {"cls", model.cls_id},
                  {"eos", model.eos_id}, {"mask", model.mask_id}};
  j["exhausted"] = model.exhausted;
  return j;
}

SubtokenModel subtoken_model_from_json(const Json& j) {
  for (const char* key : {"merges", "vocab", "special"}) {
    if (!j.contains(key)) throw ParseError("subtoken model missing \"" + std::string(key) + "\"");
  }
  SubtokenModel model;
  for (const auto& m : j["merges"]) {
    if (!m.is_array() || m.size() != 2) throw ParseError("bad merge entry");
    model.merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
  }
  for (const auto& [piece, id] : j["vocab"].items()) {
    model.vocab[piece] = id.get<int>();
  }
  const Json& sp = j["special"];
  model.pad_id = sp.at("pad").get<int>();
  model.unk_id = sp.at("unk").get<int>();
  model.cls_id = sp.at("cls").get<int>();
  model.eos_id = sp.at("eos").get<int>();
  model.mask_id = sp.at("mask").get<int>();
  model.exhausted = j.value("exhausted", false);
  return model;
}

void save_subtoken_model(const std::string& path, const SubtokenModel& model) {
  write_json_file(path, subtoken_model_to_json(model));
}

SubtokenModel load_subtoken_model(const std::string& path) {
  return subtoken_model_from_json(read_json_file(path));
}

}  // namespace bugforge
