#include "bugforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "bugforge/errors.hpp"
#include "bugforge/jsonl.hpp"
#include "bugforge/rng.hpp"

namespace bugforge {

Corpus load_corpus(const std::string& path, bool strict) {
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  auto stats = for_each_jsonl(path, strict, [&](std::size_t lineno, const Json& j) {
    auto fail = [&](const std::string& why) {
      const std::string msg = path + ":" + std::to_string(lineno) + ": " + why;
      if (strict) throw ParseError(msg);
      ++corpus.malformed_skipped;
      corpus.issues.push_back(msg);
    };
    if (!j.is_object() || !j.contains("id") || !j.contains("source") ||
        !j["id"].is_string() || !j["source"].is_string()) {
      fail("record must be an object with string \"id\" and \"source\"");
      return;
    }
    FunctionRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.source = j["source"].get<std::string>();
    rec.language = j.value("language", std::string{});
    if (rec.id.empty() || rec.source.empty()) {
      fail("empty id or source");
      return;
    }
    if (!seen_ids.insert(rec.id).second) {
      fail("duplicate id \"" + rec.id + "\"");
      return;
    }
    corpus.records.push_back(std::move(rec));
  });
  corpus.malformed_skipped += stats.skipped;
  corpus.issues.insert(corpus.issues.end(), stats.issues.begin(), stats.issues.end());
  return corpus;
}

namespace {

// Dedup key: whitespace runs collapse to one space so that reformatted
// copies (indentation, line wrapping) hash together, while any real code
// change keeps records distinct.
std::string normalized_source(const std::string& source) {
  std::string out;
  out.reserve(source.size());
  bool in_space = true;  // leading whitespace is dropped
  for (char c : source) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

std::size_t deduplicate(Corpus& corpus) {
  std::unordered_set<std::string> seen;
  std::vector<FunctionRecord> kept;
  kept.reserve(corpus.records.size());
  std::size_t removed = 0;
  for (auto& rec : corpus.records) {
    if (seen.insert(normalized_source(rec.source)).second) {
      kept.push_back(std::move(rec));
    } else {
      ++removed;
    }
  }
  corpus.records = std::move(kept);
  corpus.duplicates_removed += removed;
  return removed;
}

SplitResult split_corpus(const Corpus& corpus, double train_ratio, double validate_ratio,
                         double test_ratio, std::uint64_t seed) {
  if (train_ratio < 0 || validate_ratio < 0 || test_ratio < 0 ||
      std::abs(train_ratio + validate_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = corpus.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with our own sampler so the permutation is platform-stable.
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  const auto n_validate = static_cast<std::size_t>(std::floor(n * validate_ratio));
  const auto n_test = static_cast<std::size_t>(std::floor(n * test_ratio));
  const std::size_t n_train = n - n_validate - n_test;

  SplitResult result;
  result.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const FunctionRecord& rec = corpus.records[order[i]];
    if (i < n_train) {
      result.train.records.push_back(rec);
    } else if (i < n_train + n_validate) {
      result.validate.records.push_back(rec);
    } else {
      result.test.records.push_back(rec);
    }
  }
  return result;
}

namespace {

Json id_list(const Corpus& c) {
  Json ids = Json::array();
  for (const auto& r : c.records) ids.push_back(r.id);
  return ids;
}

}  // namespace

void write_split_manifest(const std::string& path, const SplitResult& split) {
  Json manifest;
  manifest["seed"] = split.seed;
  manifest["train"] = id_list(split.train);
  manifest["validate"] = id_list(split.validate);
  manifest["test"] = id_list(split.test);
  write_json_file(path, manifest);
}

SplitResult apply_split_manifest(const Corpus& corpus, const std::string& path) {
  const Json manifest = read_json_file(path);
  for (const char* key : {"seed", "train", "validate", "test"}) {
    if (!manifest.contains(key)) throw ParseError("manifest missing \"" + std::string(key) + "\"");
  }
  std::unordered_map<std::string, const FunctionRecord*> by_id;
  for (const auto& rec : corpus.records) by_id[rec.id] = &rec;

  SplitResult result;
  result.seed = manifest["seed"].get<std::uint64_t>();
  auto fill = [&](const char* key, Corpus& out) {
    for (const auto& id : manifest[key]) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) {
        throw ParseError("manifest id \"" + id.get<std::string>() + "\" not found in corpus");
      }
      out.records.push_back(*it->second);
    }
  };
  fill("train", result.train);
  fill("validate", result.validate);
  fill("test", result.test);
  return result;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::vector<Json> records;
  records.reserve(corpus.records.size());
  for (const auto& rec : corpus.records) {
    records.push_back(Json{{"id", rec.id}, {"source", rec.source}, {"language", rec.language}});
  }
  write_jsonl(path, records);
}

FilterStats filter_by_length(Corpus& corpus, std::size_t max_len,
                             const std::function<std::size_t(const FunctionRecord&)>& length_of) {
  FilterStats stats;
  std::vector<FunctionRecord> kept;
  kept.reserve(corpus.records.size());
  for (auto& rec : corpus.records) {
    if (length_of(rec) <= max_len) {
      kept.push_back(std::move(rec));
      ++stats.kept;
    } else {
      ++stats.dropped;
    }
  }
  corpus.records = std::move(kept);
  return stats;
}

}  // namespace bugforge
