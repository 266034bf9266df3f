#include "bugforge/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "bugforge/errors.hpp"
#include "bugforge/jsonl.hpp"

namespace bugforge {

double classification_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) throw ConfigError("accuracy: length mismatch");
  if (predicted.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0) == (gold[i] != 0)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double localization_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) throw ConfigError("accuracy: length mismatch");
  std::size_t buggy = 0, hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (gold[i] == 0) continue;
    ++buggy;
    if (predicted[i] == gold[i]) ++hits;
  }
  return buggy == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(buggy);
}

MetricsReport evaluate_detector(const LoadedModel& model, const std::vector<StaticExample>& examples,
                                std::vector<std::string>* issues) {
  const CallVocabulary* vocab = model.call_vocab ? &*model.call_vocab : nullptr;
  MetricsReport report;
  std::vector<int> predicted, gold;
  double nll = 0.0;
  std::size_t n_loss = 0;

  for (const auto& ex : examples) {
    auto note = [&](const std::string& why) {
      if (issues) issues->push_back(ex.source_id + ": " + why);
    };
    DetectorItem item;
    try {
      const TokenSequence seq = tokenize(render(ex.tokens));
      if (seq.size() != ex.tokens.size()) {
        throw ParseError("token texts do not re-tokenize to the same sequence");
      }
      const SubtokenEncoding enc = encode(seq, model.subtok);
      item.input.ids = enc.ids;
      item.input.positions = position_ids(static_cast<int>(enc.ids.size()),
                                          model.detector.enc.cfg.max_positions,
                                          /*augment=*/false, nullptr);
      for (const auto& span : enc.spans) item.first_sub.push_back(span.first);
      item.mask.push_back(0);
      for (const auto& t : annotate(seq, model.bug_type, vocab)) item.mask.push_back(t.index);
    } catch (const Error& e) {
      note(e.what());
      ++report.n_skipped;
      continue;
    }

    // A gold location outside the rebuilt target set cannot be pointed at:
    // the example still counts, as a guaranteed localization miss, but its
    // loss term is undefined and left out of the mean.
    const bool gold_reachable =
        std::find(item.mask.begin(), item.mask.end(), ex.gold_location) != item.mask.end();
    item.gold = gold_reachable ? ex.gold_location : 0;
    if (!gold_reachable) note("gold location " + std::to_string(ex.gold_location) +
                              " is not a recoverable target; scored as a miss");

    const DetectorForward fwd = detector_forward(model.detector, {item}, /*train_mode=*/false, nullptr);
    if (gold_reachable) {
      nll += fwd.loss;
      ++n_loss;
    }
    const int pred = predict(fwd.probs[0], item.mask);
    predicted.push_back(pred);
    gold.push_back(ex.gold_location);

    Prediction p;
    p.id = ex.source_id;
    p.is_buggy = pred != 0;
    p.location = pred;
    p.confidence = fwd.probs[0][static_cast<std::size_t>(pred)];
    report.predictions.push_back(std::move(p));
    if (ex.label == 1) ++report.n_buggy;
  }

  report.n_examples = predicted.size();
  report.loss = n_loss == 0 ? 0.0 : nll / static_cast<double>(n_loss);
  report.classification_acc = classification_accuracy(predicted, gold);
  report.localization_acc = localization_accuracy(predicted, gold);
  return report;
}

Json metrics_to_json(const MetricsReport& report) {
  return Json{{"n_examples", report.n_examples},
              {"n_buggy", report.n_buggy},
              {"n_skipped", report.n_skipped},
              {"loss", report.loss},
              {"classification_accuracy", report.classification_acc},
              {"localization_accuracy", report.localization_acc}};
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::vector<Json> rows;
  rows.reserve(predictions.size());
  for (const auto& p : predictions) {
    rows.push_back(Json{{"id", p.id},
                        {"is_buggy", p.is_buggy},
                        {"location", p.location},
                        {"confidence", p.confidence}});
  }
  write_jsonl(path, rows);
}

Json cross_evaluate(const std::vector<LoadedModel>& models, const std::vector<NamedExampleSet>& sets,
                    std::vector<std::string>* issues) {
  Json matrix;
  matrix["models"] = Json::array();
  matrix["sets"] = Json::array();
  for (const auto& m : models) matrix["models"].push_back(m.name);
  for (const auto& s : sets) matrix["sets"].push_back(s.name);
  Json cells = Json::object();
  for (const auto& m : models) {
    Json row = Json::object();
    for (const auto& s : sets) {
      const MetricsReport report = evaluate_detector(m, s.examples, issues);
      Json cell = metrics_to_json(report);
      cell.erase("n_buggy");
      row[s.name] = std::move(cell);
    }
    cells[m.name] = std::move(row);
  }
  matrix["cells"] = std::move(cells);
  return matrix;
}

std::string cross_table(const Json& matrix, const std::string& metric) {
  const std::string key = metric + "_accuracy";
  std::size_t name_w = 5;  // "model"
  for (const auto& m : matrix.at("models")) {
    name_w = std::max(name_w, m.get<std::string>().size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w + 2)) << "model";
  for (const auto& s : matrix.at("sets")) {
    out << std::setw(std::max<int>(10, static_cast<int>(s.get<std::string>().size()) + 2))
        << s.get<std::string>();
  }
  out << '\n';
  for (const auto& m : matrix.at("models")) {
    const std::string name = m.get<std::string>();
    out << std::setw(static_cast<int>(name_w + 2)) << name;
    for (const auto& s : matrix.at("sets")) {
      const std::string set_name = s.get<std::string>();
      const double value = matrix.at("cells").at(name).at(set_name).at(key).get<double>();
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << value;
      out << std::setw(std::max<int>(10, static_cast<int>(set_name.size()) + 2)) << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

std::vector<StaticExample> load_paired_benchmark(const std::string& path, bool strict,
                                                 std::vector<std::string>* issues) {
  std::vector<StaticExample> examples = load_example_set(path, strict, issues);

  // Index the real (unmodified) variant of each function.
  std::map<std::string, const StaticExample*> reals;
  for (const auto& ex : examples) {
    if (ex.label == 0) reals.emplace(ex.source_id, &ex);
  }

  // Validate first, move second: the reals index points into `examples`.
  std::vector<bool> keep(examples.size(), false);
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const StaticExample& ex = examples[n];
    auto reject = [&](const std::string& why) {
      const std::string msg = ex.source_id + ": " + why;
      if (strict) throw ParseError(msg);
      if (issues) issues->push_back(msg);
    };
    if (ex.label == 0) {
      keep[n] = true;
      continue;
    }
    const auto it = reals.find(ex.source_id);
    if (it == reals.end()) {
      reject("buggy record has no paired real record");
      continue;
    }
    const StaticExample& real = *it->second;
    if (real.tokens.size() != ex.tokens.size()) {
      reject("paired records differ in length (" + std::to_string(real.tokens.size()) + " vs " +
             std::to_string(ex.tokens.size()) + ")");
      continue;
    }
    std::vector<int> diffs;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (ex.tokens.tokens[i].text != real.tokens.tokens[i].text) diffs.push_back(static_cast<int>(i));
    }
    if (diffs.size() != 1) {
      reject("paired records differ in " + std::to_string(diffs.size()) + " tokens; expected exactly 1");
      continue;
    }
    if (diffs[0] != ex.gold_location) {
      reject("differing token is at index " + std::to_string(diffs[0]) +
             " but the record claims " + std::to_string(ex.gold_location));
      continue;
    }
    keep[n] = true;
  }

  std::vector<StaticExample> kept;
  kept.reserve(examples.size());
  for (std::size_t n = 0; n < examples.size(); ++n) {
    if (keep[n]) kept.push_back(std::move(examples[n]));
  }
  return kept;
}

}  // namespace bugforge
