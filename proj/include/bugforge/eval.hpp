#pragma once

#include <string>
#include <vector>

#include "bugforge/checkpoint.hpp"
#include "bugforge/classical_mutators.hpp"
#include "bugforge/trainer.hpp"

namespace bugforge {

// Classification: buggy-or-not over all examples (predicting index 0 means
// "not buggy"). Localization: exact token index over buggy examples only.
double classification_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold);
double localization_accuracy(const std::vector<int>& predicted, const std::vector<int>& gold);

struct Prediction {
  std::string id;
  bool is_buggy = false;
  int location = 0;
  double confidence = 0.0;
};

struct MetricsReport {
  std::size_t n_examples = 0;
  std::size_t n_buggy = 0;
  std::size_t n_skipped = 0;  // examples whose targets could not be rebuilt
  double loss = 0.0;
  double classification_acc = 0.0;
  double localization_acc = 0.0;
  std::vector<Prediction> predictions;
};

Json metrics_to_json(const MetricsReport& report);

// Runs the detector over a labelled example set in inference mode.
MetricsReport evaluate_detector(const LoadedModel& model, const std::vector<StaticExample>& examples,
                                std::vector<std::string>* issues = nullptr);

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);

// Evaluates every model against every example set. Returns a JSON object
// with one {classification, localization} matrix entry per (model, set) and
// renders an aligned text table for logs.
struct NamedExampleSet {
  std::string name;
  std::vector<StaticExample> examples;
};

Json cross_evaluate(const std::vector<LoadedModel>& models,
                    const std::vector<NamedExampleSet>& sets,
                    std::vector<std::string>* issues = nullptr);

std::string cross_table(const Json& matrix, const std::string& metric);

// Loads a real/buggy paired benchmark: every buggy record must differ from
// its paired real record in exactly one token, at the annotated index.
std::vector<StaticExample> load_paired_benchmark(const std::string& path, bool strict,
                                                 std::vector<std::string>* issues = nullptr);

}  // namespace bugforge
