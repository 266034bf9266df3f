// Python bindings for the main operations: tokenization, annotation, subtoken
// models, batching, the sampling/pointer math, and a one-shot mutation demo.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bugforge/annotator.hpp"
#include "bugforge/batching.hpp"
#include "bugforge/bpe.hpp"
#include "bugforge/classical_mutators.hpp"
#include "bugforge/encoder.hpp"
#include "bugforge/errors.hpp"
#include "bugforge/eval.hpp"
#include "bugforge/mlm_mutator.hpp"
#include "bugforge/rng.hpp"
#include "bugforge/tokenizer.hpp"
#include "bugforge/trainer.hpp"

namespace py = pybind11;
using namespace bugforge;

namespace {

std::vector<std::string> token_texts(const TokenSequence& seq) {
  std::vector<std::string> texts;
  texts.reserve(seq.tokens.size());
  for (const auto& tok : seq.tokens) texts.push_back(tok.text);
  return texts;
}

// Tokenize + annotate in one hop: [(index, bug_type, candidates)].
std::vector<std::tuple<int, std::string, std::vector<std::string>>> annotate_source(
    const std::string& source, const std::string& bug_type,
    const std::vector<std::string>& call_vocab) {
  const TokenSequence seq = tokenize(source);
  CallVocabulary vocab;
  for (const auto& name : call_vocab) {
    vocab.names.push_back(name);
    vocab.counts[name] = 1;
  }
  std::vector<std::tuple<int, std::string, std::vector<std::string>>> out;
  for (const auto& t : annotate(seq, bug_type_from_string(bug_type), &vocab)) {
    out.emplace_back(t.index, to_string(t.bug_type), t.candidates);
  }
  return out;
}

// Uniform classical mutation demo mirroring the CLI `mutate` output.
py::dict mutate_demo(const std::string& source, const std::string& bug_type,
                     std::uint64_t seed) {
  const TokenSequence seq = tokenize(source);
  const std::vector<TargetAnnotation> targets =
      annotate(seq, bug_type_from_string(bug_type), nullptr);
  if (targets.empty()) throw ConfigError("function has no mutation targets");

  RngSuite rngs(seed);
  AnnotatedFunction fn;
  fn.tokens = seq;
  fn.targets = targets;
  const std::size_t target_pos = *sample_target(fn, rngs.stream("targets"));
  const TargetAnnotation& target = targets[target_pos];

  std::vector<std::string> masked = token_texts(seq);
  masked[static_cast<std::size_t>(target.index)] = kMaskText;
  std::vector<double> probs(target.candidates.size(),
                            1.0 / static_cast<double>(target.candidates.size()));
  const std::size_t choice = sample_replacement(probs, rngs.stream("replacements"));

  py::list distribution;
  for (std::size_t i = 0; i < target.candidates.size(); ++i) {
    py::dict entry;
    entry["token"] = target.candidates[i];
    entry["prob"] = probs[i];
    distribution.append(entry);
  }
  py::dict out;
  out["masked"] = masked;
  out["distribution"] = distribution;
  out["sampled"] = target.candidates[choice];
  out["seed"] = seed;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "single-token bug injection and detection core";

  py::register_exception<Error>(m, "BugforgeError");

  py::class_<SubtokenModel>(m, "SubtokenModel")
      .def_property_readonly("vocab_size", &SubtokenModel::vocab_size)
      .def_property_readonly("merge_count",
                             [](const SubtokenModel& model) { return model.merges.size(); })
      .def_readonly("exhausted", &SubtokenModel::exhausted)
      .def("piece", &SubtokenModel::piece);

  m.def(
      "tokenize",
      [](const std::string& source) { return token_texts(tokenize(source)); },
      py::arg("source"),
      "Lex a function into token texts, [CLS]/[EOS] sentinels included.");

  m.def("annotate", &annotate_source, py::arg("source"), py::arg("bug_type"),
        py::arg("call_vocab") = std::vector<std::string>{},
        "Mutation targets of a function as (token_index, bug_type, candidates) tuples.");

  m.def(
      "train_bpe",
      [](const std::vector<std::string>& sources, std::size_t merges) {
        std::vector<TokenSequence> corpus;
        corpus.reserve(sources.size());
        for (const auto& s : sources) corpus.push_back(tokenize(s));
        return train_bpe(corpus, merges);
      },
      py::arg("sources"), py::arg("merges"),
      "Learn a subtoken merge model from function sources.");

  m.def(
      "encode",
      [](const std::string& source, const SubtokenModel& model) {
        const SubtokenEncoding enc = encode(tokenize(source), model);
        return std::make_pair(enc.ids, enc.spans);
      },
      py::arg("source"), py::arg("model"),
      "Subtoken ids and per-token [begin, end) spans for a function.");

  m.def(
      "decode",
      [](const std::vector<int>& ids, const std::vector<std::pair<int, int>>& spans,
         const SubtokenModel& model) {
        SubtokenEncoding enc;
        enc.ids = ids;
        enc.spans = spans;
        return decode(enc, model);
      },
      py::arg("ids"), py::arg("spans"), py::arg("model"),
      "Token texts recovered from a subtoken encoding.");

  m.def(
      "make_length_batches",
      [](const std::vector<std::size_t>& lengths, std::size_t token_budget,
         std::size_t bucket_width) {
        std::vector<std::pair<std::vector<std::size_t>, std::size_t>> out;
        for (const auto& b : make_length_batches(lengths, token_budget, bucket_width)) {
          out.emplace_back(b.indices, b.padded_len);
        }
        return out;
      },
      py::arg("lengths"), py::arg("token_budget") = 12500, py::arg("bucket_width") = 64,
      "Token-budget batches as (indices, padded_len) pairs.");

  m.def(
      "replacement_distribution",
      [](const std::vector<double>& scores) { return replacement_distribution(scores); },
      py::arg("scores"), "Softmax sampling distribution over candidate scores.");

  m.def("pointer_probabilities", &pointer_probabilities, py::arg("scores"), py::arg("mask"),
        "Pointer softmax over the masked token indices; exact zeros elsewhere.");

  m.def("classification_accuracy", &classification_accuracy, py::arg("predicted"),
        py::arg("gold"));
  m.def("localization_accuracy", &localization_accuracy, py::arg("predicted"), py::arg("gold"));

  m.def(
      "count_parameters",
      [](int vocab_size, int hidden, int layers, int heads, int max_positions) {
        EncoderConfig cfg;
        cfg.vocab_size = vocab_size;
        cfg.hidden = hidden;
        cfg.layers = layers;
        cfg.heads = heads;
        cfg.max_positions = max_positions;
        cfg.validate();
        return count_parameters(cfg);
      },
      py::arg("vocab_size"), py::arg("hidden"), py::arg("layers"), py::arg("heads") = 4,
      py::arg("max_positions") = 512, "Trainable parameter count of an encoder configuration.");

  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("total_steps"),
        py::arg("warmup_steps"), py::arg("peak_lr"),
        "Linear warmup to peak_lr, then linear decay to zero.");

  m.def("mutate", &mutate_demo, py::arg("source"), py::arg("bug_type") = "bor-weak",
        py::arg("seed") = 1,
        "One-shot uniform mutation demo: masked tokens, distribution, sampled replacement.");
}
