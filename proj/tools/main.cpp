// bugforge command-line interface: one binary, one subcommand per pipeline
// stage, every intermediate artifact a file. All randomness flows from
// --seed; flag values beat BUGFORGE_* environment variables, which beat the
// --config file, which beats built-in defaults.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bugforge/annotator.hpp"
#include "bugforge/batching.hpp"
#include "bugforge/bpe.hpp"
#include "bugforge/checkpoint.hpp"
#include "bugforge/classical_mutators.hpp"
#include "bugforge/corpus.hpp"
#include "bugforge/errors.hpp"
#include "bugforge/eval.hpp"
#include "bugforge/jsonl.hpp"
#include "bugforge/tokenizer.hpp"
#include "bugforge/trainer.hpp"

namespace {

using bugforge::Json;

void log_line(const std::string& what, const Json& detail) {
  std::cerr << what << ": " << detail.dump() << '\n';
}

void log_issues(const std::vector<std::string>& issues, std::size_t cap = 10) {
  for (std::size_t i = 0; i < issues.size() && i < cap; ++i) {
    std::cerr << "note: " << issues[i] << '\n';
  }
  if (issues.size() > cap) {
    std::cerr << "note: " << issues.size() - cap << " further issues suppressed\n";
  }
}

std::string sibling_path(const std::string& path, const std::string& tag) {
  std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + tag);
  out += p.extension();
  return out.string();
}

// ---------------------------------------------------------------------------
// preprocess: corpus -> splits + subtoken model + call vocabulary

struct PreprocessOpts {
  std::string input, out_dir, manifest;
  std::uint64_t seed = 1;
  std::size_t merges = 10000;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::size_t max_len = 250;
  std::size_t top_calls = 0;
  bool strict = false;
};

void run_preprocess(const PreprocessOpts& opt) {
  namespace fs = std::filesystem;
  log_line("resolved config", Json{{"input", opt.input},
                                   {"out_dir", opt.out_dir},
                                   {"seed", opt.seed},
                                   {"merges", opt.merges},
                                   {"ratios", opt.ratios},
                                   {"max_len", opt.max_len},
                                   {"top_calls", opt.top_calls},
                                   {"manifest", opt.manifest},
                                   {"strict", opt.strict}});
  fs::create_directories(opt.out_dir);

  bugforge::Corpus corpus = bugforge::load_corpus(opt.input, opt.strict);
  const std::size_t loaded = corpus.records.size();
  bugforge::deduplicate(corpus);

  // Records whose source does not lex cannot flow further.
  std::size_t parse_dropped = 0;
  {
    std::vector<bugforge::FunctionRecord> kept;
    kept.reserve(corpus.records.size());
    for (auto& rec : corpus.records) {
      try {
        bugforge::tokenize(rec.source);
        kept.push_back(std::move(rec));
      } catch (const bugforge::ParseError& e) {
        if (opt.strict) throw;
        corpus.issues.push_back(rec.id + ": " + e.what());
        ++parse_dropped;
      }
    }
    corpus.records = std::move(kept);
  }

  bugforge::SplitResult split =
      opt.manifest.empty()
          ? bugforge::split_corpus(corpus, opt.ratios[0], opt.ratios[1], opt.ratios[2], opt.seed)
          : bugforge::apply_split_manifest(corpus, opt.manifest);

  std::vector<bugforge::TokenSequence> train_seqs;
  train_seqs.reserve(split.train.records.size());
  for (const auto& rec : split.train.records) train_seqs.push_back(bugforge::tokenize(rec.source));

  const bugforge::SubtokenModel subtok = bugforge::train_bpe(train_seqs, opt.merges);
  const bugforge::CallVocabulary call_vocab =
      bugforge::build_call_vocabulary(train_seqs, opt.top_calls);

  const auto subtoken_length = [&](const bugforge::FunctionRecord& rec) {
    return bugforge::encode(bugforge::tokenize(rec.source), subtok).length();
  };
  const auto train_stats = bugforge::filter_by_length(split.train, opt.max_len, subtoken_length);
  const auto val_stats = bugforge::filter_by_length(split.validate, opt.max_len, subtoken_length);
  const auto test_stats = bugforge::filter_by_length(split.test, opt.max_len, subtoken_length);

  bugforge::write_split_manifest((fs::path(opt.out_dir) / "split.json").string(), split);
  bugforge::save_subtoken_model((fs::path(opt.out_dir) / "subtokens.json").string(), subtok);
  bugforge::write_json_file((fs::path(opt.out_dir) / "call_vocab.json").string(),
                            bugforge::call_vocabulary_to_json(call_vocab));
  bugforge::write_corpus((fs::path(opt.out_dir) / "train.jsonl").string(), split.train);
  bugforge::write_corpus((fs::path(opt.out_dir) / "validate.jsonl").string(), split.validate);
  bugforge::write_corpus((fs::path(opt.out_dir) / "test.jsonl").string(), split.test);

  log_issues(corpus.issues);
  log_line("preprocess",
           Json{{"loaded", loaded},
                {"malformed_skipped", corpus.malformed_skipped},
                {"duplicates_removed", corpus.duplicates_removed},
                {"parse_dropped", parse_dropped},
                {"seed", opt.seed},
                {"merges", subtok.merges.size()},
                {"merge_exhausted", subtok.exhausted},
                {"vocab_size", subtok.vocab_size()},
                {"call_vocab_size", call_vocab.names.size()},
                {"train", Json{{"kept", train_stats.kept}, {"overlength", train_stats.dropped}}},
                {"validate", Json{{"kept", val_stats.kept}, {"overlength", val_stats.dropped}}},
                {"test", Json{{"kept", test_stats.kept}, {"overlength", test_stats.dropped}}},
                {"out_dir", opt.out_dir}});
}

// ---------------------------------------------------------------------------
// annotate: corpus split -> per-function mutation targets

struct AnnotateOpts {
  std::string input, output, bug_type = "bor-weak", call_vocab;
  bool strict = false;
};

void run_annotate(const AnnotateOpts& opt) {
  log_line("resolved config", Json{{"input", opt.input},
                                   {"output", opt.output},
                                   {"bug_type", opt.bug_type},
                                   {"call_vocab", opt.call_vocab},
                                   {"strict", opt.strict}});
  const bugforge::BugType bug_type = bugforge::bug_type_from_string(opt.bug_type);
  std::optional<bugforge::CallVocabulary> vocab;
  if (!opt.call_vocab.empty()) {
    vocab = bugforge::call_vocabulary_from_json(bugforge::read_json_file(opt.call_vocab));
  }
  if (bug_type == bugforge::BugType::apimisuse && !vocab) {
    throw bugforge::ConfigError("apimisuse annotation needs --call-vocab");
  }

  const bugforge::Corpus corpus = bugforge::load_corpus(opt.input, opt.strict);
  const bugforge::AnnotateResult result =
      bugforge::annotate_corpus(corpus, bug_type, vocab ? &*vocab : nullptr, opt.strict);
  bugforge::write_annotated(opt.output, result.functions);

  std::size_t with_targets = 0;
  std::size_t total_targets = 0;
  for (const auto& fn : result.functions) {
    with_targets += fn.targets.empty() ? 0 : 1;
    total_targets += fn.targets.size();
  }
  log_issues(result.issues);
  log_line("annotate", Json{{"bug_type", opt.bug_type},
                            {"functions", result.functions.size()},
                            {"parse_failures", result.parse_failures},
                            {"with_targets", with_targets},
                            {"total_targets", total_targets},
                            {"output", opt.output}});
}

// ---------------------------------------------------------------------------
// gen-static: annotated functions -> fixed mutant/real example pairs

struct GenStaticOpts {
  std::string input, output;
  int multiplicity = 1;
  std::uint64_t seed = 1;
  bool strict = false;
};

void run_gen_static(const GenStaticOpts& opt) {
  log_line("resolved config", Json{{"input", opt.input},
                                   {"output", opt.output},
                                   {"multiplicity", opt.multiplicity},
                                   {"seed", opt.seed},
                                   {"strict", opt.strict}});
  std::vector<std::string> issues;
  const std::vector<bugforge::AnnotatedFunction> fns =
      bugforge::load_annotated(opt.input, opt.strict, &issues);
  bugforge::RngSuite rngs(opt.seed);
  const std::vector<bugforge::StaticExample> examples =
      bugforge::generate_static(fns, opt.multiplicity, rngs.stream("static"));
  bugforge::write_example_set(opt.output, examples);

  std::size_t buggy = 0;
  for (const auto& ex : examples) buggy += ex.label;
  log_issues(issues);
  log_line("gen-static", Json{{"functions", fns.size()},
                              {"multiplicity", opt.multiplicity},
                              {"seed", opt.seed},
                              {"examples", examples.size()},
                              {"buggy", buggy},
                              {"output", opt.output}});
}

// ---------------------------------------------------------------------------
// train / finetune

struct TrainOpts {
  std::string train_path, val_path, subtokens, call_vocab, static_examples;
  std::string checkpoint_out, log_path;
  std::string config_path, mode, bug_type;
  std::uint64_t seed = 0;
  long long total_steps = 0, warmup_steps = -1;
  double peak_lr = 0, lambda_fixed = 0;
  std::size_t token_budget = 0;
  bool strict = false;
  // which optional overrides were actually given
  bool has_seed = false, has_mode = false, has_bug_type = false, has_total = false,
       has_warmup = false, has_lr = false, has_lambda = false, has_budget = false;
};

bugforge::StepHook make_log_hook(std::ofstream& log_stream, bool enabled) {
  if (!enabled) return nullptr;
  return [&log_stream](const bugforge::StepRecord& rec) {
    Json row{{"step", rec.step},       {"epoch", rec.epoch}, {"L", rec.loss},
             {"L_MLM", rec.loss_mlm},  {"L_D", rec.loss_d},  {"lr", rec.lr},
             {"lambda", rec.lambda}};
    if (rec.val_loss) {
      row["val_loss"] = *rec.val_loss;
      row["val_classification"] = *rec.val_classification;
      row["val_localization"] = *rec.val_localization;
    }
    log_stream << row.dump() << '\n';
  };
}

void run_train(const TrainOpts& opt) {
  bugforge::TrainConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = bugforge::train_config_from_json(bugforge::read_json_file(opt.config_path));
  }
  if (opt.has_mode) cfg.mode = bugforge::train_mode_from_string(opt.mode);
  if (opt.has_bug_type) cfg.bug_type = bugforge::bug_type_from_string(opt.bug_type);
  if (opt.has_seed) cfg.seed = opt.seed;
  if (opt.has_total) cfg.total_steps = opt.total_steps;
  if (opt.has_warmup) cfg.warmup_steps = opt.warmup_steps;
  if (opt.has_lr) cfg.peak_lr = opt.peak_lr;
  if (opt.has_lambda) cfg.lambda_fixed = opt.lambda_fixed;
  if (opt.has_budget) cfg.token_budget = opt.token_budget;
  cfg.validate();
  log_line("resolved config", bugforge::train_config_to_json(cfg));

  const bugforge::SubtokenModel subtok = bugforge::load_subtoken_model(opt.subtokens);
  std::optional<bugforge::CallVocabulary> vocab;
  if (!opt.call_vocab.empty()) {
    vocab = bugforge::call_vocabulary_from_json(bugforge::read_json_file(opt.call_vocab));
  }
  if (cfg.bug_type == bugforge::BugType::apimisuse && !vocab) {
    throw bugforge::ConfigError("apimisuse training needs --call-vocab");
  }

  std::vector<std::string> issues;
  std::vector<bugforge::AnnotatedFunction> val_fns;
  if (!opt.val_path.empty()) val_fns = bugforge::load_annotated(opt.val_path, opt.strict, &issues);

  std::ofstream log_stream;
  if (!opt.log_path.empty()) {
    log_stream.open(opt.log_path);
    if (!log_stream) throw bugforge::IoError("cannot open log file " + opt.log_path);
  }
  const bugforge::StepHook hook = make_log_hook(log_stream, !opt.log_path.empty());

  bugforge::TrainState state = bugforge::make_train_state(cfg, subtok);
  bugforge::TrainResult result;
  if (cfg.mode == bugforge::TrainMode::static_examples) {
    if (opt.static_examples.empty()) {
      throw bugforge::ConfigError("static mode needs --static-examples");
    }
    const std::vector<bugforge::StaticExample> examples =
        bugforge::load_example_set(opt.static_examples, opt.strict, &issues);
    result = bugforge::train_static(state, examples, val_fns, subtok, vocab ? &*vocab : nullptr,
                                    hook, &issues);
  } else {
    if (opt.train_path.empty()) throw bugforge::ConfigError("dynamic/contextual mode needs --train");
    const std::vector<bugforge::AnnotatedFunction> train_fns =
        bugforge::load_annotated(opt.train_path, opt.strict, &issues);
    result = bugforge::train(state, train_fns, val_fns, subtok, vocab ? &*vocab : nullptr, hook);
  }

  bugforge::Checkpoint ckpt{std::move(state), subtok, vocab};
  bugforge::save_checkpoint(opt.checkpoint_out, ckpt);
  std::string best_path;
  if (result.best_detector) {
    bugforge::Checkpoint best = ckpt;
    best.state.detector = *result.best_detector;
    best_path = sibling_path(opt.checkpoint_out, ".best");
    bugforge::save_checkpoint(best_path, best);
  }

  log_issues(issues);
  Json summary{{"steps", result.steps},
               {"final_loss", result.final_loss},
               {"checkpoint", opt.checkpoint_out}};
  if (result.best_val_step >= 0) {
    summary["best_val_loss"] = result.best_val_loss;
    summary["best_val_step"] = result.best_val_step;
    summary["best_checkpoint"] = best_path;
  }
  log_line("train", summary);
}

struct FinetuneOpts {
  std::string checkpoint_in, train_path, checkpoint_out, log_path;
  long long n_mutants = 0;
  double finetune_lr = 0;
  bool has_lr = false;
  bool strict = false;
};

void run_finetune(const FinetuneOpts& opt) {
  bugforge::Checkpoint ckpt = bugforge::load_checkpoint(opt.checkpoint_in);
  if (opt.has_lr) ckpt.state.cfg.finetune_lr = opt.finetune_lr;
  log_line("resolved config", bugforge::train_config_to_json(ckpt.state.cfg));

  std::vector<std::string> issues;
  const std::vector<bugforge::AnnotatedFunction> fns =
      bugforge::load_annotated(opt.train_path, opt.strict, &issues);

  std::ofstream log_stream;
  if (!opt.log_path.empty()) {
    log_stream.open(opt.log_path);
    if (!log_stream) throw bugforge::IoError("cannot open log file " + opt.log_path);
  }
  const bugforge::StepHook hook = make_log_hook(log_stream, !opt.log_path.empty());

  const bugforge::TrainResult result =
      bugforge::finetune(ckpt.state, fns, opt.n_mutants, ckpt.subtok, hook);
  bugforge::save_checkpoint(opt.checkpoint_out, ckpt);

  log_issues(issues);
  log_line("finetune", Json{{"n_mutants", opt.n_mutants},
                            {"steps", result.steps},
                            {"final_loss", result.final_loss},
                            {"checkpoint", opt.checkpoint_out}});
}

// ---------------------------------------------------------------------------
// evaluate / cross-eval

struct EvaluateOpts {
  std::string checkpoint, examples, report, predictions;
  bool paired = false;
  bool strict = false;
};

void run_evaluate(const EvaluateOpts& opt) {
  log_line("resolved config", Json{{"checkpoint", opt.checkpoint},
                                   {"examples", opt.examples},
                                   {"paired", opt.paired},
                                   {"strict", opt.strict}});
  const bugforge::LoadedModel model = bugforge::load_model(opt.checkpoint);
  std::vector<std::string> issues;
  const std::vector<bugforge::StaticExample> examples =
      opt.paired ? bugforge::load_paired_benchmark(opt.examples, opt.strict, &issues)
                 : bugforge::load_example_set(opt.examples, opt.strict, &issues);
  const bugforge::MetricsReport report = bugforge::evaluate_detector(model, examples, &issues);

  Json j = bugforge::metrics_to_json(report);
  j["checkpoint"] = opt.checkpoint;
  j["examples"] = opt.examples;
  if (!opt.report.empty()) {
    bugforge::write_json_file(opt.report, j);
    log_line("evaluate", j);
  } else {
    std::cout << j.dump(2) << '\n';
  }
  if (!opt.predictions.empty()) bugforge::write_predictions(opt.predictions, report.predictions);
  log_issues(issues);
}

struct CrossEvalOpts {
  std::vector<std::string> models, sets;
  std::string output;
  bool paired = false;
  bool strict = false;
};

void run_cross_eval(const CrossEvalOpts& opt) {
  log_line("resolved config", Json{{"models", opt.models},
                                   {"sets", opt.sets},
                                   {"paired", opt.paired},
                                   {"strict", opt.strict}});
  std::vector<bugforge::LoadedModel> models;
  for (const auto& spec : opt.models) {
    const auto eq = spec.find('=');
    models.push_back(bugforge::load_model(spec.substr(eq + 1), spec.substr(0, eq)));
  }
  std::vector<bugforge::NamedExampleSet> sets;
  std::vector<std::string> issues;
  for (const auto& spec : opt.sets) {
    const auto eq = spec.find('=');
    bugforge::NamedExampleSet set;
    set.name = spec.substr(0, eq);
    set.examples = opt.paired
                       ? bugforge::load_paired_benchmark(spec.substr(eq + 1), opt.strict, &issues)
                       : bugforge::load_example_set(spec.substr(eq + 1), opt.strict, &issues);
    sets.push_back(std::move(set));
  }

  const Json matrix = bugforge::cross_evaluate(models, sets, &issues);
  if (!opt.output.empty()) {
    bugforge::write_json_file(opt.output, matrix);
  } else {
    std::cout << matrix.dump(2) << '\n';
  }
  std::cerr << "classification accuracy\n"
            << bugforge::cross_table(matrix, "classification") << "localization accuracy\n"
            << bugforge::cross_table(matrix, "localization");
  log_issues(issues);
}

// ---------------------------------------------------------------------------
// mutate: one-shot demo of a single mutation

struct MutateOpts {
  std::string input, id, checkpoint;
  int target = 0;
  std::uint64_t seed = 1;
  bool contextual = false;
  bool strict = false;
};

void run_mutate(const MutateOpts& opt) {
  log_line("resolved config", Json{{"input", opt.input},
                                   {"id", opt.id},
                                   {"target", opt.target},
                                   {"seed", opt.seed},
                                   {"contextual", opt.contextual},
                                   {"checkpoint", opt.checkpoint}});
  std::vector<std::string> issues;
  const std::vector<bugforge::AnnotatedFunction> fns =
      bugforge::load_annotated(opt.input, opt.strict, &issues);
  if (fns.empty()) throw bugforge::ConfigError("no annotated functions in " + opt.input);

  const bugforge::AnnotatedFunction* fn = &fns.front();
  if (!opt.id.empty()) {
    fn = nullptr;
    for (const auto& f : fns) {
      if (f.record.id == opt.id) {
        fn = &f;
        break;
      }
    }
    if (!fn) throw bugforge::ConfigError("no function with id \"" + opt.id + "\"");
  }
  if (fn->targets.empty()) {
    throw bugforge::ConfigError("function \"" + fn->record.id + "\" has no mutation targets");
  }
  if (opt.target < 0 || static_cast<std::size_t>(opt.target) >= fn->targets.size()) {
    throw bugforge::ConfigError("target index out of range (function has " +
                                std::to_string(fn->targets.size()) + " targets)");
  }
  const bugforge::TargetAnnotation& target = fn->targets[static_cast<std::size_t>(opt.target)];

  std::vector<std::string> masked;
  for (const auto& tok : fn->tokens.tokens) masked.push_back(tok.text);
  masked[static_cast<std::size_t>(target.index)] = bugforge::kMaskText;

  std::vector<double> probs;
  bugforge::RngSuite rngs(opt.seed);
  if (opt.contextual) {
    if (opt.checkpoint.empty()) throw bugforge::ConfigError("--contextual needs --checkpoint");
    const bugforge::Checkpoint ckpt = bugforge::load_checkpoint(opt.checkpoint);
    if (!ckpt.state.mutator) {
      throw bugforge::ConfigError("checkpoint has no contextual mutator: " + opt.checkpoint);
    }
    const bugforge::SubtokenEncoding enc = bugforge::encode(fn->tokens, ckpt.subtok);
    bugforge::MlmItem item;
    bugforge::SubtokenEncoding masked_enc =
        bugforge::mask_targets(enc, target.index, ckpt.subtok);
    item.mask_pos = masked_enc.first_subtoken(static_cast<std::size_t>(target.index));
    item.input.ids = std::move(masked_enc.ids);
    item.input.positions =
        bugforge::position_ids(static_cast<int>(item.input.ids.size()),
                               ckpt.state.cfg.mutator.max_positions, /*augment=*/false, nullptr);
    item.candidates = target.candidates;
    item.original = fn->tokens.tokens[static_cast<std::size_t>(target.index)].text;
    const bugforge::MlmForward fwd = bugforge::mlm_forward(
        *ckpt.state.mutator, {item}, ckpt.subtok, /*train_mode=*/false, nullptr);
    probs = fwd.restricted[0];
  } else {
    probs.assign(target.candidates.size(), 1.0 / static_cast<double>(target.candidates.size()));
  }

  const std::size_t choice = bugforge::sample_replacement(probs, rngs.stream("replacements"));
  Json distribution = Json::array();
  for (std::size_t i = 0; i < target.candidates.size(); ++i) {
    distribution.push_back(Json{{"token", target.candidates[i]}, {"prob", probs[i]}});
  }
  const Json out{{"masked", masked},
                 {"distribution", distribution},
                 {"sampled", target.candidates[choice]},
                 {"seed", opt.seed}};
  std::cout << out.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bugforge: learn to inject and localize single-token bugs"};
  app.require_subcommand(1);

  bool deterministic = false;
  app.add_flag("--deterministic", deterministic,
               "force single-threaded execution (execution is single-threaded regardless; "
               "the flag is accepted for script compatibility)")
      ->envname("BUGFORGE_DETERMINISTIC");

  // preprocess
  PreprocessOpts pre;
  {
    CLI::App* cmd = app.add_subcommand("preprocess",
                                       "split a corpus, learn subtokens, collect call vocabulary");
    cmd->add_option("--input", pre.input, "corpus JSONL with {id, source, language}")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", pre.out_dir, "directory for splits and models")->required();
    cmd->add_option("--seed", pre.seed, "split shuffle seed")->envname("BUGFORGE_SEED");
    cmd->add_option("--merges", pre.merges, "subtoken merge count");
    cmd->add_option("--ratios", pre.ratios, "train/validate/test ratios")->expected(3);
    cmd->add_option("--max-len", pre.max_len, "max subtokens per function, sentinels included");
    cmd->add_option("--top-calls", pre.top_calls, "cap call vocabulary size (0 = keep all)");
    cmd->add_option("--manifest", pre.manifest, "reuse an existing split manifest")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--strict", pre.strict, "fail on the first malformed record");
    cmd->callback([&] { run_preprocess(pre); });
  }

  // annotate
  AnnotateOpts ann;
  {
    CLI::App* cmd = app.add_subcommand("annotate", "mark mutation targets and candidates");
    cmd->add_option("--input", ann.input, "corpus split JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output", ann.output, "annotated JSONL")->required();
    cmd->add_option("--bug-type", ann.bug_type, "bug family to annotate")
        ->check(CLI::IsMember({"bor-weak", "bor-strong", "varmisuse", "apimisuse"}))
        ->envname("BUGFORGE_BUG_TYPE");
    cmd->add_option("--call-vocab", ann.call_vocab, "call vocabulary JSON (apimisuse)")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--strict", ann.strict, "fail on the first malformed record");
    cmd->callback([&] { run_annotate(ann); });
  }

  // gen-static
  GenStaticOpts gen;
  {
    CLI::App* cmd = app.add_subcommand("gen-static", "generate a fixed mutant/real example set");
    cmd->add_option("--input", gen.input, "annotated JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output", gen.output, "example set JSONL")->required();
    cmd->add_option("--multiplicity", gen.multiplicity, "distinct mutants per function")
        ->check(CLI::IsMember({1, 3}))
        ->envname("BUGFORGE_MULTIPLICITY");
    cmd->add_option("--seed", gen.seed, "sampling seed")->envname("BUGFORGE_SEED");
    cmd->add_flag("--strict", gen.strict, "fail on the first malformed record");
    cmd->callback([&] { run_gen_static(gen); });
  }

  // train
  TrainOpts tr;
  {
    CLI::App* cmd = app.add_subcommand("train", "train a detector (and mutator, in contextual mode)");
    cmd->add_option("--train", tr.train_path, "annotated training JSONL")->check(CLI::ExistingFile);
    cmd->add_option("--val", tr.val_path, "annotated validation JSONL")->check(CLI::ExistingFile);
    cmd->add_option("--subtokens", tr.subtokens, "subtoken model JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--call-vocab", tr.call_vocab, "call vocabulary JSON (apimisuse)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--static-examples", tr.static_examples, "example set JSONL (static mode)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", tr.checkpoint_out, "output checkpoint path")->required();
    cmd->add_option("--log", tr.log_path, "per-step training log JSONL");
    CLI::Option* config =
        cmd->add_option("--config", tr.config_path, "training config JSON")
            ->check(CLI::ExistingFile)
            ->envname("BUGFORGE_CONFIG");
    (void)config;
    CLI::Option* mode = cmd->add_option("--mode", tr.mode, "training scheme")
                            ->check(CLI::IsMember({"static", "dynamic", "contextual"}))
                            ->envname("BUGFORGE_MODE");
    CLI::Option* bug = cmd->add_option("--bug-type", tr.bug_type, "bug family")
                           ->check(CLI::IsMember({"bor-weak", "bor-strong", "varmisuse", "apimisuse"}))
                           ->envname("BUGFORGE_BUG_TYPE");
    CLI::Option* seed = cmd->add_option("--seed", tr.seed, "root seed")->envname("BUGFORGE_SEED");
    CLI::Option* total = cmd->add_option("--total-steps", tr.total_steps, "optimizer steps");
    CLI::Option* warmup = cmd->add_option("--warmup-steps", tr.warmup_steps, "linear warmup steps");
    CLI::Option* lr = cmd->add_option("--peak-lr", tr.peak_lr, "peak learning rate");
    CLI::Option* lambda = cmd->add_option("--lambda", tr.lambda_fixed,
                                          "fixed detector loss weight (negative = auto-balance)");
    CLI::Option* budget = cmd->add_option("--token-budget", tr.token_budget, "tokens per batch");
    cmd->add_flag("--strict", tr.strict, "fail on the first malformed record");
    cmd->callback([&, mode, bug, seed, total, warmup, lr, lambda, budget] {
      tr.has_mode = mode->count() > 0;
      tr.has_bug_type = bug->count() > 0;
      tr.has_seed = seed->count() > 0;
      tr.has_total = total->count() > 0;
      tr.has_warmup = warmup->count() > 0;
      tr.has_lr = lr->count() > 0;
      tr.has_lambda = lambda->count() > 0;
      tr.has_budget = budget->count() > 0;
      run_train(tr);
    });
  }

  // finetune
  FinetuneOpts ft;
  {
    CLI::App* cmd =
        app.add_subcommand("finetune", "continue detector-only training on classical mutants");
    cmd->add_option("--checkpoint", ft.checkpoint_in, "input checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--train", ft.train_path, "annotated training JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--n-mutants", ft.n_mutants, "mutant examples to train on")->required();
    cmd->add_option("--output", ft.checkpoint_out, "output checkpoint path")->required();
    cmd->add_option("--log", ft.log_path, "per-step training log JSONL");
    CLI::Option* lr = cmd->add_option("--finetune-lr", ft.finetune_lr, "constant learning rate");
    cmd->add_flag("--strict", ft.strict, "fail on the first malformed record");
    cmd->callback([&, lr] {
      ft.has_lr = lr->count() > 0;
      run_finetune(ft);
    });
  }

  // evaluate
  EvaluateOpts ev;
  {
    CLI::App* cmd = app.add_subcommand("evaluate", "score a detector on a labelled example set");
    cmd->add_option("--checkpoint", ev.checkpoint, "detector checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--examples", ev.examples, "example set JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--report", ev.report, "metrics report JSON (stdout when omitted)");
    cmd->add_option("--predictions", ev.predictions, "per-example predictions JSONL");
    cmd->add_flag("--paired", ev.paired, "validate real/buggy pairing before scoring");
    cmd->add_flag("--strict", ev.strict, "fail on the first malformed record");
    cmd->callback([&] { run_evaluate(ev); });
  }

  // cross-eval
  CrossEvalOpts cx;
  {
    const CLI::Validator name_eq_path(
        [](std::string& s) {
          return s.find('=') == std::string::npos ? std::string("expected NAME=PATH") : std::string();
        },
        "NAME=PATH");
    CLI::App* cmd = app.add_subcommand("cross-eval", "score every model against every example set");
    cmd->add_option("--model", cx.models, "model as NAME=CHECKPOINT (repeatable)")
        ->required()
        ->check(name_eq_path);
    cmd->add_option("--set", cx.sets, "example set as NAME=PATH (repeatable)")
        ->required()
        ->check(name_eq_path);
    cmd->add_option("--output", cx.output, "matrix JSON (stdout when omitted)");
    cmd->add_flag("--paired", cx.paired, "validate real/buggy pairing before scoring");
    cmd->add_flag("--strict", cx.strict, "fail on the first malformed record");
    cmd->callback([&] { run_cross_eval(cx); });
  }

  // mutate
  MutateOpts mu;
  {
    CLI::App* cmd = app.add_subcommand("mutate", "demo a single mutation as JSON");
    cmd->add_option("--input", mu.input, "annotated JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--id", mu.id, "function id (default: first function)");
    cmd->add_option("--target", mu.target, "target slot within the function (default: first)");
    cmd->add_option("--seed", mu.seed, "sampling seed")->envname("BUGFORGE_SEED");
    cmd->add_flag("--contextual", mu.contextual, "use a trained mutator instead of uniform");
    cmd->add_option("--checkpoint", mu.checkpoint, "checkpoint with a contextual mutator")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--strict", mu.strict, "fail on the first malformed record");
    cmd->callback([&] { run_mutate(mu); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const bugforge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (deterministic) std::cerr << "note: deterministic single-threaded execution\n";
  return 0;
}
