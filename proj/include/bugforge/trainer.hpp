#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bugforge/annotator.hpp"
#include "bugforge/batching.hpp"
#include "bugforge/bpe.hpp"
#include "bugforge/classical_mutators.hpp"
#include "bugforge/detector.hpp"
#include "bugforge/mlm_mutator.hpp"

namespace bugforge {

enum class TrainMode {
  static_examples,  // pretrain the detector on a pre-generated example set
  dynamic,          // pipeline with the classical (uniform) mutator
  contextual,       // pipeline with the jointly trained masked-token mutator
};

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::dynamic;
  BugType bug_type = BugType::bor_weak;
  std::uint64_t seed = 1;

  long long total_steps = 100000;
  long long warmup_steps = 10000;
  double peak_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Loss weight on the detector term. Negative means auto-balance: lambda is
  // set to ema(L_MLM)/ema(L_D) every lambda_update_every steps so both terms
  // move the shared objective by comparable amounts.
  double lambda_fixed = -1.0;
  double lambda_ema_alpha = 0.01;
  long long lambda_update_every = 100;
  double lambda_min = 1e-3;
  double lambda_max = 1e3;

  std::size_t token_budget = 12500;
  std::size_t max_len = 250;  // sequences longer than this (in subtokens) are filtered upstream
  std::size_t bucket_width = 64;
  bool augment_positions = true;

  // Pipelined (default): the whole incoming batch trains the detector as
  // reals and is handed to the mutator; its mutants are trained next step, so
  // both models see fixed batch sizes. Off: each batch is coin-split between
  // the two sides and the mutants are trained immediately, which makes the
  // mutator's batch size (and loss) noticeably noisier.
  bool pipelined = true;

  long long val_every = 0;  // 0: max(1, total_steps / 10)
  long long log_every = 1;
  int multiplicity = 1;        // static generation
  double finetune_lr = -1.0;   // < 0: peak_lr / 10

  EncoderConfig detector;
  EncoderConfig mutator;

  void validate() const;
};

Json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

// Linear warmup from 0 to peak at warmup_steps, then linear decay to 0 at
// total_steps. step is 0-based; lr(0) == 0.
double lr_schedule(long long step, long long total_steps, long long warmup_steps, double peak_lr);

double combined_loss(double l_mlm, double l_d, double lambda);

// Adam with bias correction over parallel tensor walks (params, grads, m, v
// must enumerate identical shapes).
void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 const std::vector<TensorRef>& m, const std::vector<TensorRef>& v, long long t,
                 double lr, double beta1, double beta2, double eps);

template <typename ModelT>
struct Adam {
  ModelT m, v;
  long long t = 0;
};

// A function prepared for training: encoding plus pointer bookkeeping.
struct PreparedFunction {
  const AnnotatedFunction* fn = nullptr;
  SubtokenEncoding enc;
  std::vector<int> first_sub;  // per token
  std::vector<int> mask;       // {0} + annotated target indices
};

// A mutant carried from one pipeline step to the next.
struct PendingMutant {
  std::string source_id;
  SubtokenEncoding enc;
  std::vector<int> first_sub;
  std::vector<int> mask;
  int gold = 0;
};

struct StepRecord {
  long long step = 0;
  long long epoch = 0;
  std::vector<std::string> real_ids;             // trained unchanged this step
  std::vector<std::string> mutant_ids;           // mutant sources trained this step
  std::vector<std::string> mutation_source_ids;  // handed to the mutator this step
  double loss = 0, loss_mlm = 0, loss_d = 0;
  double lr = 0, lambda = 1;
  // Present on validation steps only.
  std::optional<double> val_loss, val_localization, val_classification;
};
using StepHook = std::function<void(const StepRecord&)>;

struct TrainState {
  TrainConfig cfg;
  DetectorModel detector;
  std::optional<MutatorModel> mutator;
  Adam<DetectorModel> det_adam;
  std::optional<Adam<MutatorModel>> mut_adam;
  RngSuite rngs;
  long long step = 0;
  double lambda = 1.0;
  // Loss EMAs feeding the auto-balance rule; each initializes from the first
  // value its stream observes.
  double ema_mlm = 0.0, ema_d = 0.0;
  bool ema_mlm_ready = false, ema_d_ready = false;
  // Pipeline carry: mutants generated last step, trained next step.
  std::vector<PendingMutant> carried;
};

// Fresh state: seeded init streams, zeroed heads, no carried mutants. The
// mutator exists only in contextual mode.
TrainState make_train_state(const TrainConfig& cfg, const SubtokenModel& subtok);

PreparedFunction prepare_function(const AnnotatedFunction& fn, const SubtokenModel& subtok);

// One training step. Pipelined: the detector trains on (all incoming reals +
// mutants carried from the previous step) while the whole incoming batch is
// mutated for the next step; the first step of an epoch runs reals-only
// because the carry is empty, and train() clears the carry at epoch ends
// (those mutants are discarded). Non-pipelined: the batch is coin-split and
// the mutants of the mutate half are trained immediately, nothing carried.
// One optimizer update per model per step in either scheme.
StepRecord pipeline_step(TrainState& state, const std::vector<PreparedFunction*>& batch,
                         const SubtokenModel& subtok);

struct TrainResult {
  long long steps = 0;
  double final_loss = 0;
  double best_val_loss = 0;
  long long best_val_step = -1;
  // Parameters at the best validation point (empty when no validation ran).
  std::optional<DetectorModel> best_detector;
};

// A labelled example ready for the detector: encoding plus pointer
// bookkeeping recovered by re-tokenizing the example's token texts.
struct PreparedExample {
  std::string source_id;
  int label = 0;
  int gold = 0;
  SubtokenEncoding enc;
  std::vector<int> first_sub;
  std::vector<int> mask;
};

// Re-tokenizes example texts to rebuild target masks. Examples whose gold
// location is not a recoverable target are skipped with a note in `issues`.
std::vector<PreparedExample> prepare_examples(const std::vector<StaticExample>& examples,
                                              BugType bug_type, const CallVocabulary* vocab,
                                              const SubtokenModel& subtok,
                                              std::vector<std::string>* issues = nullptr);

struct ValMetrics {
  double loss = 0;
  double classification_acc = 0;
  double localization_acc = 0;
};
// Inference-mode pass (no dropout, no position offsets) over prepared examples.
ValMetrics evaluate_items(const DetectorModel& model, const std::vector<PreparedExample>& items);

// Streams the function corpus through pipeline steps (dynamic/contextual
// modes), shuffling batch order each epoch, until total_steps. Validation
// uses a classical single-mutant example set built from val_fns with the
// "validation" stream; vocab is only needed for apimisuse masks.
TrainResult train(TrainState& state, const std::vector<AnnotatedFunction>& train_fns,
                  const std::vector<AnnotatedFunction>& val_fns, const SubtokenModel& subtok,
                  const CallVocabulary* vocab = nullptr, const StepHook& hook = nullptr);

// Static-mode pretraining: detector-only steps over a fixed example set.
TrainResult train_static(TrainState& state, const std::vector<StaticExample>& examples,
                         const std::vector<AnnotatedFunction>& val_fns, const SubtokenModel& subtok,
                         const CallVocabulary* vocab = nullptr, const StepHook& hook = nullptr,
                         std::vector<std::string>* issues = nullptr);

// Detector-only adaptation on classically generated mutants until at least
// n_mutants mutant examples have been trained on (0 = no-op). Uses a constant
// learning rate (cfg.finetune_lr, default peak_lr / 10) since the main
// schedule has usually decayed to zero by now. The mutator, if any, is left
// untouched.
TrainResult finetune(TrainState& state, const std::vector<AnnotatedFunction>& fns,
                     long long n_mutants, const SubtokenModel& subtok,
                     const StepHook& hook = nullptr);

// Builds the DetectorItem for a prepared function or mutant.
DetectorItem detector_item(const PreparedFunction& pf, bool augment, int max_positions,
                           Rng* offset_rng);
DetectorItem detector_item(const PendingMutant& pm, bool augment, int max_positions,
                           Rng* offset_rng);

}  // namespace bugforge
