#include "bugforge/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "bugforge/errors.hpp"

namespace bugforge {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::static_examples: return "static";
    case TrainMode::dynamic: return "dynamic";
    case TrainMode::contextual: return "contextual";
  }
  return "dynamic";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "static") return TrainMode::static_examples;
  if (s == "dynamic") return TrainMode::dynamic;
  if (s == "contextual") return TrainMode::contextual;
  throw ConfigError("unknown training mode \"" + s + "\"");
}

void TrainConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (warmup_steps > total_steps) throw ConfigError("warmup_steps must not exceed total_steps");
  if (peak_lr <= 0) throw ConfigError("peak_lr must be positive");
  if (token_budget < max_len) {
    throw ConfigError("token_budget must be at least max_len, or no batch could hold the longest sequence");
  }
  if (multiplicity != 1 && multiplicity != 3) throw ConfigError("multiplicity must be 1 or 3");
  if (lambda_fixed == 0) throw ConfigError("lambda must be positive (or negative for auto)");
  // vocab_size 0 means "take it from the subtoken model at state creation".
  EncoderConfig det = detector;
  if (det.vocab_size == 0) det.vocab_size = 1;
  det.validate();
  if (mode == TrainMode::contextual) {
    EncoderConfig mut = mutator;
    if (mut.vocab_size == 0) mut.vocab_size = 1;
    mut.validate();
  }
}

double lr_schedule(long long step, long long total_steps, long long warmup_steps, double peak_lr) {
  if (step < 0) throw ConfigError("lr_schedule: negative step");
  if (warmup_steps > 0 && step <= warmup_steps) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (step >= total_steps) return 0.0;
  const long long decay_span = total_steps - warmup_steps;
  if (decay_span <= 0) return 0.0;
  return peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(decay_span);
}

double combined_loss(double l_mlm, double l_d, double lambda) { return l_mlm + lambda * l_d; }

void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 const std::vector<TensorRef>& m, const std::vector<TensorRef>& v, long long t,
                 double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
    throw ConfigError("adam_update: tensor walks differ");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size) throw ConfigError("adam_update: shape mismatch");
    double* p = params[i].data;
    const double* g = grads[i].data;
    double* mi = m[i].data;
    double* vi = v[i].data;
    for (long long j = 0; j < params[i].size; ++j) {
      mi[j] = beta1 * mi[j] + (1.0 - beta1) * g[j];
      vi[j] = beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = mi[j] / bc1;
      const double v_hat = vi[j] / bc2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

TrainState make_train_state(const TrainConfig& cfg, const SubtokenModel& subtok) {
  TrainState state;
  state.cfg = cfg;
  state.cfg.detector.vocab_size = subtok.vocab_size();
  state.cfg.mutator.vocab_size = subtok.vocab_size();
  state.cfg.validate();
  state.cfg.detector.validate();
  if (cfg.mode == TrainMode::contextual) state.cfg.mutator.validate();
  state.rngs = RngSuite(cfg.seed);
  state.detector = make_detector(state.cfg.detector, state.rngs.stream("init_detector"));
  state.det_adam.m = detector_zero_like(state.detector);
  state.det_adam.v = detector_zero_like(state.detector);
  if (cfg.mode == TrainMode::contextual) {
    state.mutator = make_mutator(state.cfg.mutator, state.rngs.stream("init_mutator"));
    state.mut_adam = Adam<MutatorModel>{mutator_zero_like(*state.mutator),
                                        mutator_zero_like(*state.mutator), 0};
  }
  state.lambda = cfg.lambda_fixed > 0 ? cfg.lambda_fixed : 1.0;
  return state;
}

PreparedFunction prepare_function(const AnnotatedFunction& fn, const SubtokenModel& subtok) {
  PreparedFunction pf;
  pf.fn = &fn;
  pf.enc = encode(fn.tokens, subtok);
  pf.first_sub.reserve(pf.enc.spans.size());
  for (const auto& span : pf.enc.spans) pf.first_sub.push_back(span.first);
  pf.mask.push_back(0);
  for (const auto& t : fn.targets) pf.mask.push_back(t.index);
  return pf;
}

namespace {

DetectorItem make_item(const SubtokenEncoding& enc, const std::vector<int>& first_sub,
                       const std::vector<int>& mask, int gold, bool augment, int max_positions,
                       Rng* offset_rng) {
  DetectorItem item;
  item.input.ids = enc.ids;
  item.input.positions =
      position_ids(static_cast<int>(enc.ids.size()), max_positions, augment, offset_rng);
  item.first_sub = first_sub;
  item.mask = mask;
  item.gold = gold;
  return item;
}

PendingMutant make_pending(const PreparedFunction& pf, int token_index,
                           const std::string& replacement, const SubtokenModel& subtok) {
  PendingMutant pm;
  pm.source_id = pf.fn->record.id;
  const TokenSequence mutated = apply_mutation(pf.fn->tokens, token_index, replacement);
  pm.enc = encode(mutated, subtok);
  pm.first_sub.reserve(pm.enc.spans.size());
  for (const auto& span : pm.enc.spans) pm.first_sub.push_back(span.first);
  pm.mask = pf.mask;
  pm.gold = token_index;
  return pm;
}

}  // namespace

DetectorItem detector_item(const PreparedFunction& pf, bool augment, int max_positions,
                           Rng* offset_rng) {
  return make_item(pf.enc, pf.first_sub, pf.mask, 0, augment, max_positions, offset_rng);
}

DetectorItem detector_item(const PendingMutant& pm, bool augment, int max_positions,
                           Rng* offset_rng) {
  return make_item(pm.enc, pm.first_sub, pm.mask, pm.gold, augment, max_positions, offset_rng);
}

StepRecord pipeline_step(TrainState& state, const std::vector<PreparedFunction*>& batch,
                         const SubtokenModel& subtok) {
  const TrainConfig& cfg = state.cfg;
  const bool contextual = cfg.mode == TrainMode::contextual;
  Rng& routing = state.rngs.stream("routing");
  Rng& targets_rng = state.rngs.stream("targets");
  Rng& replacements_rng = state.rngs.stream("replacements");
  Rng& dropout_rng = state.rngs.stream("dropout");
  Rng& offsets_rng = state.rngs.stream("offsets");

  StepRecord rec;
  rec.step = state.step;

  // Pipelined: the whole batch is trained as real code and the whole batch is
  // mutated for the next step, so both sides keep fixed sizes. Non-pipelined:
  // a biased coin splits the batch between the two sides. Functions without
  // annotated targets cannot be mutated and only ever appear as reals.
  std::vector<std::size_t> real_idx, mutate_idx;
  if (cfg.pipelined) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      real_idx.push_back(i);
      if (!batch[i]->fn->targets.empty()) mutate_idx.push_back(i);
    }
  } else {
    std::vector<bool> can_mutate(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) can_mutate[i] = !batch[i]->fn->targets.empty();
    RouteSplit split = route_fifty_fifty(can_mutate, routing);
    real_idx = std::move(split.keep_real);
    mutate_idx = std::move(split.to_mutate);
  }

  // Mutation pass first: it produces next step's carry (pipelined) or this
  // step's mutant examples (non-pipelined).
  std::vector<PendingMutant> fresh;
  double l_mlm = 0.0;
  std::optional<MutatorModel> mut_grads;
  std::optional<MlmForward> mlm_fwd;
  std::vector<MlmItem> mlm_items;
  std::vector<std::pair<const PreparedFunction*, int>> mlm_slots;  // function, target index

  for (std::size_t idx : mutate_idx) {
    rec.mutation_source_ids.push_back(batch[idx]->fn->record.id);
  }
  if (contextual) {
    for (std::size_t idx : mutate_idx) {
      const PreparedFunction& pf = *batch[idx];
      const std::size_t target_pos = *sample_target(*pf.fn, targets_rng);
      const TargetAnnotation& target = pf.fn->targets[target_pos];
      MlmItem item;
      SubtokenEncoding masked = mask_targets(pf.enc, target.index, subtok);
      item.mask_pos = masked.first_subtoken(target.index);
      item.input.ids = std::move(masked.ids);
      item.input.positions =
          position_ids(static_cast<int>(item.input.ids.size()), cfg.mutator.max_positions,
                       cfg.augment_positions, &offsets_rng);
      item.candidates = target.candidates;
      item.original = pf.fn->tokens.tokens[target.index].text;
      mlm_items.push_back(std::move(item));
      mlm_slots.emplace_back(&pf, target.index);
    }
    if (!mlm_items.empty()) {
      mlm_fwd = mlm_forward(*state.mutator, mlm_items, subtok, /*train=*/true, &dropout_rng);
      l_mlm = mlm_fwd->loss;
      for (std::size_t i = 0; i < mlm_items.size(); ++i) {
        const std::size_t choice = sample_replacement(mlm_fwd->restricted[i], replacements_rng);
        fresh.push_back(make_pending(*mlm_slots[i].first, mlm_slots[i].second,
                                     mlm_items[i].candidates[choice], subtok));
      }
    }
  } else {
    for (std::size_t idx : mutate_idx) {
      const PreparedFunction& pf = *batch[idx];
      const std::size_t target_pos = *sample_target(*pf.fn, targets_rng);
      const Mutation m = sample_classical(*pf.fn, target_pos, replacements_rng);
      fresh.push_back(make_pending(pf, m.token_index, m.replacement, subtok));
    }
  }

  // Detector pass: reals plus either the carried mutants (pipelined) or the
  // just-produced ones (non-pipelined).
  const std::vector<PendingMutant>& mutants = cfg.pipelined ? state.carried : fresh;
  std::vector<DetectorItem> det_items;
  for (std::size_t idx : real_idx) {
    det_items.push_back(detector_item(*batch[idx], cfg.augment_positions,
                                      cfg.detector.max_positions, &offsets_rng));
    rec.real_ids.push_back(batch[idx]->fn->record.id);
  }
  for (const PendingMutant& pm : mutants) {
    det_items.push_back(
        detector_item(pm, cfg.augment_positions, cfg.detector.max_positions, &offsets_rng));
    rec.mutant_ids.push_back(pm.source_id);
  }

  double l_d = 0.0;
  DetectorModel det_grads = detector_zero_like(state.detector);
  std::optional<DetectorForward> det_fwd;
  if (!det_items.empty()) {
    det_fwd = detector_forward(state.detector, det_items, /*train=*/true, &dropout_rng);
    l_d = det_fwd->loss;
  }

  // Loss bookkeeping and the lambda balancer (contextual only).
  if (contextual) {
    if (!det_items.empty()) {
      state.ema_d = state.ema_d_ready
                        ? (1 - cfg.lambda_ema_alpha) * state.ema_d + cfg.lambda_ema_alpha * l_d
                        : l_d;
      state.ema_d_ready = true;
    }
    if (!mlm_items.empty()) {
      state.ema_mlm =
          state.ema_mlm_ready
              ? (1 - cfg.lambda_ema_alpha) * state.ema_mlm + cfg.lambda_ema_alpha * l_mlm
              : l_mlm;
      state.ema_mlm_ready = true;
    }
    if (cfg.lambda_fixed > 0) {
      state.lambda = cfg.lambda_fixed;
    } else if (state.step % cfg.lambda_update_every == 0 && state.ema_d_ready &&
               state.ema_mlm_ready && state.ema_d > 0) {
      state.lambda = std::clamp(state.ema_mlm / state.ema_d, cfg.lambda_min, cfg.lambda_max);
    }
  } else {
    state.lambda = 1.0;
  }

  // Backward + optimizer. The detector sees lambda * L_D in contextual mode,
  // plain L_D otherwise; the mutator sees L_MLM.
  const double lr = lr_schedule(state.step, cfg.total_steps, cfg.warmup_steps, cfg.peak_lr);
  if (det_fwd) {
    detector_backward(state.detector, det_items, *det_fwd, contextual ? state.lambda : 1.0,
                      det_grads);
    ++state.det_adam.t;
    adam_update(tensor_refs(state.detector), tensor_refs(det_grads), tensor_refs(state.det_adam.m),
                tensor_refs(state.det_adam.v), state.det_adam.t, lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
  }
  if (mlm_fwd) {
    mut_grads = mutator_zero_like(*state.mutator);
    mlm_backward(*state.mutator, mlm_items, subtok, *mlm_fwd, 1.0, *mut_grads);
    ++state.mut_adam->t;
    adam_update(tensor_refs(*state.mutator), tensor_refs(*mut_grads),
                tensor_refs(state.mut_adam->m), tensor_refs(state.mut_adam->v), state.mut_adam->t,
                lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  }

  if (cfg.pipelined) {
    state.carried = std::move(fresh);
  } else {
    state.carried.clear();
  }
  rec.loss_d = l_d;
  rec.loss_mlm = l_mlm;
  rec.lambda = state.lambda;
  rec.loss = contextual ? combined_loss(l_mlm, l_d, state.lambda) : l_d;
  rec.lr = lr;
  ++state.step;
  return rec;
}

std::vector<PreparedExample> prepare_examples(const std::vector<StaticExample>& examples,
                                              BugType bug_type, const CallVocabulary* vocab,
                                              const SubtokenModel& subtok,
                                              std::vector<std::string>* issues) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto note = [&](const std::string& why) {
      if (issues) issues->push_back(ex.source_id + ": " + why);
    };
    TokenSequence seq;
    try {
      seq = tokenize(render(ex.tokens));
    } catch (const ParseError& e) {
      note(e.what());
      continue;
    }
    if (seq.size() != ex.tokens.size()) {
      note("token texts do not re-tokenize to the same sequence");
      continue;
    }
    PreparedExample pe;
    pe.source_id = ex.source_id;
    pe.label = ex.label;
    pe.gold = ex.gold_location;
    pe.enc = encode(seq, subtok);
    for (const auto& span : pe.enc.spans) pe.first_sub.push_back(span.first);
    pe.mask.push_back(0);
    for (const auto& t : annotate(seq, bug_type, vocab)) pe.mask.push_back(t.index);
    if (std::find(pe.mask.begin(), pe.mask.end(), pe.gold) == pe.mask.end()) {
      note("gold location " + std::to_string(pe.gold) + " is not a recoverable target");
      continue;
    }
    out.push_back(std::move(pe));
  }
  return out;
}

ValMetrics evaluate_items(const DetectorModel& model, const std::vector<PreparedExample>& items) {
  ValMetrics metrics;
  if (items.empty()) return metrics;
  double nll = 0.0;
  std::size_t cls_hits = 0, loc_hits = 0, buggy = 0;
  for (const auto& pe : items) {
    DetectorItem item = make_item(pe.enc, pe.first_sub, pe.mask, pe.gold, /*augment=*/false,
                                  model.enc.cfg.max_positions, nullptr);
    const DetectorForward fwd = detector_forward(model, {item}, /*train=*/false, nullptr);
    nll += fwd.loss;
    const int pred = predict(fwd.probs[0], item.mask);
    if ((pred != 0) == (pe.label == 1)) ++cls_hits;
    if (pe.label == 1) {
      ++buggy;
      if (pred == pe.gold) ++loc_hits;
    }
  }
  metrics.loss = nll / static_cast<double>(items.size());
  metrics.classification_acc = static_cast<double>(cls_hits) / static_cast<double>(items.size());
  metrics.localization_acc = buggy == 0 ? 0.0 : static_cast<double>(loc_hits) / static_cast<double>(buggy);
  return metrics;
}

namespace {

// Shared epoch/validation/bookkeeping loop around a step function.
TrainResult run_steps(
    TrainState& state, std::vector<BatchSpec> batches,
    const std::function<StepRecord(const BatchSpec&)>& run_one,
    const std::vector<PreparedExample>& val_items, const StepHook& hook) {
  const TrainConfig& cfg = state.cfg;
  const long long val_every = cfg.val_every > 0 ? cfg.val_every : std::max<long long>(1, cfg.total_steps / 10);

  TrainResult result;
  result.best_val_loss = HUGE_VAL;
  long long epoch = 0;
  while (state.step < cfg.total_steps) {
    if (batches.empty()) throw ConfigError("train: no batches to run");
    std::vector<BatchSpec> order = batches;
    shuffle_batches(order, state.rngs.stream("batch_shuffle"));
    state.carried.clear();  // epoch boundary: leftover mutants are discarded
    for (const BatchSpec& spec : order) {
      if (state.step >= cfg.total_steps) break;
      StepRecord rec = run_one(spec);
      rec.epoch = epoch;
      if (!std::isfinite(rec.loss)) {
        throw TrainingDiverged(rec.step, "non-finite loss " + std::to_string(rec.loss));
      }
      result.final_loss = rec.loss;
      if (!val_items.empty() && (state.step % val_every == 0 || state.step == cfg.total_steps)) {
        const ValMetrics vm = evaluate_items(state.detector, val_items);
        rec.val_loss = vm.loss;
        rec.val_localization = vm.localization_acc;
        rec.val_classification = vm.classification_acc;
        if (vm.loss < result.best_val_loss) {
          result.best_val_loss = vm.loss;
          result.best_val_step = rec.step;
          result.best_detector = state.detector;
        }
      }
      if (hook && (rec.step % std::max<long long>(1, cfg.log_every) == 0 || rec.val_loss)) hook(rec);
    }
    ++epoch;
  }
  result.steps = state.step;
  return result;
}

std::vector<PreparedExample> build_validation_items(TrainState& state,
                                                    const std::vector<AnnotatedFunction>& val_fns,
                                                    const SubtokenModel& subtok,
                                                    const CallVocabulary* vocab) {
  if (val_fns.empty()) return {};
  const std::vector<StaticExample> examples =
      generate_static(val_fns, /*multiplicity=*/1, state.rngs.stream("validation"));
  return prepare_examples(examples, state.cfg.bug_type, vocab, subtok, nullptr);
}

}  // namespace

TrainResult train(TrainState& state, const std::vector<AnnotatedFunction>& train_fns,
                  const std::vector<AnnotatedFunction>& val_fns, const SubtokenModel& subtok,
                  const CallVocabulary* vocab, const StepHook& hook) {
  state.cfg.validate();
  if (state.cfg.mode == TrainMode::static_examples) {
    throw ConfigError("train: static mode takes a pre-generated example set; use train_static");
  }
  std::vector<PreparedFunction> prepared;
  prepared.reserve(train_fns.size());
  std::vector<std::size_t> lengths;
  for (const auto& fn : train_fns) {
    PreparedFunction pf = prepare_function(fn, subtok);
    if (pf.enc.length() > state.cfg.max_len) continue;  // upstream filter contract
    lengths.push_back(pf.enc.length());
    prepared.push_back(std::move(pf));
  }
  if (prepared.empty()) throw ConfigError("train: no usable functions");

  const std::vector<BatchSpec> batches =
      make_length_batches(lengths, state.cfg.token_budget, state.cfg.bucket_width);
  const std::vector<PreparedExample> val_items =
      build_validation_items(state, val_fns, subtok, vocab);

  return run_steps(
      state, batches,
      [&](const BatchSpec& spec) {
        std::vector<PreparedFunction*> batch;
        batch.reserve(spec.indices.size());
        for (std::size_t idx : spec.indices) batch.push_back(&prepared[idx]);
        return pipeline_step(state, batch, subtok);
      },
      val_items, hook);
}

TrainResult train_static(TrainState& state, const std::vector<StaticExample>& examples,
                         const std::vector<AnnotatedFunction>& val_fns, const SubtokenModel& subtok,
                         const CallVocabulary* vocab, const StepHook& hook,
                         std::vector<std::string>* issues) {
  state.cfg.validate();
  const std::vector<PreparedExample> items =
      prepare_examples(examples, state.cfg.bug_type, vocab, subtok, issues);
  if (items.empty()) throw ConfigError("train_static: no usable examples");
  std::vector<std::size_t> lengths;
  lengths.reserve(items.size());
  for (const auto& pe : items) lengths.push_back(pe.enc.length());
  const std::vector<BatchSpec> batches =
      make_length_batches(lengths, state.cfg.token_budget, state.cfg.bucket_width);
  const std::vector<PreparedExample> val_items =
      build_validation_items(state, val_fns, subtok, vocab);

  Rng& dropout_rng = state.rngs.stream("dropout");
  Rng& offsets_rng = state.rngs.stream("offsets");
  const TrainConfig& cfg = state.cfg;

  return run_steps(
      state, batches,
      [&](const BatchSpec& spec) {
        StepRecord rec;
        rec.step = state.step;
        std::vector<DetectorItem> det_items;
        det_items.reserve(spec.indices.size());
        for (std::size_t idx : spec.indices) {
          const PreparedExample& pe = items[idx];
          det_items.push_back(make_item(pe.enc, pe.first_sub, pe.mask, pe.gold,
                                        cfg.augment_positions, cfg.detector.max_positions,
                                        &offsets_rng));
          (pe.label == 1 ? rec.mutant_ids : rec.real_ids).push_back(pe.source_id);
        }
        const DetectorForward fwd = detector_forward(state.detector, det_items, true, &dropout_rng);
        DetectorModel det_grads = detector_zero_like(state.detector);
        detector_backward(state.detector, det_items, fwd, 1.0, det_grads);
        const double lr = lr_schedule(state.step, cfg.total_steps, cfg.warmup_steps, cfg.peak_lr);
        ++state.det_adam.t;
        adam_update(tensor_refs(state.detector), tensor_refs(det_grads),
                    tensor_refs(state.det_adam.m), tensor_refs(state.det_adam.v), state.det_adam.t,
                    lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        rec.loss = rec.loss_d = fwd.loss;
        rec.lr = lr;
        ++state.step;
        return rec;
      },
      val_items, hook);
}

TrainResult finetune(TrainState& state, const std::vector<AnnotatedFunction>& fns,
                     long long n_mutants, const SubtokenModel& subtok, const StepHook& hook) {
  TrainResult result;
  result.best_val_loss = HUGE_VAL;
  if (n_mutants <= 0) {
    result.steps = state.step;
    return result;
  }
  std::vector<PreparedFunction> prepared;
  std::vector<std::size_t> lengths;
  for (const auto& fn : fns) {
    PreparedFunction pf = prepare_function(fn, subtok);
    if (pf.enc.length() > state.cfg.max_len) continue;
    lengths.push_back(pf.enc.length());
    prepared.push_back(std::move(pf));
  }
  if (prepared.empty()) throw ConfigError("finetune: no usable functions");
  const bool any_targets = std::any_of(prepared.begin(), prepared.end(),
                                       [](const PreparedFunction& pf) { return !pf.fn->targets.empty(); });
  if (!any_targets) throw ConfigError("finetune: no function has mutation targets");
  std::vector<BatchSpec> batches =
      make_length_batches(lengths, state.cfg.token_budget, state.cfg.bucket_width);

  // Adaptation always uses the classical mutator; a contextual mutator in the
  // state is left exactly as loaded. Mutants train in the step that makes them
  // (no carry): with a fixed mutator there is nothing to overlap, and the
  // mutant count is what terminates the loop.
  const TrainMode saved_mode = state.cfg.mode;
  const bool saved_pipelined = state.cfg.pipelined;
  const double saved_peak = state.cfg.peak_lr;
  const long long saved_warmup = state.cfg.warmup_steps;
  const long long saved_total = state.cfg.total_steps;
  state.cfg.mode = TrainMode::dynamic;
  state.cfg.pipelined = false;
  const double ft_lr = state.cfg.finetune_lr > 0 ? state.cfg.finetune_lr : saved_peak / 10.0;
  // Constant rate: warmup 0 and a far horizon make the schedule flat enough.
  state.cfg.peak_lr = ft_lr;
  state.cfg.warmup_steps = 0;
  state.cfg.total_steps = state.step + (1LL << 40);

  long long mutants_seen = 0;
  long long epoch = 0;
  while (mutants_seen < n_mutants) {
    std::vector<BatchSpec> order = batches;
    shuffle_batches(order, state.rngs.stream("batch_shuffle"));
    state.carried.clear();
    for (const BatchSpec& spec : order) {
      if (mutants_seen >= n_mutants) break;
      std::vector<PreparedFunction*> batch;
      for (std::size_t idx : spec.indices) batch.push_back(&prepared[idx]);
      StepRecord rec = pipeline_step(state, batch, subtok);
      rec.epoch = epoch;
      if (!std::isfinite(rec.loss)) {
        throw TrainingDiverged(rec.step, "non-finite loss during finetune");
      }
      mutants_seen += static_cast<long long>(rec.mutant_ids.size());
      result.final_loss = rec.loss;
      if (hook) hook(rec);
    }
    ++epoch;
  }

  state.cfg.mode = saved_mode;
  state.cfg.pipelined = saved_pipelined;
  state.cfg.peak_lr = saved_peak;
  state.cfg.warmup_steps = saved_warmup;
  state.cfg.total_steps = saved_total;
  result.steps = state.step;
  return result;
}

Json train_config_to_json(const TrainConfig& cfg) {
  auto enc = [](const EncoderConfig& e) {
    return Json{{"vocab_size", e.vocab_size},   {"hidden", e.hidden},
                {"layers", e.layers},           {"heads", e.heads},
                {"ffn_hidden", e.ffn_hidden},   {"max_positions", e.max_positions},
                {"dropout", e.dropout},         {"layernorm_eps", e.layernorm_eps},
                {"init_std", e.init_std}};
  };
  return Json{{"mode", to_string(cfg.mode)},
              {"bug_type", to_string(cfg.bug_type)},
              {"seed", cfg.seed},
              {"total_steps", cfg.total_steps},
              {"warmup_steps", cfg.warmup_steps},
              {"peak_lr", cfg.peak_lr},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_eps", cfg.adam_eps},
              {"lambda_fixed", cfg.lambda_fixed},
              {"lambda_ema_alpha", cfg.lambda_ema_alpha},
              {"lambda_update_every", cfg.lambda_update_every},
              {"lambda_min", cfg.lambda_min},
              {"lambda_max", cfg.lambda_max},
              {"token_budget", cfg.token_budget},
              {"max_len", cfg.max_len},
              {"bucket_width", cfg.bucket_width},
              {"augment_positions", cfg.augment_positions},
              {"pipelined", cfg.pipelined},
              {"val_every", cfg.val_every},
              {"log_every", cfg.log_every},
              {"multiplicity", cfg.multiplicity},
              {"finetune_lr", cfg.finetune_lr},
              {"detector", enc(cfg.detector)},
              {"mutator", enc(cfg.mutator)}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig cfg;
  auto enc = [](const Json& je, EncoderConfig base) {
    base.vocab_size = je.value("vocab_size", base.vocab_size);
    base.hidden = je.value("hidden", base.hidden);
    base.layers = je.value("layers", base.layers);
    base.heads = je.value("heads", base.heads);
    base.ffn_hidden = je.value("ffn_hidden", base.ffn_hidden);
    base.max_positions = je.value("max_positions", base.max_positions);
    base.dropout = je.value("dropout", base.dropout);
    base.layernorm_eps = je.value("layernorm_eps", base.layernorm_eps);
    base.init_std = je.value("init_std", base.init_std);
    return base;
  };
  if (j.contains("mode")) cfg.mode = train_mode_from_string(j["mode"].get<std::string>());
  if (j.contains("bug_type")) cfg.bug_type = bug_type_from_string(j["bug_type"].get<std::string>());
  cfg.seed = j.value("seed", cfg.seed);
  cfg.total_steps = j.value("total_steps", cfg.total_steps);
  cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
  cfg.peak_lr = j.value("peak_lr", cfg.peak_lr);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.lambda_fixed = j.value("lambda_fixed", cfg.lambda_fixed);
  cfg.lambda_ema_alpha = j.value("lambda_ema_alpha", cfg.lambda_ema_alpha);
  cfg.lambda_update_every = j.value("lambda_update_every", cfg.lambda_update_every);
  cfg.lambda_min = j.value("lambda_min", cfg.lambda_min);
  cfg.lambda_max = j.value("lambda_max", cfg.lambda_max);
  cfg.token_budget = j.value("token_budget", cfg.token_budget);
  cfg.max_len = j.value("max_len", cfg.max_len);
  cfg.bucket_width = j.value("bucket_width", cfg.bucket_width);
  cfg.augment_positions = j.value("augment_positions", cfg.augment_positions);
  cfg.pipelined = j.value("pipelined", cfg.pipelined);
  cfg.val_every = j.value("val_every", cfg.val_every);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.multiplicity = j.value("multiplicity", cfg.multiplicity);
  cfg.finetune_lr = j.value("finetune_lr", cfg.finetune_lr);
  if (j.contains("detector")) cfg.detector = enc(j["detector"], cfg.detector);
  if (j.contains("mutator")) cfg.mutator = enc(j["mutator"], cfg.mutator);
  return cfg;
}

}  // namespace bugforge
