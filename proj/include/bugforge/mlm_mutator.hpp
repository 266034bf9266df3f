#pragma once

#include <string>
#include <vector>

#include "bugforge/bpe.hpp"
#include "bugforge/encoder.hpp"

namespace bugforge {

// Masked-token mutator: encoder plus a projection head. A candidate token c
// is scored as (h_mask W + b) . e_c, where e_c is the mean embedding of c's
// subtokens. The head starts at zero, so the untrained model scores every
// candidate equally.
struct MutatorModel {
  EncoderParams enc;
  Mat head_w;  // hidden x hidden
  Vec head_b;  // hidden
};

MutatorModel make_mutator(const EncoderConfig& cfg, Rng& init_rng);
MutatorModel mutator_zero_like(const MutatorModel& model);
std::vector<TensorRef> tensor_refs(MutatorModel& model);

// Replaces the target token's subtoken span with a single [MASK] id and
// rewrites the alignment spans after it.
SubtokenEncoding mask_targets(const SubtokenEncoding& enc, int token_index, const SubtokenModel& model);

// Mean embedding of a token text's subtokens.
Vec candidate_embedding(const EncoderParams& enc, const std::string& text, const SubtokenModel& model);

// Scores for each candidate given the encoder output row at the mask.
std::vector<double> candidate_scores(const MutatorModel& model, const Mat& h, int mask_subtoken_pos,
                                     const std::vector<std::string>& candidates,
                                     const SubtokenModel& subtok);

// Softmax over candidate scores: the sampling distribution, original excluded
// by construction. The overload drops the original first if a caller passed a
// candidate list that still contains it.
std::vector<double> replacement_distribution(const std::vector<double>& scores);
std::vector<double> replacement_distribution(const std::vector<double>& scores,
                                             const std::vector<std::string>& candidates,
                                             const std::string& original);

std::size_t sample_replacement(const std::vector<double>& probs, Rng& rng);

// One masked slot of a training batch.
struct MlmItem {
  SeqInput input;  // sequence with the mask already applied
  int mask_pos = 0;
  std::vector<std::string> candidates;  // original excluded
  std::string original;
};

struct MlmForward {
  EncoderCache cache;
  std::vector<std::vector<double>> scores;      // per item, aligned with candidates
  std::vector<double> original_score;           // per item
  std::vector<std::vector<double>> restricted;  // sampling distribution per item
  double loss = 0.0;  // mean -log P(original | candidates + original)
};

// The loss softmax ranges over candidates plus the original; the sampling
// distribution over candidates only.
MlmForward mlm_forward(const MutatorModel& model, const std::vector<MlmItem>& items,
                       const SubtokenModel& subtok, bool train_mode, Rng* dropout_rng);

// Accumulates d(loss_scale * loss)/d(params) into grads.
void mlm_backward(const MutatorModel& model, const std::vector<MlmItem>& items,
                  const SubtokenModel& subtok, const MlmForward& fwd, double loss_scale,
                  MutatorModel& grads);

}  // namespace bugforge
