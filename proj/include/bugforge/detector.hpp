#pragma once

#include <string>
#include <vector>

#include "bugforge/encoder.hpp"

namespace bugforge {

// Pointer-style bug detector: encoder plus a linear scoring head. Token i gets
// bugginess score b_i = w . h(first subtoken of i) + b; a softmax restricted
// to the eligible token set M (index 0, the no-bug sentinel, plus every
// annotated target) turns scores into a pointer distribution.
struct DetectorModel {
  EncoderParams enc;
  Vec score_w;  // hidden
  double score_b = 0.0;
};

DetectorModel make_detector(const EncoderConfig& cfg, Rng& init_rng);
DetectorModel detector_zero_like(const DetectorModel& model);
std::vector<TensorRef> tensor_refs(DetectorModel& model);

// One sequence with its pointer bookkeeping.
struct DetectorItem {
  SeqInput input;
  std::vector<int> first_sub;  // token index -> subtoken position of its first piece
  std::vector<int> mask;       // eligible token indices, ascending, mask[0] == 0
  int gold = 0;                // token index of the bug; 0 = not buggy
};

// Scores for every token of one encoded sequence.
std::vector<double> bugginess_scores(const DetectorModel& model, const Mat& h,
                                     const std::vector<int>& first_sub);

// Softmax over the masked entries, exact zeros elsewhere. Returned vector is
// aligned with token indices (same length as scores).
std::vector<double> pointer_probabilities(const std::vector<double>& scores,
                                          const std::vector<int>& mask);

struct DetectorForward {
  EncoderCache cache;
  std::vector<std::vector<double>> scores;  // per item, all tokens
  std::vector<std::vector<double>> probs;   // per item, zero outside the mask
  double loss = 0.0;                        // mean -log P(gold)
};

DetectorForward detector_forward(const DetectorModel& model, const std::vector<DetectorItem>& items,
                                 bool train_mode, Rng* dropout_rng);

// Accumulates d(loss_scale * loss)/d(params) into grads.
void detector_backward(const DetectorModel& model, const std::vector<DetectorItem>& items,
                       const DetectorForward& fwd, double loss_scale, DetectorModel& grads);

// Most probable token index; ties break toward the lowest index, so the
// untrained (all-zero head) model predicts 0, "no bug".
int predict(const std::vector<double>& probs, const std::vector<int>& mask);

}  // namespace bugforge
