#include "bugforge/detector.hpp"

#include <algorithm>
#include <cmath>

#include "bugforge/errors.hpp"

namespace bugforge {

DetectorModel make_detector(const EncoderConfig& cfg, Rng& init_rng) {
  DetectorModel m;
  m.enc = make_encoder(cfg, init_rng);
  // Zero head: every token scores alike, so the fresh model points at the
  // no-bug sentinel by the lowest-index tie rule.
  m.score_w = Vec::Zero(cfg.hidden);
  m.score_b = 0.0;
  return m;
}

DetectorModel detector_zero_like(const DetectorModel& model) {
  DetectorModel z;
  z.enc = make_zero_like(model.enc);
  z.score_w = Vec::Zero(model.score_w.size());
  z.score_b = 0.0;
  return z;
}

std::vector<TensorRef> tensor_refs(DetectorModel& model) {
  std::vector<TensorRef> refs = tensor_refs(model.enc, "enc.");
  refs.push_back(TensorRef{"score_w", model.score_w.data(),
                           static_cast<long long>(model.score_w.size()),
                           static_cast<int>(model.score_w.size()), 1});
  refs.push_back(TensorRef{"score_b", &model.score_b, 1, 1, 1});
  return refs;
}

std::vector<double> bugginess_scores(const DetectorModel& model, const Mat& h,
                                     const std::vector<int>& first_sub) {
  std::vector<double> scores;
  scores.reserve(first_sub.size());
  for (int pos : first_sub) {
    if (pos < 0 || pos >= h.rows()) throw ConfigError("bugginess_scores: subtoken position out of range");
    scores.push_back(h.row(pos).dot(model.score_w) + model.score_b);
  }
  return scores;
}

std::vector<double> pointer_probabilities(const std::vector<double>& scores,
                                          const std::vector<int>& mask) {
  if (mask.empty()) throw ConfigError("pointer_probabilities: empty mask");
  double max_score = -HUGE_VAL;
  for (int idx : mask) {
    if (idx < 0 || idx >= static_cast<int>(scores.size())) {
      throw ConfigError("pointer_probabilities: mask index out of range");
    }
    max_score = std::max(max_score, scores[idx]);
  }
  std::vector<double> probs(scores.size(), 0.0);
  double sum = 0.0;
  for (int idx : mask) {
    probs[idx] = std::exp(scores[idx] - max_score);
    sum += probs[idx];
  }
  for (int idx : mask) probs[idx] /= sum;
  return probs;
}

DetectorForward detector_forward(const DetectorModel& model, const std::vector<DetectorItem>& items,
                                 bool train_mode, Rng* dropout_rng) {
  std::vector<SeqInput> inputs;
  inputs.reserve(items.size());
  for (const auto& item : items) inputs.push_back(item.input);

  DetectorForward fwd;
  fwd.cache = encode_batch(model.enc, inputs, train_mode, dropout_rng);
  double total_nll = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const DetectorItem& item = items[i];
    if (item.mask.empty() || item.mask[0] != 0) {
      throw ConfigError("detector_forward: mask must start with the no-bug sentinel 0");
    }
    if (std::find(item.mask.begin(), item.mask.end(), item.gold) == item.mask.end()) {
      throw ConfigError("detector_forward: gold index not in mask");
    }
    std::vector<double> scores = bugginess_scores(model, fwd.cache.seqs[i].h, item.first_sub);
    std::vector<double> probs = pointer_probabilities(scores, item.mask);
    total_nll += -std::log(probs[item.gold]);
    fwd.scores.push_back(std::move(scores));
    fwd.probs.push_back(std::move(probs));
  }
  fwd.loss = items.empty() ? 0.0 : total_nll / static_cast<double>(items.size());
  return fwd;
}

void detector_backward(const DetectorModel& model, const std::vector<DetectorItem>& items,
                       const DetectorForward& fwd, double loss_scale, DetectorModel& grads) {
  if (items.empty()) return;
  const double scale = loss_scale / static_cast<double>(items.size());
  std::vector<Mat> d_out;
  d_out.reserve(items.size());

  for (std::size_t i = 0; i < items.size(); ++i) {
    const DetectorItem& item = items[i];
    const Mat& h = fwd.cache.seqs[i].h;
    Mat d_h = Mat::Zero(h.rows(), h.cols());
    for (int idx : item.mask) {
      const double g = scale * (fwd.probs[i][idx] - (idx == item.gold ? 1.0 : 0.0));
      const int pos = item.first_sub[idx];
      grads.score_w += g * h.row(pos).transpose();
      grads.score_b += g;
      d_h.row(pos) += g * model.score_w.transpose();
    }
    d_out.push_back(std::move(d_h));
  }
  encoder_backward(model.enc, fwd.cache, d_out, grads.enc);
}

int predict(const std::vector<double>& probs, const std::vector<int>& mask) {
  if (mask.empty()) throw ConfigError("predict: empty mask");
  int best = mask[0];
  for (int idx : mask) {
    if (probs[idx] > probs[best]) best = idx;  // strict >: ties keep the lowest index
  }
  return best;
}

}  // namespace bugforge
