#include "bugforge/mlm_mutator.hpp"

#include <algorithm>
#include <cmath>

#include "bugforge/errors.hpp"

namespace bugforge {

MutatorModel make_mutator(const EncoderConfig& cfg, Rng& init_rng) {
  MutatorModel m;
  m.enc = make_encoder(cfg, init_rng);
  // Zero head: every candidate scores 0 until training moves it, which makes
  // the untrained sampling distribution exactly uniform.
  m.head_w = Mat::Zero(cfg.hidden, cfg.hidden);
  m.head_b = Vec::Zero(cfg.hidden);
  return m;
}

MutatorModel mutator_zero_like(const MutatorModel& model) {
  MutatorModel z;
  z.enc = make_zero_like(model.enc);
  z.head_w = Mat::Zero(model.head_w.rows(), model.head_w.cols());
  z.head_b = Vec::Zero(model.head_b.size());
  return z;
}

std::vector<TensorRef> tensor_refs(MutatorModel& model) {
  std::vector<TensorRef> refs = tensor_refs(model.enc, "enc.");
  refs.push_back(TensorRef{"head_w", model.head_w.data(), static_cast<long long>(model.head_w.size()),
                           static_cast<int>(model.head_w.rows()), static_cast<int>(model.head_w.cols())});
  refs.push_back(TensorRef{"head_b", model.head_b.data(), static_cast<long long>(model.head_b.size()),
                           static_cast<int>(model.head_b.size()), 1});
  return refs;
}

SubtokenEncoding mask_targets(const SubtokenEncoding& enc, int token_index,
                              const SubtokenModel& model) {
  if (token_index < 0 || token_index >= static_cast<int>(enc.spans.size())) {
    throw ConfigError("mask_targets: token index out of range");
  }
  const auto [begin, end] = enc.spans[token_index];
  SubtokenEncoding out;
  out.ids.reserve(enc.ids.size() - (end - begin) + 1);
  out.ids.insert(out.ids.end(), enc.ids.begin(), enc.ids.begin() + begin);
  out.ids.push_back(model.mask_id);
  out.ids.insert(out.ids.end(), enc.ids.begin() + end, enc.ids.end());

  const int shift = 1 - (end - begin);
  out.spans.reserve(enc.spans.size());
  for (std::size_t t = 0; t < enc.spans.size(); ++t) {
    auto [b, e] = enc.spans[t];
    if (static_cast<int>(t) == token_index) {
      out.spans.emplace_back(begin, begin + 1);
    } else if (b >= end) {
      out.spans.emplace_back(b + shift, e + shift);
    } else {
      out.spans.emplace_back(b, e);
    }
  }
  return out;
}

Vec candidate_embedding(const EncoderParams& enc, const std::string& text,
                        const SubtokenModel& model) {
  const std::vector<int> ids = encode_token_text(text, model);
  Vec sum = Vec::Zero(enc.cfg.hidden);
  for (int id : ids) sum += enc.tok_emb.row(id).transpose();
  return sum / static_cast<double>(ids.size());
}

std::vector<double> candidate_scores(const MutatorModel& model, const Mat& h, int mask_subtoken_pos,
                                     const std::vector<std::string>& candidates,
                                     const SubtokenModel& subtok) {
  if (mask_subtoken_pos < 0 || mask_subtoken_pos >= h.rows()) {
    throw ConfigError("candidate_scores: mask position out of range");
  }
  const Eigen::RowVectorXd projected =
      h.row(mask_subtoken_pos) * model.head_w + model.head_b.transpose();
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& text : candidates) {
    scores.push_back(projected * candidate_embedding(model.enc, text, subtok));
  }
  return scores;
}

namespace {

std::vector<double> stable_softmax(const std::vector<double>& scores) {
  const double max = *std::max_element(scores.begin(), scores.end());
  std::vector<double> probs(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - max);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

}  // namespace

std::vector<double> replacement_distribution(const std::vector<double>& scores) {
  if (scores.empty()) throw ConfigError("replacement_distribution: no candidates");
  return stable_softmax(scores);
}

std::vector<double> replacement_distribution(const std::vector<double>& scores,
                                             const std::vector<std::string>& candidates,
                                             const std::string& original) {
  if (scores.size() != candidates.size()) {
    throw ConfigError("replacement_distribution: scores/candidates size mismatch");
  }
  std::vector<double> kept;
  kept.reserve(scores.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] != original) kept.push_back(scores[i]);
  }
  // Masking the original out before the softmax is the same as zeroing its
  // probability afterwards and renormalizing the rest.
  return replacement_distribution(kept);
}

std::size_t sample_replacement(const std::vector<double>& probs, Rng& rng) {
  return rng.categorical(probs);
}

MlmForward mlm_forward(const MutatorModel& model, const std::vector<MlmItem>& items,
                       const SubtokenModel& subtok, bool train_mode, Rng* dropout_rng) {
  std::vector<SeqInput> inputs;
  inputs.reserve(items.size());
  for (const auto& item : items) inputs.push_back(item.input);

  MlmForward fwd;
  fwd.cache = encode_batch(model.enc, inputs, train_mode, dropout_rng);
  double total_nll = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const MlmItem& item = items[i];
    if (item.candidates.empty()) throw ConfigError("mlm_forward: item without candidates");
    const Mat& h = fwd.cache.seqs[i].h;
    std::vector<double> scores = candidate_scores(model, h, item.mask_pos, item.candidates, subtok);
    std::vector<double> orig_score =
        candidate_scores(model, h, item.mask_pos, {item.original}, subtok);
    fwd.restricted.push_back(replacement_distribution(scores));

    // Loss softmax over candidates + original; the original sits at the end.
    std::vector<double> with_orig = scores;
    with_orig.push_back(orig_score[0]);
    const std::vector<double> p = stable_softmax(with_orig);
    total_nll += -std::log(p.back());

    fwd.scores.push_back(std::move(scores));
    fwd.original_score.push_back(orig_score[0]);
  }
  fwd.loss = items.empty() ? 0.0 : total_nll / static_cast<double>(items.size());
  return fwd;
}

void mlm_backward(const MutatorModel& model, const std::vector<MlmItem>& items,
                  const SubtokenModel& subtok, const MlmForward& fwd, double loss_scale,
                  MutatorModel& grads) {
  if (items.empty()) return;
  const double scale = loss_scale / static_cast<double>(items.size());
  std::vector<Mat> d_out;
  d_out.reserve(items.size());

  for (std::size_t i = 0; i < items.size(); ++i) {
    const MlmItem& item = items[i];
    const Mat& h = fwd.cache.seqs[i].h;
    const Eigen::RowVectorXd h_mask = h.row(item.mask_pos);
    const Eigen::RowVectorXd projected = h_mask * model.head_w + model.head_b.transpose();

    // Recompose the loss softmax (candidates + original at the back).
    std::vector<double> with_orig = fwd.scores[i];
    with_orig.push_back(fwd.original_score[i]);
    const std::vector<double> p = stable_softmax(with_orig);

    // d(-log p_orig)/d(score_j) = p_j - [j == original slot]
    Eigen::RowVectorXd d_projected = Eigen::RowVectorXd::Zero(h.cols());
    const std::size_t n_cand = item.candidates.size();
    for (std::size_t j = 0; j <= n_cand; ++j) {
      const double d_score = scale * (p[j] - (j == n_cand ? 1.0 : 0.0));
      const std::string& text = j == n_cand ? item.original : item.candidates[j];
      const Vec e = candidate_embedding(model.enc, text, subtok);
      d_projected += d_score * e.transpose();

      // Candidate embeddings are views into tok_emb: push the score gradient
      // down to each subtoken row (mean, so divide by the piece count).
      const std::vector<int> ids = encode_token_text(text, subtok);
      const Eigen::RowVectorXd d_e = (d_score / static_cast<double>(ids.size())) * projected;
      for (int id : ids) grads.enc.tok_emb.row(id) += d_e;
    }

    grads.head_w += h_mask.transpose() * d_projected;
    grads.head_b += d_projected.transpose();

    Mat d_h = Mat::Zero(h.rows(), h.cols());
    d_h.row(item.mask_pos) = d_projected * model.head_w.transpose();
    d_out.push_back(std::move(d_h));
  }

  encoder_backward(model.enc, fwd.cache, d_out, grads.enc);
}

}  // namespace bugforge
