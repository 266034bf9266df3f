#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bugforge/rng.hpp"

namespace bugforge {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct EncoderConfig {
  int vocab_size = 0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn_hidden = 0;  // 0 means 4 * hidden
  int max_positions = 512;
  double dropout = 0.1;
  double layernorm_eps = 1e-5;
  double init_std = 0.02;

  int ffn() const { return ffn_hidden > 0 ? ffn_hidden : 4 * hidden; }
  void validate() const;  // throws ConfigError on impossible shapes
};

struct LayerParams {
  Mat wq, wk, wv, wo;  // hidden x hidden
  Vec bq, bk, bv, bo;  // hidden
  Vec ln1_g, ln1_b;    // post-attention layernorm
  Mat w1;              // hidden x ffn
  Vec b1;
  Mat w2;              // ffn x hidden
  Vec b2;
  Vec ln2_g, ln2_b;    // post-ffn layernorm
};

// Token embeddings + learned positions, then `layers` post-norm transformer
// blocks (multi-head self-attention, GELU feed-forward, residuals).
struct EncoderParams {
  EncoderConfig cfg;
  Mat tok_emb;  // vocab x hidden
  Mat pos_emb;  // max_positions x hidden
  Vec emb_ln_g, emb_ln_b;
  std::vector<LayerParams> layers;
};

// Scaled-normal init (std = cfg.init_std) for weights and embeddings, zeros
// for biases, identity layernorms. Draws come from `rng` in a fixed order, so
// one seed always produces the same parameters.
EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng);

// Same shapes, all zeros: gradient and Adam-moment buffers.
EncoderParams make_zero_like(const EncoderParams& params);

// Position ids for a sequence: 0..len-1, or offset..offset+len-1 with the
// offset drawn uniformly from [0, max_positions - len] when augmenting.
std::vector<int> position_ids(int length, int max_positions, bool augment, Rng* offset_rng);

struct SeqInput {
  std::vector<int> ids;
  std::vector<int> positions;
};

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

struct LayerCache {
  Mat x_in;
  Mat q, k, v;
  std::vector<Mat> att;  // per head, rows softmaxed
  Mat ctx;
  Mat att_drop_mask;  // empty unless training with dropout > 0
  Mat res1;
  LayerNormCache ln1;
  Mat x_mid;
  Mat ffn_pre, ffn_act;
  Mat ffn_drop_mask;
  Mat res2;
  LayerNormCache ln2;
};

struct SeqCache {
  SeqInput in;
  Mat embedded;  // tok + pos sum, pre layernorm
  LayerNormCache ln0;
  Mat emb_drop_mask;
  Mat x0;
  std::vector<LayerCache> layers;
  Mat h;  // final hidden states, len x hidden
};

struct EncoderCache {
  std::vector<SeqCache> seqs;
  bool train_mode = false;
};

// Runs every sequence through the stack at its true length, so padding can
// never leak into real positions. train_mode enables inverted dropout; the
// masks are cached for the backward pass.
EncoderCache encode_batch(const EncoderParams& params, const std::vector<SeqInput>& inputs,
                          bool train_mode, Rng* dropout_rng);

// Accumulates parameter gradients for d(loss)/d(h) given per-sequence output
// gradients aligned with the cache.
void encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                      const std::vector<Mat>& d_out, EncoderParams& grads);

// Outputs stacked into a zero-padded rectangular view [batch][max_len x hidden]
// for callers that want one tensor; padded rows are exactly zero.
std::vector<Mat> padded_outputs(const EncoderCache& cache);

long long count_parameters(const EncoderConfig& cfg);

// Named views over every parameter tensor, in a fixed order. The same walk
// drives initialization, Adam, gradient checking and checkpoints.
struct TensorRef {
  std::string name;
  double* data;
  long long size;
  int rows, cols;
};
std::vector<TensorRef> tensor_refs(EncoderParams& params, const std::string& prefix);

double gelu(double x);
double gelu_grad(double x);

}  // namespace bugforge
