#include "bugforge/encoder.hpp"

#include <cmath>

#include "bugforge/errors.hpp"

namespace bugforge {

void EncoderConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("encoder: vocab_size must be positive");
  if (hidden <= 0 || layers <= 0 || heads <= 0) throw ConfigError("encoder: bad shape");
  if (hidden % heads != 0) throw ConfigError("encoder: hidden must be divisible by heads");
  if (max_positions <= 0) throw ConfigError("encoder: max_positions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

namespace {

// One normal draw per value keeps the stream layout independent of matrix
// shapes elsewhere; Box-Muller over our own uniforms is platform-stable.
double draw_normal(Rng& rng) {
  double u1 = rng.uniform_real();
  while (u1 <= 0.0) u1 = rng.uniform_real();
  const double u2 = rng.uniform_real();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void fill_normal(Mat& m, double std_dev, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std_dev * draw_normal(rng);
  }
}

// Inverted dropout mask: entries are 0 or 1/(1-p), drawn row-major.
Mat draw_dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform_real() < p ? 0.0 : keep_scale;
    }
  }
  return mask;
}

Mat layer_norm(const Mat& x, const Vec& gamma, const Vec& beta, double eps, LayerNormCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  Mat out(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std(r) = inv_std;
    cache.xhat.row(r) = (x.row(r).array() - mean) * inv_std;
    out.row(r) = cache.xhat.row(r).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

// dY -> dX; accumulates dGamma/dBeta.
Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const Vec& gamma,
                        Vec& d_gamma, Vec& d_beta) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    d_gamma += dy.row(r).cwiseProduct(cache.xhat.row(r)).transpose();
    d_beta += dy.row(r).transpose();
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma.transpose());
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(r)).mean();
    dx.row(r) = cache.inv_std(r) *
                (dxhat.array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat);
  }
  return dx;
}

void softmax_rows(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double max = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - max).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// Given softmax output A and dA, returns dS where A = softmax(S) rowwise.
Mat softmax_backward_rows(const Mat& a, const Mat& da) {
  Mat ds(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double dot = da.row(r).cwiseProduct(a.row(r)).sum();
    ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
  }
  return ds;
}

}  // namespace

EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.cfg = cfg;
  const int d = cfg.hidden, f = cfg.ffn();
  p.tok_emb.resize(cfg.vocab_size, d);
  p.pos_emb.resize(cfg.max_positions, d);
  fill_normal(p.tok_emb, cfg.init_std, rng);
  fill_normal(p.pos_emb, cfg.init_std, rng);
  p.emb_ln_g = Vec::Ones(d);
  p.emb_ln_b = Vec::Zero(d);
  p.layers.resize(cfg.layers);
  for (auto& layer : p.layers) {
    for (Mat* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo}) {
      w->resize(d, d);
      fill_normal(*w, cfg.init_std, rng);
    }
    layer.bq = layer.bk = layer.bv = layer.bo = Vec::Zero(d);
    layer.ln1_g = Vec::Ones(d);
    layer.ln1_b = Vec::Zero(d);
    layer.w1.resize(d, f);
    fill_normal(layer.w1, cfg.init_std, rng);
    layer.b1 = Vec::Zero(f);
    layer.w2.resize(f, d);
    fill_normal(layer.w2, cfg.init_std, rng);
    layer.b2 = Vec::Zero(d);
    layer.ln2_g = Vec::Ones(d);
    layer.ln2_b = Vec::Zero(d);
  }
  return p;
}

EncoderParams make_zero_like(const EncoderParams& params) {
  EncoderParams z;
  z.cfg = params.cfg;
  z.tok_emb = Mat::Zero(params.tok_emb.rows(), params.tok_emb.cols());
  z.pos_emb = Mat::Zero(params.pos_emb.rows(), params.pos_emb.cols());
  z.emb_ln_g = Vec::Zero(params.emb_ln_g.size());
  z.emb_ln_b = Vec::Zero(params.emb_ln_b.size());
  z.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& src = params.layers[i];
    auto& dst = z.layers[i];
    dst.wq = Mat::Zero(src.wq.rows(), src.wq.cols());
    dst.wk = Mat::Zero(src.wk.rows(), src.wk.cols());
    dst.wv = Mat::Zero(src.wv.rows(), src.wv.cols());
    dst.wo = Mat::Zero(src.wo.rows(), src.wo.cols());
    dst.bq = Vec::Zero(src.bq.size());
    dst.bk = Vec::Zero(src.bk.size());
    dst.bv = Vec::Zero(src.bv.size());
    dst.bo = Vec::Zero(src.bo.size());
    dst.ln1_g = Vec::Zero(src.ln1_g.size());
    dst.ln1_b = Vec::Zero(src.ln1_b.size());
    dst.w1 = Mat::Zero(src.w1.rows(), src.w1.cols());
    dst.b1 = Vec::Zero(src.b1.size());
    dst.w2 = Mat::Zero(src.w2.rows(), src.w2.cols());
    dst.b2 = Vec::Zero(src.b2.size());
    dst.ln2_g = Vec::Zero(src.ln2_g.size());
    dst.ln2_b = Vec::Zero(src.ln2_b.size());
  }
  return z;
}

std::vector<int> position_ids(int length, int max_positions, bool augment, Rng* offset_rng) {
  if (length <= 0) throw ConfigError("position_ids: length must be positive");
  if (length > max_positions) {
    throw ConfigError("position_ids: sequence of length " + std::to_string(length) +
                      " exceeds max_positions " + std::to_string(max_positions));
  }
  int offset = 0;
  if (augment) {
    if (!offset_rng) throw ConfigError("position_ids: augmentation needs an rng");
    offset = static_cast<int>(offset_rng->uniform_index(max_positions - length + 1));
  }
  std::vector<int> ids(length);
  for (int i = 0; i < length; ++i) ids[i] = offset + i;
  return ids;
}

EncoderCache encode_batch(const EncoderParams& params, const std::vector<SeqInput>& inputs,
                          bool train_mode, Rng* dropout_rng) {
  const EncoderConfig& cfg = params.cfg;
  const int d = cfg.hidden;
  const int dh = d / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = train_mode && cfg.dropout > 0.0;
  if (use_dropout && !dropout_rng) throw ConfigError("encode_batch: training needs a dropout rng");

  EncoderCache cache;
  cache.train_mode = train_mode;
  cache.seqs.reserve(inputs.size());

  for (const SeqInput& input : inputs) {
    const int len = static_cast<int>(input.ids.size());
    if (len == 0) throw ConfigError("encode_batch: empty sequence");
    if (input.positions.size() != input.ids.size()) {
      throw ConfigError("encode_batch: ids/positions length mismatch");
    }
    SeqCache sc;
    sc.in = input;
    sc.embedded.resize(len, d);
    for (int i = 0; i < len; ++i) {
      const int id = input.ids[i], pos = input.positions[i];
      if (id < 0 || id >= cfg.vocab_size) throw ConfigError("encode_batch: token id out of range");
      if (pos < 0 || pos >= cfg.max_positions) throw ConfigError("encode_batch: position out of range");
      sc.embedded.row(i) = params.tok_emb.row(id) + params.pos_emb.row(pos);
    }
    Mat x = layer_norm(sc.embedded, params.emb_ln_g, params.emb_ln_b, cfg.layernorm_eps, sc.ln0);
    if (use_dropout) {
      sc.emb_drop_mask = draw_dropout_mask(len, d, cfg.dropout, *dropout_rng);
      x = x.cwiseProduct(sc.emb_drop_mask);
    }
    sc.x0 = x;

    sc.layers.resize(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
      LayerCache& lc = sc.layers[l];
      const LayerParams& lp = params.layers[l];
      lc.x_in = x;
      lc.q = (x * lp.wq).rowwise() + lp.bq.transpose();
      lc.k = (x * lp.wk).rowwise() + lp.bk.transpose();
      lc.v = (x * lp.wv).rowwise() + lp.bv.transpose();
      lc.ctx.resize(len, d);
      lc.att.resize(cfg.heads);
      for (int t = 0; t < cfg.heads; ++t) {
        const auto qt = lc.q.middleCols(t * dh, dh);
        const auto kt = lc.k.middleCols(t * dh, dh);
        const auto vt = lc.v.middleCols(t * dh, dh);
        Mat scores = scale * (qt * kt.transpose());
        softmax_rows(scores);
        lc.att[t] = std::move(scores);
        lc.ctx.middleCols(t * dh, dh) = lc.att[t] * vt;
      }
      Mat att_out = (lc.ctx * lp.wo).rowwise() + lp.bo.transpose();
      if (use_dropout) {
        lc.att_drop_mask = draw_dropout_mask(len, d, cfg.dropout, *dropout_rng);
        att_out = att_out.cwiseProduct(lc.att_drop_mask);
      }
      lc.res1 = lc.x_in + att_out;
      lc.x_mid = layer_norm(lc.res1, lp.ln1_g, lp.ln1_b, cfg.layernorm_eps, lc.ln1);

      lc.ffn_pre = (lc.x_mid * lp.w1).rowwise() + lp.b1.transpose();
      lc.ffn_act = lc.ffn_pre.unaryExpr([](double v) { return gelu(v); });
      Mat ffn_out = (lc.ffn_act * lp.w2).rowwise() + lp.b2.transpose();
      if (use_dropout) {
        lc.ffn_drop_mask = draw_dropout_mask(len, d, cfg.dropout, *dropout_rng);
        ffn_out = ffn_out.cwiseProduct(lc.ffn_drop_mask);
      }
      lc.res2 = lc.x_mid + ffn_out;
      x = layer_norm(lc.res2, lp.ln2_g, lp.ln2_b, cfg.layernorm_eps, lc.ln2);
    }
    sc.h = x;
    cache.seqs.push_back(std::move(sc));
  }
  return cache;
}

void encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                      const std::vector<Mat>& d_out, EncoderParams& grads) {
  if (d_out.size() != cache.seqs.size()) {
    throw ConfigError("encoder_backward: gradient count does not match cached batch");
  }
  const EncoderConfig& cfg = params.cfg;
  const int d = cfg.hidden;
  const int dh = d / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t s = 0; s < cache.seqs.size(); ++s) {
    const SeqCache& sc = cache.seqs[s];
    const int len = static_cast<int>(sc.in.ids.size());
    Mat dx = d_out[s];
    if (dx.rows() != len || dx.cols() != d) {
      throw ConfigError("encoder_backward: gradient shape mismatch");
    }

    for (int l = cfg.layers - 1; l >= 0; --l) {
      const LayerCache& lc = sc.layers[l];
      const LayerParams& lp = params.layers[l];
      LayerParams& lg = grads.layers[l];

      // x = LN2(res2)
      Mat d_res2 = layer_norm_backward(dx, lc.ln2, lp.ln2_g, lg.ln2_g, lg.ln2_b);
      // res2 = x_mid + dropout(ffn_out)
      Mat d_ffn_out = d_res2;
      if (lc.ffn_drop_mask.size() > 0) d_ffn_out = d_ffn_out.cwiseProduct(lc.ffn_drop_mask);
      Mat d_x_mid = d_res2;

      // ffn_out = gelu(x_mid * w1 + b1) * w2 + b2
      lg.w2 += lc.ffn_act.transpose() * d_ffn_out;
      lg.b2 += d_ffn_out.colwise().sum().transpose();
      Mat d_act = d_ffn_out * lp.w2.transpose();
      Mat d_pre = d_act.cwiseProduct(lc.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
      lg.w1 += lc.x_mid.transpose() * d_pre;
      lg.b1 += d_pre.colwise().sum().transpose();
      d_x_mid += d_pre * lp.w1.transpose();

      // x_mid = LN1(res1)
      Mat d_res1 = layer_norm_backward(d_x_mid, lc.ln1, lp.ln1_g, lg.ln1_g, lg.ln1_b);
      // res1 = x_in + dropout(att_out)
      Mat d_att_out = d_res1;
      if (lc.att_drop_mask.size() > 0) d_att_out = d_att_out.cwiseProduct(lc.att_drop_mask);
      Mat d_x_in = d_res1;

      // att_out = ctx * wo + bo
      lg.wo += lc.ctx.transpose() * d_att_out;
      lg.bo += d_att_out.colwise().sum().transpose();
      Mat d_ctx = d_att_out * lp.wo.transpose();

      Mat dq = Mat::Zero(len, d), dk = Mat::Zero(len, d), dv = Mat::Zero(len, d);
      for (int t = 0; t < cfg.heads; ++t) {
        const auto qt = lc.q.middleCols(t * dh, dh);
        const auto kt = lc.k.middleCols(t * dh, dh);
        const auto vt = lc.v.middleCols(t * dh, dh);
        const Mat d_ctx_t = d_ctx.middleCols(t * dh, dh);
        const Mat& a = lc.att[t];
        Mat da = d_ctx_t * vt.transpose();
        dv.middleCols(t * dh, dh) = a.transpose() * d_ctx_t;
        Mat ds = softmax_backward_rows(a, da);
        dq.middleCols(t * dh, dh) = scale * (ds * kt);
        dk.middleCols(t * dh, dh) = scale * (ds.transpose() * qt);
      }

      lg.wq += lc.x_in.transpose() * dq;
      lg.bq += dq.colwise().sum().transpose();
      lg.wk += lc.x_in.transpose() * dk;
      lg.bk += dk.colwise().sum().transpose();
      lg.wv += lc.x_in.transpose() * dv;
      lg.bv += dv.colwise().sum().transpose();
      d_x_in += dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
      dx = std::move(d_x_in);
    }

    if (sc.emb_drop_mask.size() > 0) dx = dx.cwiseProduct(sc.emb_drop_mask);
    Mat d_embedded = layer_norm_backward(dx, sc.ln0, params.emb_ln_g, grads.emb_ln_g, grads.emb_ln_b);
    for (int i = 0; i < len; ++i) {
      grads.tok_emb.row(sc.in.ids[i]) += d_embedded.row(i);
      grads.pos_emb.row(sc.in.positions[i]) += d_embedded.row(i);
    }
  }
}

std::vector<Mat> padded_outputs(const EncoderCache& cache) {
  Eigen::Index max_len = 0;
  for (const auto& sc : cache.seqs) max_len = std::max(max_len, sc.h.rows());
  std::vector<Mat> out;
  out.reserve(cache.seqs.size());
  for (const auto& sc : cache.seqs) {
    Mat padded = Mat::Zero(max_len, sc.h.cols());
    padded.topRows(sc.h.rows()) = sc.h;
    out.push_back(std::move(padded));
  }
  return out;
}

long long count_parameters(const EncoderConfig& cfg) {
  const long long d = cfg.hidden, f = cfg.ffn();
  const long long embeddings = static_cast<long long>(cfg.vocab_size) * d +
                               static_cast<long long>(cfg.max_positions) * d + 2 * d;
  const long long per_layer = 4 * d * d + 4 * d   // attention projections
                              + 2 * d * f + f + d  // feed-forward
                              + 4 * d;             // two layernorms
  return embeddings + cfg.layers * per_layer;
}

namespace {

void add_ref(std::vector<TensorRef>& refs, const std::string& name, Mat& m) {
  refs.push_back(TensorRef{name, m.data(), static_cast<long long>(m.size()),
                           static_cast<int>(m.rows()), static_cast<int>(m.cols())});
}

void add_ref(std::vector<TensorRef>& refs, const std::string& name, Vec& v) {
  refs.push_back(TensorRef{name, v.data(), static_cast<long long>(v.size()),
                           static_cast<int>(v.size()), 1});
}

}  // namespace

std::vector<TensorRef> tensor_refs(EncoderParams& params, const std::string& prefix) {
  std::vector<TensorRef> refs;
  add_ref(refs, prefix + "tok_emb", params.tok_emb);
  add_ref(refs, prefix + "pos_emb", params.pos_emb);
  add_ref(refs, prefix + "emb_ln_g", params.emb_ln_g);
  add_ref(refs, prefix + "emb_ln_b", params.emb_ln_b);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerParams& lp = params.layers[l];
    const std::string base = prefix + "layer" + std::to_string(l) + ".";
    add_ref(refs, base + "wq", lp.wq);
    add_ref(refs, base + "bq", lp.bq);
    add_ref(refs, base + "wk", lp.wk);
    add_ref(refs, base + "bk", lp.bk);
    add_ref(refs, base + "wv", lp.wv);
    add_ref(refs, base + "bv", lp.bv);
    add_ref(refs, base + "wo", lp.wo);
    add_ref(refs, base + "bo", lp.bo);
    add_ref(refs, base + "ln1_g", lp.ln1_g);
    add_ref(refs, base + "ln1_b", lp.ln1_b);
    add_ref(refs, base + "w1", lp.w1);
    add_ref(refs, base + "b1", lp.b1);
    add_ref(refs, base + "w2", lp.w2);
    add_ref(refs, base + "b2", lp.b2);
    add_ref(refs, base + "ln2_g", lp.ln2_g);
    add_ref(refs, base + "ln2_b", lp.ln2_b);
  }
  return refs;
}

}  // namespace bugforge
