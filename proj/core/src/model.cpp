#include "tapret/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tapret/rng.hpp"

namespace tapret {

Pooling parse_pooling(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "max") return Pooling::Max;
  if (s == "meanmax") return Pooling::MeanMax;
  if (s == "tap") return Pooling::Tap;
  throw std::invalid_argument("unknown pooling '" + s + "' (expected mean|max|meanmax|tap)");
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::MeanMax: return "meanmax";
    case Pooling::Tap: return "tap";
  }
  return "?";
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& x : t.data()) x = rng.uniform(-a, a);
  return t;
}

LayerNormParams identity_ln(std::size_t n) {
  return {Tensor::full(1, n, 1.0), Tensor::zeros(1, n)};
}

}  // namespace

ModelParams init_model(int d_in, int hidden, int d, int d_p, Pooling pooling, std::uint64_t seed) {
  if (d_in < 1 || hidden < 1 || d < 1 || d_p < 1) {
    throw std::invalid_argument("init_model: dimensions must be >= 1");
  }
  Rng rng(seed);
  ModelParams p;
  p.text_mlp = {glorot(d_in, hidden, rng), Tensor::zeros(1, hidden),
                glorot(hidden, d, rng), Tensor::zeros(1, d)};
  p.audio_mlp = {glorot(d_in, hidden, rng), Tensor::zeros(1, hidden),
                 glorot(hidden, d, rng), Tensor::zeros(1, d)};
  if (pooling == Pooling::Tap) {
    p.has_tap = true;
    p.tap.w_q = glorot(d, d_p, rng);
    p.tap.w_k = glorot(d, d_p, rng);
    p.tap.w_v = glorot(d, d_p, rng);
    p.tap.w_o = glorot(d_p, d, rng);
    p.tap.ln_text = identity_ln(d);
    p.tap.ln_audio = identity_ln(d);
    p.tap.ln_out = identity_ln(d);
  }
  return p;
}

void for_each_param(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("text_mlp.w1", p.text_mlp.w1);
  fn("text_mlp.b1", p.text_mlp.b1);
  fn("text_mlp.w2", p.text_mlp.w2);
  fn("text_mlp.b2", p.text_mlp.b2);
  fn("audio_mlp.w1", p.audio_mlp.w1);
  fn("audio_mlp.b1", p.audio_mlp.b1);
  fn("audio_mlp.w2", p.audio_mlp.w2);
  fn("audio_mlp.b2", p.audio_mlp.b2);
  if (p.has_tap) {
    fn("tap.w_q", p.tap.w_q);
    fn("tap.w_k", p.tap.w_k);
    fn("tap.w_v", p.tap.w_v);
    fn("tap.w_o", p.tap.w_o);
    fn("tap.ln_text.gamma", p.tap.ln_text.gamma);
    fn("tap.ln_text.beta", p.tap.ln_text.beta);
    fn("tap.ln_audio.gamma", p.tap.ln_audio.gamma);
    fn("tap.ln_audio.beta", p.tap.ln_audio.beta);
    fn("tap.ln_out.gamma", p.tap.ln_out.gamma);
    fn("tap.ln_out.beta", p.tap.ln_out.beta);
  }
}

void for_each_param(const ModelParams& p, const std::function<void(const std::string&, const Tensor&)>& fn) {
  for_each_param(const_cast<ModelParams&>(p),
                 [&](const std::string& name, Tensor& t) { fn(name, t); });
}

ModelVars register_model(Graph& g, const ModelParams& p, bool requires_grad) {
  ModelVars v;
  auto reg = [&](const Tensor& t) { return g.leaf(t, requires_grad); };
  v.text_mlp = {reg(p.text_mlp.w1), reg(p.text_mlp.b1), reg(p.text_mlp.w2), reg(p.text_mlp.b2)};
  v.audio_mlp = {reg(p.audio_mlp.w1), reg(p.audio_mlp.b1), reg(p.audio_mlp.w2), reg(p.audio_mlp.b2)};
  if (p.has_tap) {
    v.has_tap = true;
    v.tap.w_q = reg(p.tap.w_q);
    v.tap.w_k = reg(p.tap.w_k);
    v.tap.w_v = reg(p.tap.w_v);
    v.tap.w_o = reg(p.tap.w_o);
    v.tap.ln_text = {reg(p.tap.ln_text.gamma), reg(p.tap.ln_text.beta)};
    v.tap.ln_audio = {reg(p.tap.ln_audio.gamma), reg(p.tap.ln_audio.beta)};
    v.tap.ln_out = {reg(p.tap.ln_out.gamma), reg(p.tap.ln_out.beta)};
    v.tap.eps = p.tap.eps;
    v.tap.d_p = static_cast<int>(p.tap.w_q.cols());
  }
  return v;
}

namespace {

Var affine(Graph& g, Var x, Var w, Var b) {
  return g.add_rowvec(g.matmul(x, w), b);
}

Var mlp_rows(Graph& g, Var x, const EncoderVars& enc) {
  return affine(g, affine(g, x, enc.w1, enc.b1), enc.w2, enc.b2);
}

}  // namespace

Var encode_text(Graph& g, Var tokens, const EncoderVars& enc) {
  if (g.value(tokens).rows() < 1) throw std::invalid_argument("encode_text: empty token sequence");
  return g.mean_over_axis(mlp_rows(g, tokens, enc), 0);
}

Var encode_audio(Graph& g, Var frames, const EncoderVars& enc) {
  if (g.value(frames).rows() < 1) throw std::invalid_argument("encode_audio: empty frame sequence");
  return mlp_rows(g, frames, enc);
}

Var pool_mean(Graph& g, Var c_a) {
  if (g.value(c_a).rows() < 1) throw std::invalid_argument("pool_mean: empty frame sequence");
  return g.mean_over_axis(c_a, 0);
}

Var pool_max(Graph& g, Var c_a) {
  if (g.value(c_a).rows() < 1) throw std::invalid_argument("pool_max: empty frame sequence");
  return g.max_over_axis(c_a, 0);
}

Var pool_meanmax(Graph& g, Var c_a) {
  if (g.value(c_a).rows() < 1) throw std::invalid_argument("pool_meanmax: empty frame sequence");
  return g.add(g.mean_over_axis(c_a, 0), g.max_over_axis(c_a, 0));
}

TapAudioProj tap_project_audio(Graph& g, Var c_a, const TapVars& p) {
  Var ln = g.layer_norm(c_a, p.ln_audio.gamma, p.ln_audio.beta, p.eps);
  return {g.matmul(ln, p.w_k), g.matmul(ln, p.w_v)};
}

Var tap_project_text(Graph& g, Var c_t, const TapVars& p) {
  return g.matmul(g.layer_norm(c_t, p.ln_text.gamma, p.ln_text.beta, p.eps), p.w_q);
}

TapPooled tap_attend(Graph& g, Var q, const TapAudioProj& kv, const TapVars& p) {
  Var logits = g.scale(g.matmul(q, g.transpose(kv.k)), 1.0 / std::sqrt(static_cast<double>(p.d_p)));
  Var weights = g.softmax_rows(logits);
  Var z = g.layer_norm(g.matmul(g.matmul(weights, kv.v), p.w_o), p.ln_out.gamma, p.ln_out.beta, p.eps);
  return {z, weights};
}

TapPooled tap_pool_detail(Graph& g, Var c_t, Var c_a, const TapVars& p) {
  return tap_attend(g, tap_project_text(g, c_t, p), tap_project_audio(g, c_a, p), p);
}

Var tap_pool(Graph& g, Var c_t, Var c_a, const TapVars& p) {
  return tap_pool_detail(g, c_t, c_a, p).z;
}

Tensor tap_pool_batch(const Tensor& texts, const std::vector<Tensor>& audios, const TapParams& p) {
  if (texts.rank() != 2) throw std::invalid_argument("tap_pool_batch: texts must be rank-2");
  const std::size_t b_t = texts.rows();
  const std::size_t b_a = audios.size();
  const std::size_t d = texts.cols();
  if (b_t < 1 || b_a < 1) throw std::invalid_argument("tap_pool_batch: empty batch");

  Graph g;
  TapVars tv;
  {
    tv.w_q = g.leaf(p.w_q);
    tv.w_k = g.leaf(p.w_k);
    tv.w_v = g.leaf(p.w_v);
    tv.w_o = g.leaf(p.w_o);
    tv.ln_text = {g.leaf(p.ln_text.gamma), g.leaf(p.ln_text.beta)};
    tv.ln_audio = {g.leaf(p.ln_audio.gamma), g.leaf(p.ln_audio.beta)};
    tv.ln_out = {g.leaf(p.ln_out.gamma), g.leaf(p.ln_out.beta)};
    tv.eps = p.eps;
    tv.d_p = static_cast<int>(p.w_q.cols());
  }

  std::vector<TapAudioProj> proj;
  proj.reserve(b_a);
  for (const Tensor& a : audios) proj.push_back(tap_project_audio(g, g.leaf(a), tv));

  Tensor out({b_t, b_a, d});
  for (std::size_t i = 0; i < b_t; ++i) {
    Tensor row({1, d});
    for (std::size_t jj = 0; jj < d; ++jj) row[jj] = texts.at(i, jj);
    Var q = tap_project_text(g, g.leaf(row), tv);
    for (std::size_t j = 0; j < b_a; ++j) {
      const Tensor& z = g.value(tap_attend(g, q, proj[j], tv).z);
      double* dst = &out.data()[(i * b_a + j) * d];
      for (std::size_t jj = 0; jj < d; ++jj) dst[jj] = z[jj];
    }
  }
  return out;
}

}  // namespace tapret
