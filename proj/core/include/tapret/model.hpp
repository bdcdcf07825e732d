#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tapret/graph.hpp"
#include "tapret/tensor.hpp"

namespace tapret {

enum class Pooling { Mean, Max, MeanMax, Tap };

Pooling parse_pooling(const std::string& s);
std::string to_string(Pooling p);

// One two-layer affine stack, applied per row.
struct EncoderParams {
  Tensor w1, b1, w2, b2;  // in->hidden, hidden->out
};

struct LayerNormParams {
  Tensor gamma, beta;  // 1xN
};

// Weights of the text-conditioned attention pooling: Q/K/V projections with
// input layer norms, scaled dot-product attention over frames, and an output
// projection followed by a final layer norm.
struct TapParams {
  Tensor w_q, w_k, w_v;  // D x D_p
  Tensor w_o;            // D_p x D
  LayerNormParams ln_text, ln_audio, ln_out;
  double eps = 1e-5;
};

struct ModelParams {
  EncoderParams text_mlp, audio_mlp;
  TapParams tap;
  bool has_tap = false;

  int d_in() const { return static_cast<int>(text_mlp.w1.rows()); }
  int d() const { return static_cast<int>(text_mlp.w2.cols()); }
};

// Glorot-uniform weights, identity layer norms, zero biases.
ModelParams init_model(int d_in, int hidden, int d, int d_p, Pooling pooling, std::uint64_t seed);

// Visits every parameter tensor under its stable dotted name, in a fixed
// order shared by the optimizer, the checkpoint format and gradcheck.
void for_each_param(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const ModelParams& p, const std::function<void(const std::string&, const Tensor&)>& fn);

// ---- graph-side mirrors ----

struct EncoderVars {
  Var w1, b1, w2, b2;
};
struct LayerNormVars {
  Var gamma, beta;
};
struct TapVars {
  Var w_q, w_k, w_v, w_o;
  LayerNormVars ln_text, ln_audio, ln_out;
  double eps = 1e-5;
  int d_p = 0;
};
struct ModelVars {
  EncoderVars text_mlp, audio_mlp;
  TapVars tap;
  bool has_tap = false;
};

ModelVars register_model(Graph& g, const ModelParams& p, bool requires_grad);

// tokens [LxD_in] -> mean over per-token MLP outputs, 1xD
Var encode_text(Graph& g, Var tokens, const EncoderVars& enc);
// frames [TxD_in] -> per-frame MLP outputs, TxD, frame order preserved
Var encode_audio(Graph& g, Var frames, const EncoderVars& enc);

Var pool_mean(Graph& g, Var c_a);
Var pool_max(Graph& g, Var c_a);
// element-wise sum of the mean and max vectors
Var pool_meanmax(Graph& g, Var c_a);

// K/V projections depend only on the audio clip; callers scoring many
// (text, audio) pairs compute them once per clip.
struct TapAudioProj {
  Var k, v;  // TxD_p each
};
TapAudioProj tap_project_audio(Graph& g, Var c_a, const TapVars& p);
Var tap_project_text(Graph& g, Var c_t, const TapVars& p);  // 1xD_p

struct TapPooled {
  Var z;        // 1xD
  Var weights;  // 1xT attention weights
};
TapPooled tap_attend(Graph& g, Var q, const TapAudioProj& kv, const TapVars& p);
TapPooled tap_pool_detail(Graph& g, Var c_t, Var c_a, const TapVars& p);
// c_t 1xD, c_a TxD -> text-conditioned clip embedding 1xD
Var tap_pool(Graph& g, Var c_t, Var c_a, const TapVars& p);

// Plain batch form: entry [i][j][:] = tap_pool(texts row i, audios[j]).
// texts [B_t x D], audios: list of [T_j x D]. Returns rank-3 [B_t, B_a, D].
Tensor tap_pool_batch(const Tensor& texts, const std::vector<Tensor>& audios, const TapParams& p);

}  // namespace tapret
