#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graformer/relpos.hpp"
#include "graformer/tensor.hpp"

namespace graformer {

struct ModelConfig {
  int model_dimension = 256;
  int num_heads = 8;
  int encoder_layers = 3;
  int decoder_layers = 3;
  int feedforward_dimension = 512;
  double input_dropout = 0.0;
  double attention_dropout = 0.1;
  double dropout = 0.1;  // residual branches
  int text_range = 25;   // n_t
  int graph_range = 4;   // n_delta
  int same_range = 10;   // n_p
  int max_diameter = 16;  // d_max, the encode() offset
  int vocab_size = 0;

  int head_dim() const { return model_dimension / num_heads; }
  PositionVocabulary position_vocab() const {
    return PositionVocabulary{max_diameter, graph_range, same_range};
  }
  void validate() const;
};

// Additive pre-softmax constant for masked attention positions. Large
// enough that exp() underflows to exactly zero in both precisions.
inline constexpr double kMaskValue = -1e9;

template <typename S>
struct AttentionParams {
  Tensor<S> wq, wk, wv, wo;  // each d x d, bias-free; heads partition columns
};

template <typename S>
struct EncoderLayerParams {
  AttentionParams<S> attn;
  Tensor<S> ln1_gain, ln1_bias;
  Tensor<S> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<S> ln2_gain, ln2_bias;
};

template <typename S>
struct DecoderLayerParams {
  AttentionParams<S> self_attn;
  Tensor<S> ln1_gain, ln1_bias;
  AttentionParams<S> cross_attn;
  Tensor<S> ln2_gain, ln2_bias;
  Tensor<S> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<S> ln3_gain, ln3_bias;
};

// All learned weights. `embedding` is one matrix used three ways: encoder
// input lookup, decoder input lookup, and the output projection; the
// Tensor handle is shared, never copied. graph_pos_bias (per head, one
// scalar per relative-graph-position bucket) and text_pos_bias (per head,
// one scalar per clamped text offset) are shared across layers and are the
// only position parameters in the model.
template <typename S>
struct GraformerParams {
  Tensor<S> embedding;       // |vocab| x d
  Tensor<S> graph_pos_bias;  // heads x position_vocab.size()
  Tensor<S> text_pos_bias;   // heads x (2*n_t + 1)
  std::vector<EncoderLayerParams<S>> encoder;
  Tensor<S> enc_final_gain, enc_final_bias;
  std::vector<DecoderLayerParams<S>> decoder;
  Tensor<S> dec_final_gain, dec_final_bias;

  // Matrices drawn from N(0, 0.02), layer-norm gains one, everything else
  // (biases and both position tables) zero.
  static GraformerParams init(const ModelConfig& cfg, Rng& rng);

  // Deterministic (name, tensor) enumeration used by the optimizer,
  // checkpoints and gradient tests.
  std::vector<std::pair<std::string, Tensor<S>*>> named_params();
  std::vector<std::pair<std::string, const Tensor<S>*>> named_params() const;

  void zero_grads();
};

// Bucket indices for gamma lookup, one entry per R cell.
std::vector<std::vector<int>> graph_bucket_indices(const RelPosMatrix& r,
                                                   const PositionVocabulary& vocab);

// Bucket indices for the text table: clamp(j - i, -n_t, n_t) + n_t.
std::vector<std::vector<int>> text_bucket_indices(int len, int n_t);

// Multi-head attention shared by all three blocks. `bias_table`, when
// defined, contributes bias_table[head][bucket[i][j]] to the pre-softmax
// logits; `masked`, when true, applies a causal mask. Queries come from
// `queries`, keys/values from `context` (self-attention passes the same
// tensor twice). Per-head scaling is 1/sqrt(d/heads); heads are
// concatenated and mixed by wo.
template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& queries, const Tensor<S>& context,
                               const AttentionParams<S>& p, int heads,
                               const Tensor<S>& bias_table,
                               const std::vector<std::vector<int>>& buckets, bool causal,
                               double attn_dropout, bool train, Rng& rng);

// Graph self-attention: content attention plus the learned scalar bias for
// each relative graph position. Rows are normalized over all nodes; the
// infinity bucket is a learned bias, not a mask.
template <typename S>
Tensor<S> graph_self_attention(const Tensor<S>& h, const AttentionParams<S>& p, int heads,
                               const Tensor<S>& graph_pos_bias,
                               const std::vector<std::vector<int>>& buckets,
                               double attn_dropout, bool train, Rng& rng);

// Text self-attention: causal, with the clamped-offset scalar bias.
template <typename S>
Tensor<S> text_self_attention(const Tensor<S>& z, const AttentionParams<S>& p, int heads,
                              const Tensor<S>& text_pos_bias, int n_t, double attn_dropout,
                              bool train, Rng& rng);

// Encoder: embedding lookup, input dropout, pre-norm layers (self-attention
// then feedforward, each wrapped LN -> sublayer -> dropout -> residual),
// and a final layer normalization.
template <typename S>
Tensor<S> encode(const std::vector<int>& node_labels, const RelPosMatrix& r,
                 const GraformerParams<S>& params, const ModelConfig& cfg, bool train, Rng& rng);

template <typename S>
struct DecodeOutput {
  Tensor<S> hidden;  // M x d, after the final layer norm
  Tensor<S> logits;  // M x |vocab|, tied projection hidden @ embedding^T
};

// Decoder on a (BOS-prefixed) input token sequence against the encoded
// graph. Causal text self-attention, position-bias-free cross-attention,
// feedforward, final layer norm, tied output projection.
template <typename S>
DecodeOutput<S> decode_forward(const std::vector<int>& input_ids, const Tensor<S>& h_enc,
                               const GraformerParams<S>& params, const ModelConfig& cfg,
                               bool train, Rng& rng);

// ---- implementation ----

inline void ModelConfig::validate() const {
  require(model_dimension >= 1 && num_heads >= 1, "model dimension and heads must be >= 1");
  require(model_dimension % num_heads == 0, "model dimension must be divisible by head count");
  require(encoder_layers >= 1 && decoder_layers >= 1, "layer counts must be >= 1");
  require(feedforward_dimension >= 1, "feedforward dimension must be >= 1");
  require(text_range >= 1 && graph_range >= 1 && same_range >= 1, "ranges must be >= 1");
  require(max_diameter >= graph_range, "max_diameter must be >= graph_range");
  require(vocab_size >= 1, "vocabulary must be nonempty");
  for (double rate : {input_dropout, attention_dropout, dropout})
    require(rate >= 0.0 && rate < 1.0, "dropout rates must be in [0, 1)");
}

namespace detail {

template <typename S>
AttentionParams<S> init_attention(int d, Rng& rng) {
  AttentionParams<S> p;
  p.wq = Tensor<S>::param_gaussian({d, d}, rng, 0.02);
  p.wk = Tensor<S>::param_gaussian({d, d}, rng, 0.02);
  p.wv = Tensor<S>::param_gaussian({d, d}, rng, 0.02);
  p.wo = Tensor<S>::param_gaussian({d, d}, rng, 0.02);
  return p;
}

}  // namespace detail

template <typename S>
GraformerParams<S> GraformerParams<S>::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  int d = cfg.model_dimension, ff = cfg.feedforward_dimension;
  GraformerParams<S> p;
  p.embedding = Tensor<S>::param_gaussian({cfg.vocab_size, d}, rng, 0.02);
  p.graph_pos_bias = Tensor<S>::param({cfg.num_heads, cfg.position_vocab().size()},
                                      std::vector<S>(cfg.num_heads * cfg.position_vocab().size(), S(0)));
  p.text_pos_bias = Tensor<S>::param({cfg.num_heads, 2 * cfg.text_range + 1},
                                     std::vector<S>(cfg.num_heads * (2 * cfg.text_range + 1), S(0)));
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    EncoderLayerParams<S> layer;
    layer.attn = detail::init_attention<S>(d, rng);
    layer.ln1_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
    layer.ln1_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    layer.ff_w1 = Tensor<S>::param_gaussian({d, ff}, rng, 0.02);
    layer.ff_b1 = Tensor<S>::param({ff}, std::vector<S>(ff, S(0)));
    layer.ff_w2 = Tensor<S>::param_gaussian({ff, d}, rng, 0.02);
    layer.ff_b2 = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    layer.ln2_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
    layer.ln2_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    p.encoder.push_back(std::move(layer));
  }
  p.enc_final_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
  p.enc_final_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    DecoderLayerParams<S> layer;
    layer.self_attn = detail::init_attention<S>(d, rng);
    layer.ln1_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
    layer.ln1_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    layer.cross_attn = detail::init_attention<S>(d, rng);
    layer.ln2_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
    layer.ln2_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    layer.ff_w1 = Tensor<S>::param_gaussian({d, ff}, rng, 0.02);
    layer.ff_b1 = Tensor<S>::param({ff}, std::vector<S>(ff, S(0)));
    layer.ff_w2 = Tensor<S>::param_gaussian({ff, d}, rng, 0.02);
    layer.ff_b2 = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    layer.ln3_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
    layer.ln3_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
    p.decoder.push_back(std::move(layer));
  }
  p.dec_final_gain = Tensor<S>::param({d}, std::vector<S>(d, S(1)));
  p.dec_final_bias = Tensor<S>::param({d}, std::vector<S>(d, S(0)));
  return p;
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>*>> GraformerParams<S>::named_params() {
  std::vector<std::pair<std::string, Tensor<S>*>> out;
  out.emplace_back("embedding", &embedding);
  out.emplace_back("graph_pos_bias", &graph_pos_bias);
  out.emplace_back("text_pos_bias", &text_pos_bias);
  auto add_attention = [&out](const std::string& prefix, AttentionParams<S>& a) {
    out.emplace_back(prefix + ".wq", &a.wq);
    out.emplace_back(prefix + ".wk", &a.wk);
    out.emplace_back(prefix + ".wv", &a.wv);
    out.emplace_back(prefix + ".wo", &a.wo);
  };
  for (size_t l = 0; l < encoder.size(); ++l) {
    std::string prefix = "encoder." + std::to_string(l);
    auto& layer = encoder[l];
    add_attention(prefix + ".attn", layer.attn);
    out.emplace_back(prefix + ".ln1.gain", &layer.ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", &layer.ln1_bias);
    out.emplace_back(prefix + ".ff.w1", &layer.ff_w1);
    out.emplace_back(prefix + ".ff.b1", &layer.ff_b1);
    out.emplace_back(prefix + ".ff.w2", &layer.ff_w2);
    out.emplace_back(prefix + ".ff.b2", &layer.ff_b2);
    out.emplace_back(prefix + ".ln2.gain", &layer.ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", &layer.ln2_bias);
  }
  out.emplace_back("encoder.final_ln.gain", &enc_final_gain);
  out.emplace_back("encoder.final_ln.bias", &enc_final_bias);
  for (size_t l = 0; l < decoder.size(); ++l) {
    std::string prefix = "decoder." + std::to_string(l);
    auto& layer = decoder[l];
    add_attention(prefix + ".self_attn", layer.self_attn);
    out.emplace_back(prefix + ".ln1.gain", &layer.ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", &layer.ln1_bias);
    add_attention(prefix + ".cross_attn", layer.cross_attn);
    out.emplace_back(prefix + ".ln2.gain", &layer.ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", &layer.ln2_bias);
    out.emplace_back(prefix + ".ff.w1", &layer.ff_w1);
    out.emplace_back(prefix + ".ff.b1", &layer.ff_b1);
    out.emplace_back(prefix + ".ff.w2", &layer.ff_w2);
    out.emplace_back(prefix + ".ff.b2", &layer.ff_b2);
    out.emplace_back(prefix + ".ln3.gain", &layer.ln3_gain);
    out.emplace_back(prefix + ".ln3.bias", &layer.ln3_bias);
  }
  out.emplace_back("decoder.final_ln.gain", &dec_final_gain);
  out.emplace_back("decoder.final_ln.bias", &dec_final_bias);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, const Tensor<S>*>> GraformerParams<S>::named_params() const {
  auto mutable_view = const_cast<GraformerParams<S>*>(this)->named_params();
  std::vector<std::pair<std::string, const Tensor<S>*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, tensor] : mutable_view) out.emplace_back(name, tensor);
  return out;
}

template <typename S>
void GraformerParams<S>::zero_grads() {
  for (auto& [name, tensor] : named_params()) tensor->zero_grad();
}

inline std::vector<std::vector<int>> graph_bucket_indices(const RelPosMatrix& r,
                                                          const PositionVocabulary& vocab) {
  std::vector<std::vector<int>> idx(r.n, std::vector<int>(r.n));
  for (size_t i = 0; i < r.n; ++i)
    for (size_t j = 0; j < r.n; ++j) idx[i][j] = vocab.index_of(r.entries[i][j]);
  return idx;
}

inline std::vector<std::vector<int>> text_bucket_indices(int len, int n_t) {
  std::vector<std::vector<int>> idx(len, std::vector<int>(len));
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) idx[i][j] = std::clamp(j - i, -n_t, n_t) + n_t;
  return idx;
}

template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& queries, const Tensor<S>& context,
                               const AttentionParams<S>& p, int heads,
                               const Tensor<S>& bias_table,
                               const std::vector<std::vector<int>>& buckets, bool causal,
                               double attn_dropout, bool train, Rng& rng) {
  int d = queries.cols();
  require(d % heads == 0, "attention: dimension not divisible by heads");
  int dh = d / heads;
  S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  Tensor<S> q = matmul(queries, p.wq);
  Tensor<S> k = matmul(context, p.wk);
  Tensor<S> v = matmul(context, p.wv);

  std::vector<S> mask;
  if (causal) {
    int n = queries.rows(), m = context.rows();
    mask.assign(static_cast<size_t>(n) * m, S(0));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < m; ++j) mask[static_cast<size_t>(i) * m + j] = static_cast<S>(kMaskValue);
  }

  std::vector<Tensor<S>> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor<S> qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor<S> kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor<S> vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor<S> logits = scale(matmul_nt(qh, kh), inv_sqrt);
    if (bias_table.defined()) logits = add(logits, position_bias(bias_table, h, buckets));
    if (causal) logits = add_const(logits, mask);
    Tensor<S> weights = softmax_rows(logits);
    weights = dropout(weights, attn_dropout, train, rng);
    head_outputs.push_back(matmul(weights, vh));
  }
  return matmul(concat_cols(head_outputs), p.wo);
}

template <typename S>
Tensor<S> graph_self_attention(const Tensor<S>& h, const AttentionParams<S>& p, int heads,
                               const Tensor<S>& graph_pos_bias,
                               const std::vector<std::vector<int>>& buckets,
                               double attn_dropout, bool train, Rng& rng) {
  return multi_head_attention(h, h, p, heads, graph_pos_bias, buckets, /*causal=*/false,
                              attn_dropout, train, rng);
}

template <typename S>
Tensor<S> text_self_attention(const Tensor<S>& z, const AttentionParams<S>& p, int heads,
                              const Tensor<S>& text_pos_bias, int n_t, double attn_dropout,
                              bool train, Rng& rng) {
  auto buckets = text_bucket_indices(z.rows(), n_t);
  return multi_head_attention(z, z, p, heads, text_pos_bias, buckets, /*causal=*/true,
                              attn_dropout, train, rng);
}

namespace detail {

template <typename S, typename Layer>
Tensor<S> feedforward_block(const Tensor<S>& input, const Layer& layer, const Tensor<S>& gain,
                            const Tensor<S>& bias, double residual_dropout, bool train,
                            Rng& rng) {
  Tensor<S> x = layer_norm_rows(input, gain, bias);
  Tensor<S> hidden = gelu(add_rows(matmul(x, layer.ff_w1), layer.ff_b1));
  Tensor<S> out = add_rows(matmul(hidden, layer.ff_w2), layer.ff_b2);
  return add(dropout(out, residual_dropout, train, rng), input);
}

}  // namespace detail

template <typename S>
Tensor<S> encode(const std::vector<int>& node_labels, const RelPosMatrix& r,
                 const GraformerParams<S>& params, const ModelConfig& cfg, bool train,
                 Rng& rng) {
  require(node_labels.size() == r.n,
          "encode: " + std::to_string(node_labels.size()) + " labels vs " +
              std::to_string(r.n) + "-row relative position matrix");
  auto buckets = graph_bucket_indices(r, cfg.position_vocab());

  Tensor<S> h = rows_lookup(params.embedding, node_labels);
  h = dropout(h, cfg.input_dropout, train, rng);
  for (const auto& layer : params.encoder) {
    Tensor<S> normed = layer_norm_rows(h, layer.ln1_gain, layer.ln1_bias);
    Tensor<S> attended = graph_self_attention(normed, layer.attn, cfg.num_heads,
                                              params.graph_pos_bias, buckets,
                                              cfg.attention_dropout, train, rng);
    h = add(dropout(attended, cfg.dropout, train, rng), h);
    h = detail::feedforward_block(h, layer, layer.ln2_gain, layer.ln2_bias, cfg.dropout, train,
                                  rng);
  }
  return layer_norm_rows(h, params.enc_final_gain, params.enc_final_bias);
}

template <typename S>
DecodeOutput<S> decode_forward(const std::vector<int>& input_ids, const Tensor<S>& h_enc,
                               const GraformerParams<S>& params, const ModelConfig& cfg,
                               bool train, Rng& rng) {
  require(!input_ids.empty(), "decode: empty target sequence");

  Tensor<S> z = rows_lookup(params.embedding, input_ids);
  z = dropout(z, cfg.input_dropout, train, rng);
  std::vector<std::vector<int>> no_buckets;
  for (const auto& layer : params.decoder) {
    Tensor<S> normed = layer_norm_rows(z, layer.ln1_gain, layer.ln1_bias);
    Tensor<S> self_attended =
        text_self_attention(normed, layer.self_attn, cfg.num_heads, params.text_pos_bias,
                            cfg.text_range, cfg.attention_dropout, train, rng);
    Tensor<S> c = add(dropout(self_attended, cfg.dropout, train, rng), z);

    Tensor<S> c_normed = layer_norm_rows(c, layer.ln2_gain, layer.ln2_bias);
    Tensor<S> cross = multi_head_attention(c_normed, h_enc, layer.cross_attn, cfg.num_heads,
                                           Tensor<S>(), no_buckets, /*causal=*/false,
                                           cfg.attention_dropout, train, rng);
    Tensor<S> u = add(dropout(cross, cfg.dropout, train, rng), c);

    z = detail::feedforward_block(u, layer, layer.ln3_gain, layer.ln3_bias, cfg.dropout, train,
                                  rng);
  }
  DecodeOutput<S> out;
  out.hidden = layer_norm_rows(z, params.dec_final_gain, params.dec_final_bias);
  out.logits = matmul_nt(out.hidden, params.embedding);
  return out;
}

}  // namespace graformer
