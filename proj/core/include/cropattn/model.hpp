#ifndef CROPATTN_MODEL_HPP
#define CROPATTN_MODEL_HPP

#include <string>
#include <utility>
#include <vector>

#include "cropattn/rng.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

struct ModelConfig {
  int num_layers = 1;
  int num_heads = 1;
  int model_dim = 128;
  int key_dim = 0;          // 0 = model_dim / num_heads
  int value_dim = 0;        // 0 = model_dim / num_heads
  int feed_forward_dim = 0; // 0 = 4 * model_dim
  int num_classes = 0;
  int t_max = 0;            // longest padded series the model will see
  double layer_norm_eps = 1e-5;

  /// Width of each head's input block.
  int head_block() const { return model_dim / num_heads; }

  /// Fill the zero-means-default fields and check the invariants.
  ModelConfig resolved() const;
  void validate() const;
};

/// One attention head: bias-free projections applied to the head's input
/// block (width model_dim / num_heads).
struct HeadParams {
  Matrix query; // [block, key_dim]
  Matrix key;   // [block, key_dim]
  Matrix value; // [block, value_dim]
};

struct LayerParams {
  std::vector<HeadParams> heads;
  Matrix ff_w1; // [model_dim, feed_forward_dim]
  Matrix ff_b1; // [1, feed_forward_dim]
  Matrix ff_w2; // [feed_forward_dim, model_dim]
  Matrix ff_b2; // [1, model_dim]
};

struct ParameterSet {
  ModelConfig config;
  Matrix input_weight; // [kNumBands, model_dim]
  Matrix input_bias;   // [1, model_dim]
  std::vector<LayerParams> layers;
  Matrix classifier_weight; // [model_dim, num_classes]
  Matrix classifier_bias;   // [1, num_classes]

  /// Seed-deterministic init: every entry uniform in [-1/sqrt(fan_in),
  /// +1/sqrt(fan_in)], fan_in = input width of the owning projection.
  static ParameterSet init(const ModelConfig& config, Rng& rng);
  /// Same shapes, all zeros (gradient / moment containers).
  static ParameterSet zeros_like(const ParameterSet& other);
};

/// Visit every parameter matrix as (name, matrix). Order and names are
/// stable; checkpoints and optimizer state key off them.
template <typename Set, typename Fn>
void for_each_parameter(Set& params, Fn&& fn) {
  fn("input.weight", params.input_weight);
  fn("input.bias", params.input_bias);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const std::string lp = "layer" + std::to_string(l) + ".";
    for (size_t h = 0; h < layer.heads.size(); ++h) {
      const std::string hp = lp + "head" + std::to_string(h) + ".";
      fn(hp + "query", layer.heads[h].query);
      fn(hp + "key", layer.heads[h].key);
      fn(hp + "value", layer.heads[h].value);
    }
    fn(lp + "ffn.weight1", layer.ff_w1);
    fn(lp + "ffn.bias1", layer.ff_b1);
    fn(lp + "ffn.weight2", layer.ff_w2);
    fn(lp + "ffn.bias2", layer.ff_b2);
  }
  fn("classifier.weight", params.classifier_weight);
  fn("classifier.bias", params.classifier_bias);
}

/// Visit parameter/gradient pairs in lockstep (same traversal order).
template <typename Fn>
void for_each_parameter_pair(ParameterSet& params, const ParameterSet& grads, Fn&& fn) {
  std::vector<const Matrix*> gcol;
  for_each_parameter(grads, [&](const std::string&, const Matrix& m) { gcol.push_back(&m); });
  size_t i = 0;
  for_each_parameter(params, [&](const std::string& name, Matrix& m) {
    fn(name, m, *gcol.at(i++));
  });
}

bool all_finite(const ParameterSet& params);

/// Attention matrices of one parcel, per (layer, head). Each matrix is
/// [t_max, t_max]; rows/columns at or beyond valid_length are zero; every
/// valid row sums to 1 over valid columns.
struct AttentionRecord {
  std::string parcel_id;
  int valid_length = 0;
  std::vector<Date> dates;                    // size valid_length
  std::vector<std::vector<Matrix>> attention; // [layer][head]
};

struct ForwardOutput {
  Matrix logits;                        // [batch, num_classes]
  Matrix pooled;                        // [batch, model_dim]
  std::vector<AttentionRecord> records; // one per batch row
};

/// Bias-free projections Q = X Wq, K = X Wk, V = X Wv.
void project_qkv(const Matrix& x, const Matrix& wq, const Matrix& wk,
                 const Matrix& wv, Matrix& q, Matrix& k, Matrix& v);

/// softmax(Q K^T / sqrt(d_k)) with columns >= valid masked to -inf and rows
/// >= valid all zero.
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, int valid);

/// h_i = sum_j a_ij v_j.
Matrix attend(const Matrix& a, const Matrix& v);

/// All heads on their input blocks, outputs concatenated. Returns the mixed
/// features and each head's attention matrix.
std::pair<Matrix, std::vector<Matrix>> multi_head(const Matrix& x,
                                                  const LayerParams& layer,
                                                  const ModelConfig& config,
                                                  int valid);

/// Post-norm residual block: x1 = LN(x + multi_head(x)); out = LN(x1 +
/// FFN(x1)); padded rows stay zero. Returns (out, per-head attention).
std::pair<Matrix, std::vector<Matrix>> encoder_layer(const Matrix& x,
                                                     const LayerParams& layer,
                                                     const ModelConfig& config,
                                                     int valid);

/// Full forward pass: input projection + positional encoding -> encoder
/// stack -> max-pool over valid slots -> linear classifier.
ForwardOutput forward(const PaddedBatch& batch, const ParameterSet& params,
                      bool capture_attention = true);

/// Mean focal loss of the batch under the current parameters.
double batch_loss(const PaddedBatch& batch, const ParameterSet& params,
                  double focal_gamma);

struct LossAndGradients {
  double loss = 0.0;
  ParameterSet gradients;
};

/// Mean focal loss over the batch and its exact gradients w.r.t. every
/// parameter (reverse-mode on the op graph).
LossAndGradients loss_gradients(const PaddedBatch& batch,
                                const ParameterSet& params, double focal_gamma);

} // namespace cropattn

#endif // CROPATTN_MODEL_HPP
