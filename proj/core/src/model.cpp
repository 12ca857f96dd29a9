#include "cropattn/model.hpp"

#include <cmath>

#include "cropattn/autodiff.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/preprocess.hpp"

namespace cropattn {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

ModelConfig ModelConfig::resolved() const {
  ModelConfig out = *this;
  if (out.num_heads > 0 && out.model_dim > 0) {
    if (out.key_dim == 0) out.key_dim = out.model_dim / out.num_heads;
    if (out.value_dim == 0) out.value_dim = out.model_dim / out.num_heads;
  }
  if (out.feed_forward_dim == 0) out.feed_forward_dim = 4 * out.model_dim;
  out.validate();
  return out;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v < 1) {
      throw InvalidConfig(std::string(what) + " must be >= 1, got " + std::to_string(v));
    }
  };
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(model_dim, "model_dim");
  positive(key_dim, "key_dim");
  positive(value_dim, "value_dim");
  positive(feed_forward_dim, "feed_forward_dim");
  positive(num_classes, "num_classes");
  positive(t_max, "t_max");
  if (num_classes < 2) {
    throw InvalidConfig("num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  if (model_dim % num_heads != 0) {
    throw InvalidConfig("model_dim " + std::to_string(model_dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (model_dim % 2 != 0) {
    throw InvalidConfig("model_dim must be even for the sinusoidal encoding");
  }
  if (num_heads * value_dim != model_dim) {
    throw InvalidConfig("num_heads * value_dim must equal model_dim (the head "
                        "outputs are concatenated back to the residual width)");
  }
  if (!(layer_norm_eps > 0.0)) {
    throw InvalidConfig("layer_norm_eps must be positive");
  }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

namespace {

void fill_uniform(Matrix& m, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
}

} // namespace

ParameterSet ParameterSet::init(const ModelConfig& config, Rng& rng) {
  ModelConfig cfg = config.resolved();
  ParameterSet p;
  p.config = cfg;

  p.input_weight.resize(kNumBands, cfg.model_dim);
  fill_uniform(p.input_weight, kNumBands, rng);
  p.input_bias.resize(1, cfg.model_dim);
  fill_uniform(p.input_bias, kNumBands, rng);

  const int block = cfg.head_block();
  p.layers.resize(static_cast<size_t>(cfg.num_layers));
  for (auto& layer : p.layers) {
    layer.heads.resize(static_cast<size_t>(cfg.num_heads));
    for (auto& head : layer.heads) {
      head.query.resize(block, cfg.key_dim);
      fill_uniform(head.query, block, rng);
      head.key.resize(block, cfg.key_dim);
      fill_uniform(head.key, block, rng);
      head.value.resize(block, cfg.value_dim);
      fill_uniform(head.value, block, rng);
    }
    layer.ff_w1.resize(cfg.model_dim, cfg.feed_forward_dim);
    fill_uniform(layer.ff_w1, cfg.model_dim, rng);
    layer.ff_b1.resize(1, cfg.feed_forward_dim);
    fill_uniform(layer.ff_b1, cfg.model_dim, rng);
    layer.ff_w2.resize(cfg.feed_forward_dim, cfg.model_dim);
    fill_uniform(layer.ff_w2, cfg.feed_forward_dim, rng);
    layer.ff_b2.resize(1, cfg.model_dim);
    fill_uniform(layer.ff_b2, cfg.feed_forward_dim, rng);
  }

  p.classifier_weight.resize(cfg.model_dim, cfg.num_classes);
  fill_uniform(p.classifier_weight, cfg.model_dim, rng);
  p.classifier_bias.resize(1, cfg.num_classes);
  fill_uniform(p.classifier_bias, cfg.model_dim, rng);
  return p;
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& other) {
  ParameterSet p = other;
  for_each_parameter(p, [](const std::string&, Matrix& m) { m.setZero(); });
  return p;
}

bool all_finite(const ParameterSet& params) {
  bool ok = true;
  for_each_parameter(params, [&](const std::string&, const Matrix& m) {
    if (!m.allFinite()) ok = false;
  });
  return ok;
}

// ---------------------------------------------------------------------------
// Graph construction (shared by the public ops, forward, and the gradients)
// ---------------------------------------------------------------------------

namespace {

/// Tape node ids of one layer's parameters.
struct LayerHandles {
  struct Head {
    int query, key, value;
  };
  std::vector<Head> heads;
  int ff_w1, ff_b1, ff_w2, ff_b2;
};

struct ParameterHandles {
  int input_weight, input_bias;
  std::vector<LayerHandles> layers;
  int classifier_weight, classifier_bias;
};

ParameterHandles stage_parameters(Tape& tape, const ParameterSet& params) {
  ParameterHandles h;
  h.input_weight = tape.leaf(params.input_weight);
  h.input_bias = tape.leaf(params.input_bias);
  for (const auto& layer : params.layers) {
    LayerHandles lh;
    for (const auto& head : layer.heads) {
      lh.heads.push_back({tape.leaf(head.query), tape.leaf(head.key),
                          tape.leaf(head.value)});
    }
    lh.ff_w1 = tape.leaf(layer.ff_w1);
    lh.ff_b1 = tape.leaf(layer.ff_b1);
    lh.ff_w2 = tape.leaf(layer.ff_w2);
    lh.ff_b2 = tape.leaf(layer.ff_b2);
    h.layers.push_back(std::move(lh));
  }
  h.classifier_weight = tape.leaf(params.classifier_weight);
  h.classifier_bias = tape.leaf(params.classifier_bias);
  return h;
}

/// One attention head on its input block; returns the mixed values node and
/// stores the attention node id.
int build_head(Tape& tape, int x, const LayerHandles::Head& head, int block_begin,
               int block_width, int valid, int* attention_node) {
  const int xh = tape.slice_cols(x, block_begin, block_width);
  const int q = tape.matmul(xh, head.query);
  const int k = tape.matmul(xh, head.key);
  const int v = tape.matmul(xh, head.value);
  const double d_k = static_cast<double>(tape.value(q).cols());
  const int scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(d_k));
  const int a = tape.softmax_rows_masked(scores, valid);
  if (attention_node) *attention_node = a;
  return tape.matmul(a, v);
}

int build_multi_head(Tape& tape, int x, const LayerHandles& layer,
                     const ModelConfig& config, int valid,
                     std::vector<int>* attention_nodes) {
  const int block = config.head_block();
  std::vector<int> outputs;
  outputs.reserve(layer.heads.size());
  for (size_t h = 0; h < layer.heads.size(); ++h) {
    int a_node = -1;
    outputs.push_back(build_head(tape, x, layer.heads[h],
                                 static_cast<int>(h) * block, block, valid,
                                 &a_node));
    if (attention_nodes) attention_nodes->push_back(a_node);
  }
  return outputs.size() == 1 ? outputs[0] : tape.concat_cols(outputs);
}

int build_encoder_layer(Tape& tape, int x, const LayerHandles& layer,
                        const ModelConfig& config, int valid,
                        std::vector<int>* attention_nodes) {
  const int mh = build_multi_head(tape, x, layer, config, valid, attention_nodes);
  const int x1 =
      tape.layer_norm_rows(tape.add(x, mh), valid, config.layer_norm_eps);
  int ff = tape.add_row_broadcast(tape.matmul(x1, layer.ff_w1), layer.ff_b1);
  ff = tape.relu(ff);
  ff = tape.add_row_broadcast(tape.matmul(ff, layer.ff_w2), layer.ff_b2);
  // The biases wrote into padded slots; keep those rows identically zero.
  ff = tape.zero_rows_from(ff, valid);
  return tape.layer_norm_rows(tape.add(x1, ff), valid, config.layer_norm_eps);
}

Matrix positional_matrix(const BatchRow& row, int model_dim) {
  Matrix p(row.bands.rows(), model_dim);
  const std::vector<double> pad_enc = positional_encoding(0, model_dim);
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    const std::vector<double> enc =
        t < row.valid_len
            ? positional_encoding(row.dates[static_cast<size_t>(t)].day_of_year,
                                  model_dim)
            : pad_enc;
    for (int j = 0; j < model_dim; ++j) p(t, j) = enc[static_cast<size_t>(j)];
  }
  return p;
}

struct RowNodes {
  int logits = -1;
  int pooled = -1;
  std::vector<int> attention; // layer-major, then head
};

RowNodes build_row(Tape& tape, const BatchRow& row, const ParameterHandles& h,
                   const ModelConfig& config, bool want_attention) {
  if (row.bands.cols() != kNumBands) {
    throw ShapeMismatch("batch row has " + std::to_string(row.bands.cols()) +
                        " bands, expected " + std::to_string(kNumBands));
  }
  if (row.valid_len < 1) {
    throw EmptyRecord("parcel '" + row.parcel_id + "' has no valid observations");
  }

  RowNodes out;
  const int x = tape.leaf(row.bands);
  int e = tape.add_row_broadcast(tape.matmul(x, h.input_weight), h.input_bias);
  e = tape.add_const(e, positional_matrix(row, config.model_dim));
  e = tape.zero_rows_from(e, row.valid_len);
  for (const auto& layer : h.layers) {
    e = build_encoder_layer(tape, e, layer, config, row.valid_len,
                            want_attention ? &out.attention : nullptr);
  }
  out.pooled = tape.max_pool_valid(e, row.valid_len);
  out.logits = tape.add(tape.matmul(out.pooled, h.classifier_weight),
                        h.classifier_bias);
  return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Public single-op entry points (same graph code as the full forward)
// ---------------------------------------------------------------------------

void project_qkv(const Matrix& x, const Matrix& wq, const Matrix& wk,
                 const Matrix& wv, Matrix& q, Matrix& k, Matrix& v) {
  Tape tape;
  const int xn = tape.leaf(x);
  q = tape.value(tape.matmul(xn, tape.leaf(wq)));
  k = tape.value(tape.matmul(xn, tape.leaf(wk)));
  v = tape.value(tape.matmul(xn, tape.leaf(wv)));
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, int valid) {
  if (q.cols() != k.cols()) {
    throw ShapeMismatch("scaled_dot_attention: key width mismatch");
  }
  Tape tape;
  const int scores = tape.scale(tape.matmul_nt(tape.leaf(q), tape.leaf(k)),
                                1.0 / std::sqrt(static_cast<double>(q.cols())));
  return tape.value(tape.softmax_rows_masked(scores, valid));
}

Matrix attend(const Matrix& a, const Matrix& v) {
  Tape tape;
  return tape.value(tape.matmul(tape.leaf(a), tape.leaf(v)));
}

std::pair<Matrix, std::vector<Matrix>> multi_head(const Matrix& x,
                                                  const LayerParams& layer,
                                                  const ModelConfig& config,
                                                  int valid) {
  ModelConfig cfg = config.resolved();
  Tape tape;
  LayerHandles lh;
  for (const auto& head : layer.heads) {
    lh.heads.push_back({tape.leaf(head.query), tape.leaf(head.key),
                        tape.leaf(head.value)});
  }
  std::vector<int> attention_nodes;
  const int out =
      build_multi_head(tape, tape.leaf(x), lh, cfg, valid, &attention_nodes);
  std::vector<Matrix> attention;
  attention.reserve(attention_nodes.size());
  for (int id : attention_nodes) attention.push_back(tape.value(id));
  return {tape.value(out), std::move(attention)};
}

std::pair<Matrix, std::vector<Matrix>> encoder_layer(const Matrix& x,
                                                     const LayerParams& layer,
                                                     const ModelConfig& config,
                                                     int valid) {
  ModelConfig cfg = config.resolved();
  Tape tape;
  LayerHandles lh;
  for (const auto& head : layer.heads) {
    lh.heads.push_back({tape.leaf(head.query), tape.leaf(head.key),
                        tape.leaf(head.value)});
  }
  lh.ff_w1 = tape.leaf(layer.ff_w1);
  lh.ff_b1 = tape.leaf(layer.ff_b1);
  lh.ff_w2 = tape.leaf(layer.ff_w2);
  lh.ff_b2 = tape.leaf(layer.ff_b2);
  std::vector<int> attention_nodes;
  const int out = build_encoder_layer(tape, tape.leaf(x), lh, cfg, valid,
                                      &attention_nodes);
  std::vector<Matrix> attention;
  attention.reserve(attention_nodes.size());
  for (int id : attention_nodes) attention.push_back(tape.value(id));
  return {tape.value(out), std::move(attention)};
}

// ---------------------------------------------------------------------------
// Forward / loss / gradients
// ---------------------------------------------------------------------------

ForwardOutput forward(const PaddedBatch& batch, const ParameterSet& params,
                      bool capture_attention) {
  const ModelConfig& cfg = params.config;
  cfg.validate();

  ForwardOutput out;
  out.logits.resize(batch.size(), cfg.num_classes);
  out.pooled.resize(batch.size(), cfg.model_dim);
  out.records.reserve(static_cast<size_t>(batch.size()));

  Tape tape;
  const ParameterHandles handles = stage_parameters(tape, params);
  for (int i = 0; i < batch.size(); ++i) {
    const BatchRow& row = batch.rows[static_cast<size_t>(i)];
    const RowNodes nodes = build_row(tape, row, handles, cfg, capture_attention);
    out.logits.row(i) = tape.value(nodes.logits).row(0);
    out.pooled.row(i) = tape.value(nodes.pooled).row(0);

    if (capture_attention) {
      AttentionRecord rec;
      rec.parcel_id = row.parcel_id;
      rec.valid_length = row.valid_len;
      rec.dates = row.dates;
      rec.attention.resize(static_cast<size_t>(cfg.num_layers));
      size_t at = 0;
      for (int l = 0; l < cfg.num_layers; ++l) {
        for (int h = 0; h < cfg.num_heads; ++h) {
          rec.attention[static_cast<size_t>(l)].push_back(
              tape.value(nodes.attention.at(at++)));
        }
      }
      out.records.push_back(std::move(rec));
    }
  }
  if (!out.logits.allFinite()) {
    throw NonFiniteLogits("forward produced non-finite logits");
  }
  return out;
}

double batch_loss(const PaddedBatch& batch, const ParameterSet& params,
                  double focal_gamma) {
  if (batch.size() == 0) throw EmptyInput("batch_loss: empty batch");
  Tape tape;
  const ParameterHandles handles = stage_parameters(tape, params);
  double total = 0.0;
  for (const BatchRow& row : batch.rows) {
    const RowNodes nodes = build_row(tape, row, handles, params.config, false);
    total += tape.value(tape.focal_loss(nodes.logits, row.label, focal_gamma))(0, 0);
  }
  const double loss = total / batch.size();
  if (!std::isfinite(loss)) throw NonFiniteLoss("validation loss is not finite");
  return loss;
}

LossAndGradients loss_gradients(const PaddedBatch& batch,
                                const ParameterSet& params, double focal_gamma) {
  if (batch.size() == 0) throw EmptyInput("loss_gradients: empty batch");
  Tape tape;
  const ParameterHandles handles = stage_parameters(tape, params);
  std::vector<int> row_losses;
  row_losses.reserve(static_cast<size_t>(batch.size()));
  for (const BatchRow& row : batch.rows) {
    const RowNodes nodes = build_row(tape, row, handles, params.config, false);
    row_losses.push_back(tape.focal_loss(nodes.logits, row.label, focal_gamma));
  }
  const int mean =
      tape.scale(tape.sum_scalars(row_losses), 1.0 / batch.size());

  LossAndGradients out;
  out.loss = tape.value(mean)(0, 0);
  if (!std::isfinite(out.loss)) {
    throw NonFiniteLoss("training loss is not finite");
  }
  tape.backward(mean);

  out.gradients = ParameterSet::zeros_like(params);
  std::vector<int> ids;
  ids.push_back(handles.input_weight);
  ids.push_back(handles.input_bias);
  for (const auto& lh : handles.layers) {
    for (const auto& head : lh.heads) {
      ids.push_back(head.query);
      ids.push_back(head.key);
      ids.push_back(head.value);
    }
    ids.push_back(lh.ff_w1);
    ids.push_back(lh.ff_b1);
    ids.push_back(lh.ff_w2);
    ids.push_back(lh.ff_b2);
  }
  ids.push_back(handles.classifier_weight);
  ids.push_back(handles.classifier_bias);

  size_t at = 0;
  for_each_parameter(out.gradients, [&](const std::string&, Matrix& m) {
    m = tape.grad(ids.at(at++));
  });
  return out;
}

} // namespace cropattn
