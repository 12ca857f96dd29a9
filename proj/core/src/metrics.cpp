#include "cropattn/metrics.hpp"

#include <algorithm>

#include "cropattn/errors.hpp"
#include "cropattn/model.hpp"
#include "cropattn/preprocess.hpp"

namespace cropattn {

std::vector<int> predict(const Checkpoint& ckpt, const Dataset& dataset,
                         const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw EmptySplit("no parcels to predict on");

  std::vector<int> predictions;
  predictions.reserve(indices.size());
  const auto batches = make_minibatches(indices, 256);
  for (const auto& chunk : batches) {
    int t_max = 1;
    for (std::size_t idx : chunk) {
      t_max = std::max(t_max, dataset.parcels.at(idx).length());
    }
    const PaddedBatch batch = make_batch(dataset, chunk, t_max);
    const ForwardOutput out = forward(batch, ckpt.params, /*capture_attention=*/false);
    for (int r = 0; r < out.logits.rows(); ++r) {
      int best = 0;
      for (int c = 1; c < out.logits.cols(); ++c) {
        if (out.logits(r, c) > out.logits(r, best)) best = c;
      }
      predictions.push_back(best);
    }
  }
  return predictions;
}

Metrics metrics_from_confusion(const Matrix& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() < 1) {
    throw ShapeMismatch("confusion matrix must be square and nonempty");
  }
  const int c = static_cast<int>(confusion.rows());
  const double total = confusion.sum();
  if (total <= 0.0) throw EmptySplit("confusion matrix has no observations");

  Metrics m;
  m.confusion = confusion;
  m.overall_accuracy = confusion.diagonal().sum() / total;

  double recall_sum = 0.0;
  int recall_classes = 0;
  double f1_sum = 0.0;
  int f1_classes = 0;
  for (int k = 0; k < c; ++k) {
    const double tp = confusion(k, k);
    const double support = confusion.row(k).sum();   // true count
    const double predicted = confusion.col(k).sum(); // predicted count
    if (support > 0.0) {
      recall_sum += tp / support;
      ++recall_classes;
    }
    if (support > 0.0 || predicted > 0.0) {
      const double denom = support + predicted; // = 2TP + FP + FN
      f1_sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
      ++f1_classes;
    }
  }
  m.class_accuracy = recall_classes > 0 ? recall_sum / recall_classes : 0.0;
  m.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;
  return m;
}

Metrics evaluate(const Checkpoint& ckpt, const Dataset& dataset,
                 const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw EmptySplit("cannot evaluate an empty split");
  const int c = ckpt.params.config.num_classes;

  const std::vector<int> predictions = predict(ckpt, dataset, indices);
  Matrix confusion = Matrix::Zero(c, c);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int truth = dataset.class_index(dataset.parcels.at(indices[i]).crop);
    if (truth < 0 || truth >= c) {
      throw UnknownCrop("crop '" + dataset.parcels.at(indices[i]).crop +
                        "' is outside the model's classes");
    }
    confusion(truth, predictions[i]) += 1.0;
  }
  return metrics_from_confusion(confusion);
}

} // namespace cropattn
