#ifndef CROPATTN_METRICS_HPP
#define CROPATTN_METRICS_HPP

#include <vector>

#include "cropattn/checkpoint.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

struct Metrics {
  double overall_accuracy = 0.0;
  /// Mean per-class recall over classes present in the split.
  double class_accuracy = 0.0;
  /// Mean per-class F1 (2TP / (2TP + FP + FN), 0 when undefined) over classes
  /// present in the split or predicted at least once.
  double macro_f1 = 0.0;
  /// Counts, rows = true class, cols = predicted class.
  Eigen::MatrixXd confusion;
};

/// Predicted class per parcel (argmax logits, ties to the lowest index).
std::vector<int> predict(const Checkpoint& ckpt, const Dataset& dataset,
                         const std::vector<std::size_t>& indices);

/// Single deterministic pass over the given parcel indices.
Metrics evaluate(const Checkpoint& ckpt, const Dataset& dataset,
                 const std::vector<std::size_t>& indices);

/// Metrics from an existing confusion matrix (rows = true class).
Metrics metrics_from_confusion(const Matrix& confusion);

} // namespace cropattn

#endif // CROPATTN_METRICS_HPP
