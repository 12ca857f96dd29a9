#ifndef CROPATTN_AUTODIFF_HPP
#define CROPATTN_AUTODIFF_HPP

#include <functional>
#include <vector>

#include "cropattn/types.hpp"

namespace cropattn {

/// Reverse-mode autodiff over dense double matrices. Build a graph by calling
/// op methods (each returns a node id), then call backward(root) on a 1x1
/// node; gradients accumulate into every node reachable from the root.
///
/// The op set is exactly what the encoder needs; every backward rule is
/// hand-derived and checked against central finite differences in the tests.
class Tape {
 public:
  /// New graph input (parameter or data). Gradient starts at zero.
  int leaf(Matrix value);

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

  int matmul(int a, int b);    // A * B
  int matmul_nt(int a, int b); // A * B^T
  int add(int a, int b);       // same shape
  /// A + row replicated over every row of A (row is [1, cols(A)]).
  int add_row_broadcast(int a, int row);
  /// A + constant (no gradient into the constant).
  int add_const(int a, const Matrix& c);
  int scale(int a, double s);
  int relu(int a);
  /// Row-wise layer normalization (mean 0, variance 1, epsilon inside the
  /// square root) applied to the first valid_rows rows; the rest pass through
  /// unchanged. No learned affine.
  int layer_norm_rows(int a, int valid_rows, double eps);
  /// Row softmax over the leading valid x valid block of a square score
  /// matrix. Entries outside valid columns get probability 0 (the -inf mask);
  /// rows at or beyond valid are all zero.
  int softmax_rows_masked(int a, int valid);
  /// Column-wise max over the first valid_rows rows -> [1, cols]. Padded rows
  /// never participate (the -inf convention); ties route the gradient to the
  /// earliest row.
  int max_pool_valid(int a, int valid_rows);
  int concat_cols(const std::vector<int>& parts);
  int slice_cols(int a, int begin, int cols);
  /// Zero every row at index >= first_invalid; gradient into those rows is
  /// dropped.
  int zero_rows_from(int a, int first_invalid);
  /// Focal loss -(1 - p_t)^gamma * log(p_t) of a [1, C] logit row against an
  /// integer label; gamma = 0 is plain cross-entropy. Fused node with an
  /// analytic gradient. Returns a 1x1 node.
  int focal_loss(int logits, int label, double gamma);
  /// Sum of 1x1 nodes.
  int sum_scalars(const std::vector<int>& scalars);

  /// Seed d(root)/d(root) = 1 and sweep the graph in reverse creation order.
  /// root must be 1x1.
  void backward(int root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back; // empty for leaves
  };

  int push(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_ref(int id) { return nodes_[static_cast<size_t>(id)].grad; }

  std::vector<Node> nodes_;
};

} // namespace cropattn

#endif // CROPATTN_AUTODIFF_HPP
