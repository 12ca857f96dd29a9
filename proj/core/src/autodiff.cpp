#include "cropattn/autodiff.hpp"

#include <cmath>
#include <string>

#include "cropattn/errors.hpp"

namespace cropattn {

namespace {

std::string shape_of(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "]";
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_of(a) + " vs " + shape_of(b));
  }
}

} // namespace

int Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Matrix value) { return push(std::move(value), {}); }

int Tape::matmul(int a, int b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.rows()) {
    throw ShapeMismatch("matmul: " + shape_of(va) + " * " + shape_of(vb));
  }
  const int out = push(va * vb, {});
  nodes_.back().back = [a, b, out](Tape& t) {
    const Matrix& g = t.grad(out);
    t.grad_ref(a) += g * t.value(b).transpose();
    t.grad_ref(b) += t.value(a).transpose() * g;
  };
  return out;
}

int Tape::matmul_nt(int a, int b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.cols()) {
    throw ShapeMismatch("matmul_nt: " + shape_of(va) + " * " + shape_of(vb) + "^T");
  }
  const int out = push(va * vb.transpose(), {});
  nodes_.back().back = [a, b, out](Tape& t) {
    const Matrix& g = t.grad(out);
    t.grad_ref(a) += g * t.value(b);
    t.grad_ref(b) += g.transpose() * t.value(a);
  };
  return out;
}

int Tape::add(int a, int b) {
  require_same_shape(value(a), value(b), "add");
  const int out = push(value(a) + value(b), {});
  nodes_.back().back = [a, b, out](Tape& t) {
    t.grad_ref(a) += t.grad(out);
    t.grad_ref(b) += t.grad(out);
  };
  return out;
}

int Tape::add_row_broadcast(int a, int row) {
  const Matrix& va = value(a);
  const Matrix& vr = value(row);
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw ShapeMismatch("add_row_broadcast: " + shape_of(va) + " + " + shape_of(vr));
  }
  Matrix v = va;
  v.rowwise() += vr.row(0);
  const int out = push(std::move(v), {});
  nodes_.back().back = [a, row, out](Tape& t) {
    const Matrix& g = t.grad(out);
    t.grad_ref(a) += g;
    t.grad_ref(row) += g.colwise().sum();
  };
  return out;
}

int Tape::add_const(int a, const Matrix& c) {
  require_same_shape(value(a), c, "add_const");
  const int out = push(value(a) + c, {});
  nodes_.back().back = [a, out](Tape& t) { t.grad_ref(a) += t.grad(out); };
  return out;
}

int Tape::scale(int a, double s) {
  const int out = push(value(a) * s, {});
  nodes_.back().back = [a, out, s](Tape& t) { t.grad_ref(a) += s * t.grad(out); };
  return out;
}

int Tape::relu(int a) {
  const int out = push(value(a).cwiseMax(0.0), {});
  nodes_.back().back = [a, out](Tape& t) {
    // Subgradient 0 at the kink.
    t.grad_ref(a).array() +=
        t.grad(out).array() * (t.value(a).array() > 0.0).cast<double>();
  };
  return out;
}

int Tape::layer_norm_rows(int a, int valid_rows, double eps) {
  const Matrix& x = value(a);
  if (valid_rows < 0 || valid_rows > x.rows()) {
    throw ShapeMismatch("layer_norm_rows: valid_rows " + std::to_string(valid_rows) +
                        " out of range for " + shape_of(x));
  }
  const int n = static_cast<int>(x.cols());
  Matrix y = x;
  std::vector<double> inv_sd(static_cast<size_t>(valid_rows));
  for (int r = 0; r < valid_rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sd[static_cast<size_t>(r)] = inv;
    y.row(r) = (x.row(r).array() - mean) * inv;
  }
  const int out = push(std::move(y), {});
  nodes_.back().back = [a, out, valid_rows, n, inv_sd](Tape& t) {
    const Matrix& yv = t.value(out);
    const Matrix& gy = t.grad(out);
    Matrix& gx = t.grad_ref(a);
    for (int r = 0; r < static_cast<int>(yv.rows()); ++r) {
      if (r >= valid_rows) {
        gx.row(r) += gy.row(r); // pass-through region
        continue;
      }
      const double mean_g = gy.row(r).mean();
      const double mean_gy = (gy.row(r).array() * yv.row(r).array()).sum() / n;
      gx.row(r).array() += inv_sd[static_cast<size_t>(r)] *
                           (gy.row(r).array() - mean_g - yv.row(r).array() * mean_gy);
    }
  };
  return out;
}

int Tape::softmax_rows_masked(int a, int valid) {
  const Matrix& s = value(a);
  if (s.rows() != s.cols()) {
    throw ShapeMismatch("softmax_rows_masked: score matrix must be square, got " +
                        shape_of(s));
  }
  if (valid < 0 || valid > s.rows()) {
    throw ShapeMismatch("softmax_rows_masked: valid " + std::to_string(valid) +
                        " out of range for " + shape_of(s));
  }
  Matrix p = Matrix::Zero(s.rows(), s.cols());
  for (int r = 0; r < valid; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < valid; ++c) mx = std::max(mx, s(r, c));
    double denom = 0.0;
    for (int c = 0; c < valid; ++c) denom += std::exp(s(r, c) - mx);
    for (int c = 0; c < valid; ++c) p(r, c) = std::exp(s(r, c) - mx) / denom;
  }
  const int out = push(std::move(p), {});
  nodes_.back().back = [a, out, valid](Tape& t) {
    const Matrix& pv = t.value(out);
    const Matrix& gp = t.grad(out);
    Matrix& gs = t.grad_ref(a);
    for (int r = 0; r < valid; ++r) {
      double dot = 0.0;
      for (int c = 0; c < valid; ++c) dot += gp(r, c) * pv(r, c);
      for (int c = 0; c < valid; ++c) gs(r, c) += pv(r, c) * (gp(r, c) - dot);
    }
  };
  return out;
}

int Tape::max_pool_valid(int a, int valid_rows) {
  const Matrix& x = value(a);
  if (valid_rows < 1 || valid_rows > x.rows()) {
    throw EmptyInput("max_pool_valid: need at least one valid row, got " +
                     std::to_string(valid_rows));
  }
  const int cols = static_cast<int>(x.cols());
  Matrix y(1, cols);
  std::vector<int> argmax(static_cast<size_t>(cols), 0);
  for (int c = 0; c < cols; ++c) {
    double best = x(0, c);
    int best_r = 0;
    for (int r = 1; r < valid_rows; ++r) {
      if (x(r, c) > best) { // strict: ties keep the earliest slot
        best = x(r, c);
        best_r = r;
      }
    }
    y(0, c) = best;
    argmax[static_cast<size_t>(c)] = best_r;
  }
  const int out = push(std::move(y), {});
  nodes_.back().back = [a, out, argmax](Tape& t) {
    const Matrix& g = t.grad(out);
    Matrix& gx = t.grad_ref(a);
    for (int c = 0; c < g.cols(); ++c) {
      gx(argmax[static_cast<size_t>(c)], c) += g(0, c);
    }
  };
  return out;
}

int Tape::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw EmptyInput("concat_cols: no parts");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (int id : parts) {
    if (value(id).rows() != rows) {
      throw ShapeMismatch("concat_cols: row count mismatch");
    }
    cols += value(id).cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (int id : parts) {
    v.middleCols(at, value(id).cols()) = value(id);
    at += value(id).cols();
  }
  const int out = push(std::move(v), {});
  nodes_.back().back = [parts, out](Tape& t) {
    const Matrix& g = t.grad(out);
    Eigen::Index at2 = 0;
    for (int id : parts) {
      const Eigen::Index w = t.value(id).cols();
      t.grad_ref(id) += g.middleCols(at2, w);
      at2 += w;
    }
  };
  return out;
}

int Tape::slice_cols(int a, int begin, int cols) {
  const Matrix& v = value(a);
  if (begin < 0 || cols < 0 || begin + cols > v.cols()) {
    throw ShapeMismatch("slice_cols: [" + std::to_string(begin) + ", " +
                        std::to_string(begin + cols) + ") out of range for " +
                        shape_of(v));
  }
  const int out = push(v.middleCols(begin, cols), {});
  nodes_.back().back = [a, out, begin, cols](Tape& t) {
    t.grad_ref(a).middleCols(begin, cols) += t.grad(out);
  };
  return out;
}

int Tape::zero_rows_from(int a, int first_invalid) {
  const Matrix& v = value(a);
  if (first_invalid < 0 || first_invalid > v.rows()) {
    throw ShapeMismatch("zero_rows_from: row " + std::to_string(first_invalid) +
                        " out of range for " + shape_of(v));
  }
  Matrix y = v;
  y.bottomRows(v.rows() - first_invalid).setZero();
  const int out = push(std::move(y), {});
  nodes_.back().back = [a, out, first_invalid](Tape& t) {
    t.grad_ref(a).topRows(first_invalid) += t.grad(out).topRows(first_invalid);
  };
  return out;
}

int Tape::focal_loss(int logits, int label, double gamma) {
  const Matrix& z = value(logits);
  if (z.rows() != 1 || z.cols() < 2) {
    throw ShapeMismatch("focal_loss: logits must be [1, C>=2], got " + shape_of(z));
  }
  if (label < 0 || label >= z.cols()) {
    throw ShapeMismatch("focal_loss: label " + std::to_string(label) +
                        " out of range for " + std::to_string(z.cols()) + " classes");
  }
  if (gamma < 0.0) throw InvalidConfig("focal gamma must be nonnegative");

  // Stable softmax + log-softmax.
  const double mx = z.maxCoeff();
  Matrix p = (z.array() - mx).exp();
  const double denom = p.sum();
  p /= denom;
  const double log_pt = z(0, label) - mx - std::log(denom);
  const double pt = p(0, label);
  const double u = 1.0 - pt;
  const double loss = -std::pow(u, gamma) * log_pt;

  // d/dz_j [-(1-pt)^g * ln pt]
  //   = (g * (1-pt)^(g-1) * pt * ln pt - (1-pt)^g) * (onehot_j - p_j)
  Matrix gz(1, z.cols());
  if (gamma > 0.0 && u < 1e-12) {
    gz.setZero(); // the loss surface is flat to machine precision here
  } else {
    const double coeff =
        gamma > 0.0 ? gamma * std::pow(u, gamma - 1.0) * pt * log_pt - std::pow(u, gamma)
                    : -1.0;
    gz = -coeff * p;
    gz(0, label) += coeff;
  }

  Matrix out_value(1, 1);
  out_value(0, 0) = loss;
  const int out = push(std::move(out_value), {});
  nodes_.back().back = [logits, out, gz](Tape& t) {
    t.grad_ref(logits) += t.grad(out)(0, 0) * gz;
  };
  return out;
}

int Tape::sum_scalars(const std::vector<int>& scalars) {
  if (scalars.empty()) throw EmptyInput("sum_scalars: no terms");
  double total = 0.0;
  for (int id : scalars) {
    const Matrix& v = value(id);
    if (v.rows() != 1 || v.cols() != 1) {
      throw ShapeMismatch("sum_scalars: node is " + shape_of(v) + ", expected 1x1");
    }
    total += v(0, 0);
  }
  Matrix out_value(1, 1);
  out_value(0, 0) = total;
  const int out = push(std::move(out_value), {});
  nodes_.back().back = [scalars, out](Tape& t) {
    const double g = t.grad(out)(0, 0);
    for (int id : scalars) t.grad_ref(id)(0, 0) += g;
  };
  return out;
}

void Tape::backward(int root) {
  const Matrix& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) {
    throw ShapeMismatch("backward: root must be 1x1, got " + shape_of(r));
  }
  grad_ref(root)(0, 0) = 1.0;
  for (int id = root; id >= 0; --id) {
    auto& node = nodes_[static_cast<size_t>(id)];
    if (node.back) node.back(*this);
  }
}

} // namespace cropattn
