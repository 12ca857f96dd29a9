#include "cropattn/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "cropattn/errors.hpp"

namespace cropattn {

PcaResult pca_project(const Matrix& vectors, int components) {
  const Eigen::Index n = vectors.rows();
  const Eigen::Index dim = vectors.cols();
  if (n < 2) throw DegenerateInput("need at least 2 vectors for a covariance");
  if (components < 1 || components > dim) {
    throw InvalidConfig("components must lie in [1, " + std::to_string(dim) + "]");
  }

  PcaResult out;
  out.mean = vectors.colwise().mean();
  Matrix centered = vectors.rowwise() - out.mean;
  if (centered.cwiseAbs().maxCoeff() == 0.0) {
    throw DegenerateInput("all vectors identical; covariance is zero");
  }

  const Matrix cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw DegenerateInput("eigendecomposition failed to converge");
  }

  // Eigen returns ascending eigenvalues; take the top `components` from the
  // back and normalize each eigenvector's sign.
  out.components.resize(dim, components);
  out.explained_variance.resize(static_cast<size_t>(components));
  for (int k = 0; k < components; ++k) {
    const Eigen::Index src = dim - 1 - k;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v(largest) < 0.0) v = -v;
    out.components.col(k) = v;
    // Clamp tiny negative eigenvalues from round-off.
    out.explained_variance[static_cast<size_t>(k)] =
        std::max(0.0, solver.eigenvalues()(src));
  }
  out.coordinates = centered * out.components;
  return out;
}

} // namespace cropattn
