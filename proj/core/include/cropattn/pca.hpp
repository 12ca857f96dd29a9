#ifndef CROPATTN_PCA_HPP
#define CROPATTN_PCA_HPP

#include <vector>

#include "cropattn/types.hpp"

namespace cropattn {

struct PcaResult {
  Matrix coordinates;                      // [n, components]
  Matrix components;                       // [dim, components], unit columns
  std::vector<double> explained_variance;  // eigenvalues, descending
  Eigen::RowVectorXd mean;                 // [1, dim]
};

/// Mean-centered projection onto the top eigenvectors of the sample
/// covariance (1/(n-1)). Sign convention: the largest-magnitude entry of each
/// component is positive, so results are reproducible across solvers.
PcaResult pca_project(const Matrix& vectors, int components = 2);

} // namespace cropattn

#endif // CROPATTN_PCA_HPP
