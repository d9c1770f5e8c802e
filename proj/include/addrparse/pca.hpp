#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "addrparse/error.hpp"

namespace addrparse {

struct PcaResult {
  Eigen::MatrixXd coords;      // n x 2 projected scores
  Eigen::MatrixXd components;  // d x 2, unit columns, PC1 first
  Eigen::Vector2d variances;   // eigenvalues of the covariance, descending
  Eigen::RowVectorXd mean;
};

// Top-2 principal components of mean-centered rows. Each component is
// oriented so that its largest-magnitude entry is positive (first such entry
// on ties).
inline PcaResult pca_projection(const Eigen::MatrixXd& x) {
  if (x.rows() < 3) throw DegenerateInput("PCA needs at least 3 rows");
  if (x.cols() < 2) throw DegenerateInput("PCA needs at least 2 columns");
  if (!x.allFinite()) throw DegenerateInput("PCA input has non-finite values");
  PcaResult r;
  r.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - r.mean;
  if (centered.norm() <= 1e-12 * (1.0 + x.norm())) throw DegenerateInput("all rows are identical");
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DegenerateInput("covariance eigendecomposition failed");
  const Eigen::Index d = cov.rows();
  r.components.resize(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < d; ++i) {
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v(arg) < 0) v = -v;
    r.components.col(k) = v;
    r.variances(k) = eig.eigenvalues()(d - 1 - k);
  }
  r.coords = centered * r.components;
  return r;
}

}  // namespace addrparse
