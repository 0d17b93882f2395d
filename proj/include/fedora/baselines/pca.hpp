#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <cstddef>

#include "fedora/error.hpp"
#include "fedora/expression.hpp"

namespace fedora {

struct PcaModel {
  Vector mean;
  Matrix components;           // d x k, one principal axis per column
  Vector explained_variance;   // per component, sample variance (n - 1)

  std::size_t k() const noexcept { return static_cast<std::size_t>(components.cols()); }

  Matrix transform(const Matrix& x) const { return (x.rowwise() - mean.transpose()) * components; }
};

/// Principal components of the centred training matrix via SVD, ordered by
/// descending singular value. Each axis is signed so that its largest
/// magnitude loading is positive.
inline PcaModel fit_pca(const Matrix& x, std::size_t k) {
  const auto d = static_cast<std::size_t>(x.cols());
  if (k < 1 || k > d)
    throw Error(ErrorCode::KTooLarge, "PCA needs 1 <= k <= " + std::to_string(d) + ", got " + std::to_string(k));
  if (x.rows() < 2) throw Error(ErrorCode::EmptyTrainingSet, "PCA needs at least two rows");

  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  const Matrix centred = x.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centred, Eigen::ComputeFullV);

  const auto kk = static_cast<Eigen::Index>(k);
  m.components = svd.matrixV().leftCols(kk);
  m.explained_variance = Vector::Zero(kk);
  const auto& s = svd.singularValues();
  for (Eigen::Index i = 0; i < kk; ++i) {
    if (i < s.size()) m.explained_variance[i] = s[i] * s[i] / static_cast<double>(x.rows() - 1);
    Eigen::Index arg = 0;
    m.components.col(i).cwiseAbs().maxCoeff(&arg);
    if (m.components(arg, i) < 0) m.components.col(i) *= -1.0;
  }
  return m;
}

}  // namespace fedora
