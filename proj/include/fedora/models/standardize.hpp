#pragma once

#include <cmath>

#include "fedora/expression.hpp"

namespace fedora {

/// Per-column z-score parameters learnt on training data. Constant columns
/// keep a unit scale. Columns are pre-divided by their largest magnitude so
/// values near the double range (saturated features) do not overflow.
struct Standardizer {
  Vector magnitude;
  Vector mean;   // in units of magnitude
  Vector scale;  // in units of magnitude

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const auto n = static_cast<double>(x.rows());
    s.magnitude.resize(x.cols());
    s.mean.resize(x.cols());
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double c = x.col(j).cwiseAbs().maxCoeff();
      s.magnitude[j] = (std::isfinite(c) && c > 0.0) ? c : 1.0;
      const auto u = (x.col(j).array() / s.magnitude[j]).eval();
      s.mean[j] = u.mean();
      const double sd = std::sqrt((u - s.mean[j]).square().sum() / n);
      s.scale[j] = (std::isfinite(sd) && sd > 1e-12) ? sd : 1.0;
    }
    return s;
  }

  /// Unseen rows may exceed the training magnitude; results are saturated.
  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out.col(j) = (((x.col(j).array() / magnitude[j]) - mean[j]) / scale[j]).unaryExpr(&detail::saturate);
    return out;
  }
};

}  // namespace fedora
