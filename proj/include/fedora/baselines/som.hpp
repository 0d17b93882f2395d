#pragma once

// Online self-organising map on a k x 1 grid. Learning rate and neighbourhood
// radius decay linearly over the whole run; the neighbourhood is Gaussian in
// grid distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "fedora/error.hpp"
#include "fedora/expression.hpp"
#include "fedora/random.hpp"

namespace fedora {

struct SomParams {
  std::size_t epochs = 100;
  double initial_learning_rate = 0.5;
  std::optional<double> initial_radius;  // nullopt: k / 2
  bool record_history = false;
};

struct SomModel {
  Matrix codebook;                  // k x d
  std::vector<Matrix> history;      // codebook after each epoch, if recorded

  std::size_t k() const noexcept { return static_cast<std::size_t>(codebook.rows()); }

  std::size_t best_matching_unit(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    Eigen::Index best = 0;
    (codebook.rowwise() - x).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
  }

  /// Euclidean distance of every sample to every unit (n x k).
  Matrix transform(const Matrix& x) const {
    Matrix out(x.rows(), codebook.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out.row(i) = (codebook.rowwise() - x.row(i)).rowwise().norm().transpose();
    return out;
  }
};

inline SomModel fit_som(const Matrix& x, std::size_t k, const SomParams& params, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "SOM needs at least one unit");
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no rows to fit");
  Rng rng(derive_seed({seed, 0x50u}));
  const auto n = static_cast<std::size_t>(x.rows());

  SomModel m;
  m.codebook.resize(static_cast<Eigen::Index>(k), x.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t u = 0; u < k; ++u)
    m.codebook.row(static_cast<Eigen::Index>(u)) =
        x.row(static_cast<Eigen::Index>(u < n ? order[u] : uniform_index(rng, n)));

  const double r0 = params.initial_radius.value_or(static_cast<double>(k) / 2.0);
  const double total = static_cast<double>(params.epochs * n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const double remaining = 1.0 - static_cast<double>(step++) / total;
      const double lr = params.initial_learning_rate * remaining;
      const double radius = std::max(r0 * remaining, 1e-3);
      const auto row = x.row(static_cast<Eigen::Index>(i));
      const auto bmu = static_cast<double>(m.best_matching_unit(row));
      for (Eigen::Index u = 0; u < m.codebook.rows(); ++u) {
        const double g = static_cast<double>(u) - bmu;
        const double h = std::exp(-(g * g) / (2.0 * radius * radius));
        if (h < 1e-12) continue;
        m.codebook.row(u) += lr * h * (row - m.codebook.row(u));
      }
    }
    if (params.record_history) m.history.push_back(m.codebook);
  }
  return m;
}

}  // namespace fedora
