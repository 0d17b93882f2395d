#pragma once

// Linear autoencoder d -> h -> k -> h -> d trained with plain mini-batch SGD on
// mean squared reconstruction error. The k-unit code layer is the embedding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fedora/error.hpp"
#include "fedora/expression.hpp"
#include "fedora/models/standardize.hpp"
#include "fedora/random.hpp"

namespace fedora {

struct AeParams {
  std::size_t hidden_units = 50;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
};

/// Four affine layers; layer i maps rows through x * W[i]^T + b[i].
struct AeWeights {
  std::array<Matrix, 4> w;
  std::array<Vector, 4> b;
};

class LinearAutoencoder {
 public:
  explicit LinearAutoencoder(AeWeights w) : w_(std::move(w)) {}

  static LinearAutoencoder initialise(std::size_t inputs, std::size_t hidden, std::size_t code, Rng& rng) {
    const std::array<std::size_t, 5> widths{inputs, hidden, code, hidden, inputs};
    AeWeights w;
    for (std::size_t l = 0; l < 4; ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
      std::uniform_real_distribution<double> u(-limit, limit);
      w.w[l].resize(static_cast<Eigen::Index>(widths[l + 1]), static_cast<Eigen::Index>(widths[l]));
      for (Eigen::Index i = 0; i < w.w[l].rows(); ++i)
        for (Eigen::Index j = 0; j < w.w[l].cols(); ++j) w.w[l](i, j) = u(rng);
      w.b[l] = Vector::Zero(static_cast<Eigen::Index>(widths[l + 1]));
    }
    return LinearAutoencoder(std::move(w));
  }

  AeWeights& weights() noexcept { return w_; }
  const AeWeights& weights() const noexcept { return w_; }

  Matrix encode(const Matrix& x) const { return layer(1, layer(0, x)); }
  Matrix reconstruct(const Matrix& x) const { return layer(3, layer(2, encode(x))); }

  /// Mean over all n * d squared reconstruction errors.
  double loss(const Matrix& x) const {
    return (reconstruct(x) - x).squaredNorm() / static_cast<double>(x.size());
  }

  AeWeights gradient(const Matrix& x) const {
    std::array<Matrix, 5> act;
    act[0] = x;
    for (std::size_t l = 0; l < 4; ++l) act[l + 1] = layer(l, act[l]);
    Matrix delta = 2.0 * (act[4] - x) / static_cast<double>(x.size());
    AeWeights g;
    for (std::size_t l = 4; l-- > 0;) {
      g.w[l] = delta.transpose() * act[l];
      g.b[l] = delta.colwise().sum().transpose();
      if (l > 0) delta = delta * w_.w[l];
    }
    return g;
  }

 private:
  Matrix layer(std::size_t l, const Matrix& in) const {
    return (in * w_.w[l].transpose()).rowwise() + w_.b[l].transpose();
  }

  AeWeights w_;
};

struct AeModel {
  Standardizer scaler;
  LinearAutoencoder network;
  std::vector<double> loss_trace;  // full-data loss before training and after each epoch

  std::size_t k() const noexcept { return static_cast<std::size_t>(network.weights().w[1].rows()); }
  Matrix transform(const Matrix& x) const { return network.encode(scaler.apply(x)); }
};

inline AeModel fit_autoencoder(const Matrix& x, std::size_t k, const AeParams& params, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "autoencoder code size must be >= 1");
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no rows to fit");
  if (params.batch_size < 1) throw Error(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
  Rng rng(derive_seed({seed, 0xAEu}));

  Standardizer scaler = Standardizer::fit(x);
  const Matrix xs = scaler.apply(x);
  auto net = LinearAutoencoder::initialise(static_cast<std::size_t>(x.cols()), params.hidden_units, k, rng);

  std::vector<double> trace{net.loss(xs)};
  const auto n = static_cast<std::size_t>(xs.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t stop = std::min(n, start + params.batch_size);
      Matrix batch(static_cast<Eigen::Index>(stop - start), xs.cols());
      for (std::size_t i = start; i < stop; ++i)
        batch.row(static_cast<Eigen::Index>(i - start)) = xs.row(static_cast<Eigen::Index>(order[i]));
      AeWeights g = net.gradient(batch);
      auto& w = net.weights();
      for (std::size_t l = 0; l < 4; ++l) {
        w.w[l] -= params.learning_rate * g.w[l];
        w.b[l] -= params.learning_rate * g.b[l];
      }
    }
    const double loss = net.loss(xs);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::DivergenceDetected,
                  "autoencoder loss became non-finite at epoch " + std::to_string(epoch + 1));
    trace.push_back(loss);
  }
  return AeModel{std::move(scaler), std::move(net), std::move(trace)};
}

}  // namespace fedora
