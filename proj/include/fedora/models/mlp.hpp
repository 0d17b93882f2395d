#pragma once

// One-hidden-layer perceptron classifier trained with mini-batch gradient
// descent on softmax cross-entropy. Inputs are z-scored with parameters learnt
// on the training set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fedora/dataset.hpp"
#include "fedora/models/cart.hpp"
#include "fedora/models/standardize.hpp"
#include "fedora/random.hpp"

namespace fedora {

enum class Activation { Relu, Tanh };
enum class Optimizer { Sgd, Adam };

struct MlpParams {
  std::size_t hidden_units = 100;
  Activation activation = Activation::Relu;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_units < 1) throw Error(ErrorCode::ConfigInvalid, "hidden_units must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "learning_rate must be > 0");
  }
};

struct MlpWeights {
  Matrix w1;  // hidden x inputs
  Vector b1;
  Matrix w2;  // classes x hidden
  Vector b2;
};

/// The bare network: forward pass, loss and analytic gradient.
class MlpNetwork {
 public:
  MlpNetwork(MlpWeights w, Activation act) : w_(std::move(w)), act_(act) {}

  static MlpNetwork initialise(std::size_t inputs, std::size_t hidden, std::size_t classes,
                               Activation act, Rng& rng) {
    auto glorot = [&](std::size_t rows, std::size_t cols) {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
      return m;
    };
    MlpWeights w;
    w.w1 = glorot(hidden, inputs);
    w.b1 = Vector::Zero(static_cast<Eigen::Index>(hidden));
    w.w2 = glorot(classes, hidden);
    w.b2 = Vector::Zero(static_cast<Eigen::Index>(classes));
    return MlpNetwork(std::move(w), act);
  }

  MlpWeights& weights() noexcept { return w_; }
  const MlpWeights& weights() const noexcept { return w_; }

  /// Class probabilities, one row per sample.
  Matrix probabilities(const Matrix& x) const {
    Matrix z = logits(activate(pre_activation(x)));
    softmax_rows(z);
    return z;
  }

  double loss(const Matrix& x, const Labels& y) const {
    Matrix p = probabilities(x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      total -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300));
    return total / static_cast<double>(p.rows());
  }

  MlpWeights gradient(const Matrix& x, const Labels& y) const {
    const Matrix a = pre_activation(x);
    const Matrix h = activate(a);
    Matrix dz = logits(h);
    softmax_rows(dz);
    for (Eigen::Index i = 0; i < dz.rows(); ++i) dz(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    dz /= static_cast<double>(x.rows());

    MlpWeights g;
    g.w2 = dz.transpose() * h;
    g.b2 = dz.colwise().sum().transpose();
    Matrix da = dz * w_.w2;
    if (act_ == Activation::Relu)
      da = (a.array() > 0.0).select(da, 0.0);
    else
      da = da.array() * (1.0 - h.array().square());
    g.w1 = da.transpose() * x;
    g.b1 = da.colwise().sum().transpose();
    return g;
  }

 private:
  Matrix pre_activation(const Matrix& x) const {
    return (x * w_.w1.transpose()).rowwise() + w_.b1.transpose();
  }
  Matrix activate(const Matrix& a) const {
    if (act_ == Activation::Relu) return a.cwiseMax(0.0);
    return a.array().tanh().matrix();
  }
  Matrix logits(const Matrix& h) const { return (h * w_.w2.transpose()).rowwise() + w_.b2.transpose(); }

  static void softmax_rows(Matrix& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double m = z.row(i).maxCoeff();
      z.row(i) = (z.row(i).array() - m).exp();
      z.row(i) /= z.row(i).sum();
    }
  }

  MlpWeights w_;
  Activation act_;
};

class MlpModel {
 public:
  MlpModel(Standardizer s, MlpNetwork net) : scaler_(std::move(s)), net_(std::move(net)) {}

  Labels predict(const Matrix& x) const {
    Matrix p = net_.probabilities(scaler_.apply(x));
    Labels out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::Index best = 0;
      p.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }

  const MlpNetwork& network() const noexcept { return net_; }
  const Standardizer& scaler() const noexcept { return scaler_; }

 private:
  Standardizer scaler_;
  MlpNetwork net_;
};

namespace detail {

// Adam or plain SGD over a flat list of parameter blocks.
class ParameterUpdater {
 public:
  ParameterUpdater(Optimizer kind, double lr) : kind_(kind), lr_(lr) {}

  template <typename Block>
  void step(std::size_t slot, Block& param, const Block& grad) {
    if (kind_ == Optimizer::Sgd) {
      param -= lr_ * grad;
      return;
    }
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    Matrix& m = m_[slot];
    Matrix& v = v_[slot];
    if (m.size() == 0) {
      m = Matrix::Zero(grad.rows(), grad.cols());
      v = Matrix::Zero(grad.rows(), grad.cols());
    }
    m = kBeta1 * m + (1 - kBeta1) * grad;
    v = kBeta2 * v + (1 - kBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1 - std::pow(kBeta2, static_cast<double>(t_));
    param -= (lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps)).matrix();
  }

  void tick() { ++t_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace detail

inline MlpModel fit_mlp(const Matrix& x, const Labels& y, const MlpParams& params) {
  detail::check_training_set(x, y);
  params.validate();
  const std::size_t classes = std::max<std::size_t>(2, class_counts(y).size());

  Standardizer scaler = Standardizer::fit(x);
  const Matrix xs = scaler.apply(x);
  Rng rng(derive_seed({params.seed, 0x31fu}));
  MlpNetwork net = MlpNetwork::initialise(static_cast<std::size_t>(x.cols()), params.hidden_units,
                                          classes, params.activation, rng);
  detail::ParameterUpdater updater(params.optimizer, params.learning_rate);

  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t stop = std::min(n, start + params.batch_size);
      Matrix xb(static_cast<Eigen::Index>(stop - start), xs.cols());
      Labels yb(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = xs.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y[order[i]];
      }
      MlpWeights g = net.gradient(xb, yb);
      auto& w = net.weights();
      updater.tick();
      updater.step(0, w.w1, g.w1);
      updater.step(1, w.b1, g.b1);
      updater.step(2, w.w2, g.w2);
      updater.step(3, w.b2, g.b2);
    }
  }
  return MlpModel(std::move(scaler), std::move(net));
}

}  // namespace fedora
