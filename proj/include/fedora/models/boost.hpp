#pragma once

// First-order gradient boosting on the logistic loss. Each round fits a
// squared-error regression tree to the residuals y - p and adds it to the raw
// score with the learning rate as the leaf multiplier. There is no Hessian
// weighting and no regularisation term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "fedora/models/cart.hpp"

namespace fedora {

struct BoostParams {
  std::size_t n_rounds = 100;
  double learning_rate = 0.3;
  std::optional<std::size_t> max_depth = 6;
  std::size_t min_samples_split = 2;

  void validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw Error(ErrorCode::ConfigInvalid, "learning_rate must be in (0, 1]");
  }
};

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Mean negative log-likelihood of binary labels under raw scores.
inline double logistic_loss(const Labels& y, const std::vector<double>& score) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // log(1 + e^{-s}) for y=1, log(1 + e^{s}) for y=0, computed stably.
    const double s = y[i] == 1 ? -score[i] : score[i];
    total += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }
  return total / static_cast<double>(y.size());
}

class BoostModel {
 public:
  BoostModel(double base_score, double learning_rate, std::vector<Tree> trees,
             std::vector<double> loss_trace)
      : base_(base_score), rate_(learning_rate), trees_(std::move(trees)), loss_(std::move(loss_trace)) {}

  double raw_score(const Matrix& x, Eigen::Index i) const {
    double f = base_;
    for (const auto& t : trees_) f += rate_ * t.leaf(x.row(i)).value;
    return f;
  }

  Labels predict(const Matrix& x) const {
    Labels out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out[static_cast<std::size_t>(i)] = sigmoid(raw_score(x, i)) > 0.5 ? 1 : 0;
    return out;
  }

  std::size_t rounds() const noexcept { return trees_.size(); }
  /// Training loss before the first round and after every round.
  const std::vector<double>& loss_trace() const noexcept { return loss_; }

 private:
  double base_;
  double rate_;
  std::vector<Tree> trees_;
  std::vector<double> loss_;
};

inline BoostModel fit_boost(const Matrix& x, const Labels& y, const BoostParams& params) {
  detail::check_training_set(x, y);
  params.validate();
  if (class_counts(y).size() > 2)
    throw Error(ErrorCode::MulticlassUnsupported, "boosting supports binary labels only");

  const std::size_t n = y.size();
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double prior = std::clamp(positives / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
  const double base = std::log(prior / (1.0 - prior));

  TreeParams tree;
  tree.max_depth = params.max_depth;
  tree.min_samples_split = params.min_samples_split;

  std::vector<double> score(n, base);
  std::vector<double> residual(n);
  std::vector<Tree> trees;
  std::vector<double> trace{logistic_loss(y, score)};
  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = static_cast<double>(y[i]) - sigmoid(score[i]);
    Tree t = fit_regression_tree(x, residual, tree);
    for (std::size_t i = 0; i < n; ++i)
      score[i] += params.learning_rate * t.leaf(x.row(static_cast<Eigen::Index>(i))).value;
    trees.push_back(std::move(t));
    trace.push_back(logistic_loss(y, score));
  }
  return BoostModel(base, params.learning_rate, std::move(trees), std::move(trace));
}

}  // namespace fedora
