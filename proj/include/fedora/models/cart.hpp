#pragma once

// Greedy CART trees. The builder is shared between classification (Gini) and
// regression (squared error) through a criterion policy.
//
// Split selection scans features in ascending index order and thresholds in
// ascending order and only replaces the incumbent on a strictly lower cost, so
// ties resolve to the lowest feature index, then the lowest threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "fedora/dataset.hpp"
#include "fedora/error.hpp"
#include "fedora/random.hpp"

namespace fedora {

struct TreeParams {
  std::optional<std::size_t> max_depth;  // nullopt: grow until pure
  std::size_t min_samples_split = 2;
  /// Features examined per split; nullopt means all of them.
  std::optional<std::size_t> features_per_split;

  void validate() const {
    if (max_depth && *max_depth < 1) throw Error(ErrorCode::ConfigInvalid, "max_depth must be >= 1");
    if (min_samples_split < 2) throw Error(ErrorCode::ConfigInvalid, "min_samples_split must be >= 2");
    if (features_per_split && *features_per_split < 1)
      throw Error(ErrorCode::ConfigInvalid, "features_per_split must be >= 1");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;  // regression output or class id
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  template <typename Row>
  const TreeNode& leaf(const Row& x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
      const auto& n = nodes_[i];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i];
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].feature < 0) return 0;
    return 1 + std::max(depth_from(nodes_[i].left), depth_from(nodes_[i].right));
  }

  std::vector<TreeNode> nodes_;
};

// Criterion policies --------------------------------------------------------

class GiniCriterion {
 public:
  struct Acc {
    std::vector<double> counts;
    double n = 0.0;
  };

  GiniCriterion(const Labels& y, std::size_t classes) : y_(y), classes_(classes) {}

  Acc empty() const { return Acc{std::vector<double>(classes_, 0.0), 0.0}; }
  void add(Acc& a, std::size_t row) const {
    a.counts[static_cast<std::size_t>(y_[row])] += 1.0;
    a.n += 1.0;
  }
  void remove(Acc& a, std::size_t row) const {
    a.counts[static_cast<std::size_t>(y_[row])] -= 1.0;
    a.n -= 1.0;
  }
  /// n * gini(node) = n - sum_k c_k^2 / n.
  double cost(const Acc& a) const {
    if (a.n <= 0.0) return 0.0;
    double sq = 0.0;
    for (double c : a.counts) sq += c * c;
    return a.n - sq / a.n;
  }
  bool pure(const Acc& a) const {
    return std::count_if(a.counts.begin(), a.counts.end(), [](double c) { return c > 0.0; }) <= 1;
  }
  /// Majority class, ties to the lowest id.
  double leaf_value(const Acc& a) const {
    return static_cast<double>(std::max_element(a.counts.begin(), a.counts.end()) - a.counts.begin());
  }

 private:
  const Labels& y_;
  std::size_t classes_;
};

class SquaredErrorCriterion {
 public:
  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
    double n = 0.0;
  };

  explicit SquaredErrorCriterion(const std::vector<double>& y) : y_(y) {}

  Acc empty() const { return Acc{}; }
  void add(Acc& a, std::size_t row) const {
    a.sum += y_[row];
    a.sum_sq += y_[row] * y_[row];
    a.n += 1.0;
  }
  void remove(Acc& a, std::size_t row) const {
    a.sum -= y_[row];
    a.sum_sq -= y_[row] * y_[row];
    a.n -= 1.0;
  }
  double cost(const Acc& a) const {
    if (a.n <= 0.0) return 0.0;
    return std::max(0.0, a.sum_sq - a.sum * a.sum / a.n);
  }
  bool pure(const Acc& a) const { return cost(a) <= 1e-14 * std::max(1.0, a.sum_sq); }
  double leaf_value(const Acc& a) const { return a.n > 0.0 ? a.sum / a.n : 0.0; }

 private:
  const std::vector<double>& y_;
};

// Builder -------------------------------------------------------------------

template <typename Criterion>
class CartBuilder {
 public:
  CartBuilder(const Matrix& x, const Criterion& criterion, const TreeParams& params, Rng* rng)
      : x_(x), criterion_(criterion), params_(params), rng_(rng) {}

  Tree build(std::vector<std::size_t> rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no rows to fit");
    nodes_.clear();
    grow(rows, 0);
    return Tree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double cost = std::numeric_limits<double>::infinity();
  };

  std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    auto total = criterion_.empty();
    for (auto r : rows) criterion_.add(total, r);

    const std::size_t id = nodes_.size();
    nodes_.push_back(TreeNode{-1, 0.0, 0, 0, criterion_.leaf_value(total)});

    const bool depth_left = !params_.max_depth || depth < *params_.max_depth;
    if (!depth_left || rows.size() < params_.min_samples_split || criterion_.pure(total)) return id;

    Split best = find_split(rows, total);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const std::size_t l = grow(left, depth + 1);
    const std::size_t r = grow(right, depth + 1);
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<int> candidate_features() {
    const auto d = static_cast<std::size_t>(x_.cols());
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (!params_.features_per_split || *params_.features_per_split >= d || !rng_) return all;
    const std::size_t k = *params_.features_per_split;
    // Partial Fisher-Yates, then restore ascending order for tie-breaking.
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + uniform_index(*rng_, d - i);
      std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  }

  Split find_split(const std::vector<std::size_t>& rows, const typename Criterion::Acc& total) {
    Split best;
    std::vector<std::pair<double, std::size_t>> sorted(rows.size());
    for (int f : candidate_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        sorted[i] = {x_(static_cast<Eigen::Index>(rows[i]), f), rows[i]};
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;

      auto left = criterion_.empty();
      auto right = total;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        criterion_.add(left, sorted[i].second);
        criterion_.remove(right, sorted[i].second);
        const double a = sorted[i].first;
        const double b = sorted[i + 1].first;
        if (a == b) continue;
        const double cost = criterion_.cost(left) + criterion_.cost(right);
        if (best.feature < 0 || cost < best.cost - 1e-12 * std::max(1.0, best.cost)) {
          best.feature = f;
          best.threshold = midpoint(a, b);
          best.cost = cost;
        }
      }
    }
    return best;
  }

  static double midpoint(double a, double b) {
    double m = a / 2 + b / 2;
    return (m < b) ? m : a;
  }

  const Matrix& x_;
  const Criterion& criterion_;
  const TreeParams& params_;
  Rng* rng_;
  std::vector<TreeNode> nodes_;
};

// Decision tree classifier ---------------------------------------------------

class DecisionTreeModel {
 public:
  DecisionTreeModel() = default;
  explicit DecisionTreeModel(Tree tree) : tree_(std::move(tree)) {}

  int predict_row(const Matrix& x, Eigen::Index i) const {
    return static_cast<int>(tree_.leaf(x.row(i)).value);
  }

  Labels predict(const Matrix& x) const {
    Labels out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_row(x, i);
    return out;
  }

  const Tree& tree() const noexcept { return tree_; }

 private:
  Tree tree_;
};

namespace detail {

inline void check_training_set(const Matrix& x, const Labels& y) {
  if (x.rows() == 0 || y.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::InvalidDataset, "feature rows and labels differ in length");
}

}  // namespace detail

/// Fits on the given rows of (x, y); `rows` may contain repeats (bootstrap).
inline DecisionTreeModel fit_tree_on(const Matrix& x, const Labels& y,
                                     std::vector<std::size_t> rows, const TreeParams& params,
                                     Rng* rng) {
  detail::check_training_set(x, y);
  params.validate();
  GiniCriterion gini(y, class_counts(y).size());
  CartBuilder<GiniCriterion> builder(x, gini, params, rng);
  return DecisionTreeModel(builder.build(std::move(rows)));
}

inline DecisionTreeModel fit_tree(const Matrix& x, const Labels& y, const TreeParams& params,
                                  Rng& rng) {
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree_on(x, y, std::move(rows), params, &rng);
}

inline DecisionTreeModel fit_tree(const Matrix& x, const Labels& y, const TreeParams& params = {}) {
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree_on(x, y, std::move(rows), params, nullptr);
}

/// Regression tree on squared error; leaves hold the mean target.
inline Tree fit_regression_tree(const Matrix& x, const std::vector<double>& target,
                                const TreeParams& params) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  params.validate();
  SquaredErrorCriterion sse(target);
  CartBuilder<SquaredErrorCriterion> builder(x, sse, params, nullptr);
  std::vector<std::size_t> rows(target.size());
  std::iota(rows.begin(), rows.end(), 0);
  return builder.build(std::move(rows));
}

}  // namespace fedora
