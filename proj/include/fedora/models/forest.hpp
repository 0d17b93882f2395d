#pragma once

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "fedora/models/cart.hpp"

namespace fedora {

struct ForestParams {
  std::size_t n_estimators = 5;
  std::optional<std::size_t> max_depth = 5;
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  /// Features examined per split; nullopt means floor(sqrt(d)).
  std::optional<std::size_t> features_per_split;

  void validate() const {
    if (n_estimators < 1) throw Error(ErrorCode::ConfigInvalid, "n_estimators must be >= 1");
  }
};

class ForestModel {
 public:
  ForestModel(std::vector<DecisionTreeModel> trees, std::size_t classes)
      : trees_(std::move(trees)), classes_(classes) {}

  /// Majority vote; ties go to the lower class id.
  Labels predict(const Matrix& x) const {
    Labels out(static_cast<std::size_t>(x.rows()));
    std::vector<std::size_t> votes(classes_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::fill(votes.begin(), votes.end(), 0);
      for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict_row(x, i))];
      out[static_cast<std::size_t>(i)] =
          static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
  }

  const std::vector<DecisionTreeModel>& trees() const noexcept { return trees_; }

 private:
  std::vector<DecisionTreeModel> trees_;
  std::size_t classes_;
};

inline ForestModel fit_forest(const Matrix& x, const Labels& y, const ForestParams& params,
                              std::uint64_t seed) {
  detail::check_training_set(x, y);
  params.validate();
  const auto n = y.size();
  const auto d = static_cast<std::size_t>(x.cols());

  TreeParams tree;
  tree.max_depth = params.max_depth;
  tree.min_samples_split = params.min_samples_split;
  tree.features_per_split = params.features_per_split.value_or(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))))));

  std::vector<DecisionTreeModel> trees;
  trees.reserve(params.n_estimators);
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    Rng rng(derive_seed({seed, t}));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap)
      for (auto& r : rows) r = uniform_index(rng, n);
    else
      std::iota(rows.begin(), rows.end(), 0);
    trees.push_back(fit_tree_on(x, y, std::move(rows), tree, &rng));
  }
  return ForestModel(std::move(trees), class_counts(y).size());
}

}  // namespace fedora
