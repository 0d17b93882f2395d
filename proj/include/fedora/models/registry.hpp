#pragma once

// Uniform entry point over the classifier family, used for proxies inside the
// evolutionary loop and for the testing models afterwards.

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "fedora/models/boost.hpp"
#include "fedora/models/cart.hpp"
#include "fedora/models/forest.hpp"
#include "fedora/models/metrics.hpp"
#include "fedora/models/mlp.hpp"

namespace fedora {

enum class ModelKind { DecisionTree, RandomForest, BoostedTrees, Mlp };

inline constexpr std::array<ModelKind, 4> kAllModels{ModelKind::DecisionTree, ModelKind::RandomForest,
                                                     ModelKind::BoostedTrees, ModelKind::Mlp};

constexpr std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::DecisionTree: return "decision_tree";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::BoostedTrees: return "boosted_trees";
    case ModelKind::Mlp: return "mlp";
  }
  return "unknown";
}

/// Accepts the canonical names plus the short forms DT, RF, XGB/Boost and MLP.
inline ModelKind parse_model_kind(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "decision_tree" || lower == "dt") return ModelKind::DecisionTree;
  if (lower == "random_forest" || lower == "rf") return ModelKind::RandomForest;
  if (lower == "boosted_trees" || lower == "boost" || lower == "xgb") return ModelKind::BoostedTrees;
  if (lower == "mlp") return ModelKind::Mlp;
  throw Error(ErrorCode::UnknownTester, "unknown model '" + std::string(name) + "'");
}

struct ModelSettings {
  TreeParams tree;
  ForestParams forest;
  BoostParams boost;
  MlpParams mlp;
};

inline Labels fit_predict(ModelKind kind, const ModelSettings& settings, const Matrix& x_train,
                          const Labels& y_train, const Matrix& x_eval, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::DecisionTree: {
      Rng rng(derive_seed({seed, 1}));
      return fit_tree(x_train, y_train, settings.tree, rng).predict(x_eval);
    }
    case ModelKind::RandomForest:
      return fit_forest(x_train, y_train, settings.forest, derive_seed({seed, 2})).predict(x_eval);
    case ModelKind::BoostedTrees:
      return fit_boost(x_train, y_train, settings.boost).predict(x_eval);
    case ModelKind::Mlp: {
      MlpParams p = settings.mlp;
      p.seed = derive_seed({seed, p.seed, 4});
      return fit_mlp(x_train, y_train, p).predict(x_eval);
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unhandled model kind");
}

}  // namespace fedora
