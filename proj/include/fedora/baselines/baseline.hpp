#pragma once

// Dimension-matched comparison transforms. Each baseline is fitted with the
// same target dimension k as the evolved feature program it is compared to.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "fedora/baselines/autoencoder.hpp"
#include "fedora/baselines/pca.hpp"
#include "fedora/baselines/som.hpp"

namespace fedora {

enum class BaselineKind { Pca, Som, Autoencoder };

constexpr std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Pca: return "pca";
    case BaselineKind::Som: return "som";
    case BaselineKind::Autoencoder: return "autoencoder";
  }
  return "unknown";
}

inline BaselineKind parse_baseline_kind(std::string_view name) {
  if (name == "pca") return BaselineKind::Pca;
  if (name == "som") return BaselineKind::Som;
  if (name == "autoencoder" || name == "ae") return BaselineKind::Autoencoder;
  throw Error(ErrorCode::ConfigInvalid, "unknown baseline '" + std::string(name) + "'");
}

struct BaselineSettings {
  SomParams som;
  AeParams autoencoder;
};

class FittedBaseline {
 public:
  explicit FittedBaseline(std::variant<PcaModel, SomModel, AeModel> model) : model_(std::move(model)) {}

  Matrix transform(const Matrix& x) const {
    return std::visit([&](const auto& m) { return m.transform(x); }, model_);
  }

  std::size_t k() const {
    return std::visit([](const auto& m) { return m.k(); }, model_);
  }

 private:
  std::variant<PcaModel, SomModel, AeModel> model_;
};

inline FittedBaseline fit_baseline(BaselineKind kind, std::size_t k, const Matrix& x,
                                   const BaselineSettings& settings, std::uint64_t seed) {
  switch (kind) {
    case BaselineKind::Pca: return FittedBaseline(fit_pca(x, k));
    case BaselineKind::Som: return FittedBaseline(fit_som(x, k, settings.som, seed));
    case BaselineKind::Autoencoder: return FittedBaseline(fit_autoencoder(x, k, settings.autoencoder, seed));
  }
  throw Error(ErrorCode::ConfigInvalid, "unhandled baseline kind");
}

}  // namespace fedora
