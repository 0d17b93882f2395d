#pragma once

#include <cstddef>
#include <vector>

#include "fedora/dataset.hpp"
#include "fedora/error.hpp"

namespace fedora {

/// Mean per-class recall over the classes present in `truth`. For two classes
/// this is (TPR + TNR) / 2.
inline double balanced_accuracy(const Labels& truth, const Labels& predicted) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::InvalidDataset, "truth and prediction lengths differ");
  if (truth.empty()) throw Error(ErrorCode::InvalidDataset, "empty label vectors");
  auto support = class_counts(truth);
  std::vector<std::size_t> hits(support.size(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == predicted[i]) ++hits[static_cast<std::size_t>(truth[i])];
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k] == 0) continue;
    total += static_cast<double>(hits[k]) / static_cast<double>(support[k]);
    ++present;
  }
  if (present < 2) throw Error(ErrorCode::SingleClassTruth, "recall undefined for an absent class");
  return total / static_cast<double>(present);
}

inline double accuracy(const Labels& truth, const Labels& predicted) {
  if (truth.empty() || truth.size() != predicted.size())
    throw Error(ErrorCode::InvalidDataset, "label vectors must be non-empty and equally long");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace fedora
