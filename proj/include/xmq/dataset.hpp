#pragma once

#include <algorithm>
#include <vector>

#include "xmq/core.hpp"

namespace xmq {

// Sorted, deduplicated set of small integer labels.
struct LabelSet {
  std::vector<int> ids;

  LabelSet() = default;
  explicit LabelSet(std::vector<int> raw) : ids(std::move(raw)) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }

  bool empty() const { return ids.empty(); }

  bool intersects(const LabelSet& other) const {
    auto a = ids.begin();
    auto b = other.ids.begin();
    while (a != ids.end() && b != other.ids.end()) {
      if (*a == *b) return true;
      if (*a < *b) ++a; else ++b;
    }
    return false;
  }
};

inline std::vector<LabelSet> to_label_sets(const std::vector<std::vector<int>>& raw) {
  std::vector<LabelSet> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.emplace_back(r);
  return out;
}

// Aligned per-document feature vectors: column n of features_a and column n
// of features_b describe the same document.
struct PairedDataset {
  Matrix features_a;  // D_I x N
  Matrix features_b;  // D_T x N
  std::vector<LabelSet> labels;  // empty or length N

  std::size_t size() const { return static_cast<std::size_t>(features_a.cols()); }
  bool has_labels() const { return !labels.empty(); }

  void validate() const {
    if (features_a.cols() != features_b.cols()) {
      throw DimensionError("PairedDataset: modality column counts differ");
    }
    if (!labels.empty() && labels.size() != size()) {
      throw DimensionError("PairedDataset: label count differs from item count");
    }
    if (!all_finite(features_a) || !all_finite(features_b)) {
      throw NonFiniteError("PairedDataset: non-finite feature values");
    }
  }
};

}  // namespace xmq
