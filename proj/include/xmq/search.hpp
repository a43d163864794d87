// Cross-modal query answering: embed the raw query into the shared latent
// space, precompute an M × K table of element distances, then score every
// database item with M lookups. A full-reconstruction path is kept alongside
// as the exact reference.
#pragma once

#include <queue>
#include <utility>
#include <vector>

#include "xmq/common_space.hpp"
#include "xmq/core.hpp"
#include "xmq/dataset.hpp"
#include "xmq/quantizer.hpp"

namespace xmq {

struct DistanceTable {
  Matrix entries;  // M × K, entry (m, k) = squared distance to element k of dictionary m
};

struct SearchResult {
  std::size_t id = 0;
  double score = 0.0;
};

using ResultList = std::vector<SearchResult>;

// Optional instrumentation for cost assertions.
struct QueryStats {
  std::size_t table_entries_computed = 0;
  std::size_t items_scored = 0;
  std::size_t table_lookups = 0;
};

// One searchable database: the quantizer and codes of the database modality
// plus the mapping model that embeds queries from either modality.
struct SearchIndex {
  CompositeQuantizer quantizer;
  CodeMatrix codes;
  std::vector<LabelSet> labels;  // may be empty
  CommonSpaceModel common_space;

  void validate() const {
    quantizer.validate();
    codes.validate();
    if (!labels.empty() && labels.size() != codes.num_items) {
      throw DimensionError("SearchIndex: label count does not match item count");
    }
  }
};

inline DistanceTable build_table(const Vector& latent_query, const CompositeQuantizer& q,
                                 QueryStats* stats = nullptr) {
  if (latent_query.size() != q.dim()) {
    throw DimensionError("build_table: query dimension does not match quantizer");
  }
  DistanceTable table;
  table.entries.resize(q.num_dictionaries, q.dictionary_size);
  for (int m = 0; m < q.num_dictionaries; ++m) {
    for (int k = 0; k < q.dictionary_size; ++k) {
      table.entries(m, k) =
          (latent_query - q.element(m, static_cast<std::uint32_t>(k))).squaredNorm();
    }
  }
  if (stats) stats->table_entries_computed += table.entries.size();
  return table;
}

inline double score_item(const DistanceTable& table, const CodeMatrix& codes,
                         std::size_t item, QueryStats* stats = nullptr) {
  double sum = 0.0;
  for (int m = 0; m < codes.num_dictionaries; ++m) {
    sum += table.entries(m, codes.at(item, m));
  }
  if (stats) {
    stats->table_lookups += static_cast<std::size_t>(codes.num_dictionaries);
    ++stats->items_scored;
  }
  return sum;
}

namespace detail {

// Keeps the top_t smallest (score, id) pairs from a scored scan; ties resolve
// toward smaller ids through the pair ordering.
class BoundedBest {
 public:
  explicit BoundedBest(std::size_t capacity) : capacity_(capacity) {}

  void offer(double score, std::size_t id) {
    if (capacity_ == 0) return;
    if (heap_.size() < capacity_) {
      heap_.emplace(score, id);
    } else if (std::pair(score, id) < heap_.top()) {
      heap_.pop();
      heap_.emplace(score, id);
    }
  }

  ResultList drain() {
    ResultList out(heap_.size());
    for (std::size_t i = heap_.size(); i-- > 0;) {
      out[i] = {heap_.top().second, heap_.top().first};
      heap_.pop();
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::priority_queue<std::pair<double, std::size_t>> heap_;
};

inline Vector embed_raw_query(const CommonSpaceModel& cs, const Vector& raw_query,
                              Modality query_modality) {
  if (query_modality == Modality::kA) {
    return embed_query_a(cs, preprocess_query_a(cs, raw_query));
  }
  return embed_query_b(cs, preprocess_query_b(cs, raw_query));
}

}  // namespace detail

// Table-based search: O(M·K) table build plus M lookups per database item.
inline ResultList query_cross_modal(const SearchIndex& index, const Vector& raw_query,
                                    Modality query_modality, std::size_t top_t,
                                    QueryStats* stats = nullptr) {
  const Vector latent = detail::embed_raw_query(index.common_space, raw_query,
                                                query_modality);
  const DistanceTable table = build_table(latent, index.quantizer, stats);
  const std::size_t n = index.codes.num_items;
  detail::BoundedBest best(std::min(top_t, n));
  for (std::size_t item = 0; item < n; ++item) {
    best.offer(score_item(table, index.codes, item, stats), item);
  }
  return best.drain();
}

// Exact reference: reconstruct every item and rank by the full squared
// latent-space distance.
inline ResultList exhaustive_query(const SearchIndex& index, const Vector& raw_query,
                                   Modality query_modality, std::size_t top_t) {
  const Vector latent = detail::embed_raw_query(index.common_space, raw_query,
                                                query_modality);
  const Matrix recon = reconstruct(index.quantizer, index.codes);
  const std::size_t n = index.codes.num_items;
  detail::BoundedBest best(std::min(top_t, n));
  for (std::size_t item = 0; item < n; ++item) {
    best.offer((latent - recon.col(static_cast<Eigen::Index>(item))).squaredNorm(), item);
  }
  return best.drain();
}

}  // namespace xmq
