// Retrieval metrics: average precision with label-overlap relevance, its mean
// over queries, and precision@T curves.
#pragma once

#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "xmq/dataset.hpp"
#include "xmq/search.hpp"

namespace xmq {

// Relevance by shared labels: a retrieved item counts if its label set
// intersects the query's.
struct RelevanceJudge {
  const std::vector<LabelSet>* query_labels = nullptr;
  const std::vector<LabelSet>* database_labels = nullptr;

  bool relevant(std::size_t query, std::size_t item) const {
    return (*query_labels)[query].intersects((*database_labels)[item]);
  }
};

// AP(q) at cutoff T: sum of precision-at-t over relevant positions, divided
// by the number of relevant items retrieved; zero when nothing relevant shows
// up in the top T.
inline double average_precision(const ResultList& ranking, const RelevanceJudge& judge,
                                std::size_t query, std::size_t top_t) {
  const std::size_t limit = std::min(top_t, ranking.size());
  double relevant_seen = 0.0;
  double precision_sum = 0.0;
  for (std::size_t t = 0; t < limit; ++t) {
    if (judge.relevant(query, ranking[t].id)) {
      relevant_seen += 1.0;
      precision_sum += relevant_seen / static_cast<double>(t + 1);
    }
  }
  if (relevant_seen == 0.0) return 0.0;
  return precision_sum / relevant_seen;
}

inline double map_at(const std::vector<ResultList>& rankings, const RelevanceJudge& judge,
                     std::size_t top_t) {
  if (rankings.empty()) throw DimensionError("map_at: no queries");
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    total += average_precision(rankings[q], judge, q, top_t);
  }
  return total / static_cast<double>(rankings.size());
}

// Mean over queries of (#relevant in top T)/T, one value per requested T.
inline std::vector<std::pair<std::size_t, double>> precision_at(
    const std::vector<ResultList>& rankings, const RelevanceJudge& judge,
    const std::vector<std::size_t>& cutoffs) {
  if (rankings.empty()) throw DimensionError("precision_at: no queries");
  std::vector<std::pair<std::size_t, double>> curve;
  curve.reserve(cutoffs.size());
  for (const std::size_t t : cutoffs) {
    double total = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      const std::size_t limit = std::min(t, rankings[q].size());
      std::size_t hits = 0;
      for (std::size_t i = 0; i < limit; ++i) {
        if (judge.relevant(q, rankings[q][i].id)) ++hits;
      }
      total += static_cast<double>(hits) / static_cast<double>(t);
    }
    curve.emplace_back(t, total / static_cast<double>(rankings.size()));
  }
  return curve;
}

struct MetricReport {
  std::map<std::size_t, double> map_at_t;
  std::vector<std::pair<std::size_t, double>> precision_curve;
  std::vector<double> per_query_ap;

  std::string to_json() const {
    nlohmann::json j;
    for (const auto& [t, v] : map_at_t) j["map"][std::to_string(t)] = v;
    for (const auto& [t, v] : precision_curve) {
      j["precision"].push_back({{"t", t}, {"value", v}});
    }
    j["per_query_ap"] = per_query_ap;
    return j.dump(2);
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "metric,t,value\n";
    for (const auto& [t, v] : map_at_t) out << "map," << t << "," << v << "\n";
    for (const auto& [t, v] : precision_curve) out << "precision," << t << "," << v << "\n";
    return out.str();
  }
};

// Standard report: MAP at 50 and 100 plus a fixed precision curve, cutoffs
// clamped to the database size.
inline MetricReport standard_report(const std::vector<ResultList>& rankings,
                                    const RelevanceJudge& judge, std::size_t database_size) {
  MetricReport report;
  for (std::size_t t : {std::size_t{50}, std::size_t{100}}) {
    report.map_at_t[std::min(t, database_size)] =
        map_at(rankings, judge, std::min(t, database_size));
  }
  std::vector<std::size_t> cutoffs;
  for (std::size_t t : {std::size_t{1}, std::size_t{10}, std::size_t{50}, std::size_t{100},
                        std::size_t{500}, std::size_t{1000}}) {
    const std::size_t clamped = std::min(t, database_size);
    if (cutoffs.empty() || cutoffs.back() != clamped) cutoffs.push_back(clamped);
  }
  report.precision_curve = precision_at(rankings, judge, cutoffs);
  report.per_query_ap.reserve(rankings.size());
  const std::size_t ap_cut = std::min(std::size_t{50}, database_size);
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    report.per_query_ap.push_back(average_precision(rankings[q], judge, q, ap_cut));
  }
  return report;
}

}  // namespace xmq
