// Synthetic paired data: latent cluster centers pushed through two different
// random linear maps with additive Gaussian noise. The cluster id doubles as
// the relevance label, so retrieval quality on this data has a known ceiling.
#pragma once

#include <cstdint>
#include <random>

#include "xmq/core.hpp"
#include "xmq/dataset.hpp"

namespace xmq {

struct SynthConfig {
  int clusters = 10;
  Eigen::Index latent_dim = 16;
  Eigen::Index dim_a = 48;
  Eigen::Index dim_b = 32;
  std::size_t items = 2000;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

inline PairedDataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.clusters < 1 || cfg.latent_dim < 1 || cfg.dim_a < 1 || cfg.dim_b < 1 ||
      cfg.items < 1) {
    throw DimensionError("synth_dataset: counts must be positive");
  }
  if (cfg.noise < 0.0) throw DimensionError("synth_dataset: noise must be non-negative");

  std::mt19937_64 rng(split_seed(cfg.seed, 0x73796e'7468ULL));
  std::normal_distribution<double> gauss;

  Matrix centers(cfg.latent_dim, cfg.clusters);
  for (Eigen::Index c = 0; c < cfg.clusters; ++c)
    for (Eigen::Index r = 0; r < cfg.latent_dim; ++r) centers(r, c) = gauss(rng);

  const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Matrix map_a(cfg.dim_a, cfg.latent_dim);
  for (Eigen::Index c = 0; c < cfg.latent_dim; ++c)
    for (Eigen::Index r = 0; r < cfg.dim_a; ++r) map_a(r, c) = map_scale * gauss(rng);
  Matrix map_b(cfg.dim_b, cfg.latent_dim);
  for (Eigen::Index c = 0; c < cfg.latent_dim; ++c)
    for (Eigen::Index r = 0; r < cfg.dim_b; ++r) map_b(r, c) = map_scale * gauss(rng);

  PairedDataset ds;
  ds.features_a.resize(cfg.dim_a, static_cast<Eigen::Index>(cfg.items));
  ds.features_b.resize(cfg.dim_b, static_cast<Eigen::Index>(cfg.items));
  ds.labels.reserve(cfg.items);
  for (std::size_t n = 0; n < cfg.items; ++n) {
    const int cluster = static_cast<int>(n % static_cast<std::size_t>(cfg.clusters));
    const auto col = static_cast<Eigen::Index>(n);
    ds.features_a.col(col) = map_a * centers.col(cluster);
    ds.features_b.col(col) = map_b * centers.col(cluster);
    for (Eigen::Index r = 0; r < cfg.dim_a; ++r) ds.features_a(r, col) += cfg.noise * gauss(rng);
    for (Eigen::Index r = 0; r < cfg.dim_b; ++r) ds.features_b(r, col) += cfg.noise * gauss(rng);
    ds.labels.push_back(LabelSet({cluster}));
  }
  return ds;
}

}  // namespace xmq
