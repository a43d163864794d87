#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "xmq/search.hpp"

using xmq::CodeMatrix;
using xmq::CompositeQuantizer;
using xmq::DistanceTable;
using xmq::Matrix;
using xmq::ResultList;
using xmq::SearchIndex;
using xmq::Vector;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng);
  return m;
}

CompositeQuantizer random_quantizer(int dim, int M, int K, std::mt19937_64& rng) {
  CompositeQuantizer q;
  q.num_dictionaries = M;
  q.dictionary_size = K;
  q.elements = random_matrix(dim, M * K, rng);
  return q;
}

CodeMatrix random_codes(std::size_t n, int M, int K, std::mt19937_64& rng) {
  CodeMatrix c;
  c.num_items = n;
  c.num_dictionaries = M;
  c.dictionary_size = static_cast<std::size_t>(K);
  c.codes.resize(n * static_cast<std::size_t>(M));
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(K - 1));
  for (auto& v : c.codes) v = pick(rng);
  return c;
}

// Quantizer whose dictionaries occupy disjoint coordinate blocks, making
// every possible cross term exactly zero.
CompositeQuantizer block_orthogonal_quantizer(int M, int K, std::mt19937_64& rng) {
  CompositeQuantizer q;
  q.num_dictionaries = M;
  q.dictionary_size = K;
  const int block = 2;
  q.elements = Matrix::Zero(M * block, M * K);
  std::normal_distribution<double> gauss;
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) {
      for (int r = 0; r < block; ++r) {
        q.elements(m * block + r, m * K + k) = gauss(rng);
      }
    }
  }
  return q;
}

// A mapping model that embeds modality-B queries through an orthonormal
// factor, giving direct control over the latent query.
xmq::CommonSpaceModel passthrough_model(int latent_dim, std::mt19937_64& rng) {
  xmq::CommonSpaceModel cs;
  const int d_text = latent_dim + 2;
  Matrix raw = random_matrix(d_text, latent_dim, rng);
  const Eigen::HouseholderQR<Matrix> qr(raw);
  cs.factor_u = qr.householderQ() * Matrix::Identity(d_text, latent_dim);
  cs.basis_b = random_matrix(4, 6, rng);
  cs.transform_r = random_matrix(latent_dim, 6, rng);
  cs.mean_a = Vector::Zero(4);
  cs.mean_b = Vector::Zero(d_text);
  cs.pca_projection = Matrix::Identity(4, 4);
  return cs;
}

}  // namespace

TEST(BuildTable, SelfDistanceIsZero) {
  std::mt19937_64 rng(3);
  CompositeQuantizer q = random_quantizer(4, 2, 3, rng);
  const Vector query = q.element(1, 2);
  const DistanceTable t = xmq::build_table(query, q);
  EXPECT_EQ(t.entries(1, 2), 0.0);
}

TEST(BuildTable, HandArithmetic) {
  CompositeQuantizer q;
  q.num_dictionaries = 1;
  q.dictionary_size = 2;
  q.elements = Matrix::Identity(2, 2);
  Vector query(2);
  query << 1, 0;
  const DistanceTable t = xmq::build_table(query, q);
  EXPECT_NEAR(t.entries(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(t.entries(0, 1), 2.0, 1e-15);
}

TEST(BuildTable, MatchesNaiveLoop) {
  std::mt19937_64 rng(5);
  CompositeQuantizer q = random_quantizer(5, 3, 4, rng);
  const Vector query = random_matrix(5, 1, rng).col(0);
  const DistanceTable t = xmq::build_table(query, q);
  for (int m = 0; m < 3; ++m) {
    for (int k = 0; k < 4; ++k) {
      double sq = 0.0;
      for (int r = 0; r < 5; ++r) {
        const double d = query[r] - q.elements(r, m * 4 + k);
        sq += d * d;
      }
      EXPECT_NEAR(t.entries(m, k), sq, 1e-12);
    }
  }
  EXPECT_GE(t.entries.minCoeff(), 0.0);
}

TEST(ScoreItem, HandExampleAndReconstruction) {
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 1;
  q.elements = Matrix::Identity(2, 2);
  CodeMatrix c;
  c.num_items = 1;
  c.num_dictionaries = 2;
  c.dictionary_size = 1;
  c.codes = {0, 0};
  Vector query(2);
  query << 1, 1;
  const DistanceTable t = xmq::build_table(query, q);
  const double score = xmq::score_item(t, c, 0);
  EXPECT_NEAR(score, 2.0, 1e-15);
  const double full = (query - xmq::reconstruct(q, c).col(0)).squaredNorm();
  EXPECT_NEAR(full, 0.0, 1e-15);
  const double cross = xmq::cross_term(q, c, 0);
  EXPECT_NEAR(score - (2 - 1) * query.squaredNorm() + cross, full, 1e-12);
}

TEST(ScoreItem, SingleDictionaryIsExactDistance) {
  std::mt19937_64 rng(7);
  CompositeQuantizer q = random_quantizer(4, 1, 5, rng);
  CodeMatrix c = random_codes(8, 1, 5, rng);
  const Vector query = random_matrix(4, 1, rng).col(0);
  const DistanceTable t = xmq::build_table(query, q);
  const Matrix recon = xmq::reconstruct(q, c);
  for (std::size_t n = 0; n < 8; ++n) {
    EXPECT_NEAR(xmq::score_item(t, c, n),
                (query - recon.col(static_cast<Eigen::Index>(n))).squaredNorm(), 1e-12);
  }
}

TEST(ScoreItem, DistanceIdentityOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int M = 2 + static_cast<int>(rng() % 3);
    CompositeQuantizer q = random_quantizer(6, M, 4, rng);
    CodeMatrix c = random_codes(10, M, 4, rng);
    const Vector query = random_matrix(6, 1, rng).col(0);
    const DistanceTable t = xmq::build_table(query, q);
    const Matrix recon = xmq::reconstruct(q, c);
    for (std::size_t n = 0; n < 10; ++n) {
      const double full =
          (query - recon.col(static_cast<Eigen::Index>(n))).squaredNorm();
      const double via_table = xmq::score_item(t, c, n) -
                               (M - 1) * query.squaredNorm() +
                               xmq::cross_term(q, c, n);
      EXPECT_NEAR(full, via_table, 1e-10);
    }
  }
}

TEST(Query, SingletonDatabaseReturnsItsItem) {
  std::mt19937_64 rng(13);
  SearchIndex index;
  index.common_space = passthrough_model(4, rng);
  index.quantizer = random_quantizer(4, 2, 3, rng);
  index.codes = random_codes(1, 2, 3, rng);
  const Vector raw = random_matrix(6, 1, rng).col(0);
  const ResultList out = xmq::query_cross_modal(index, raw, xmq::Modality::kB, 5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 0u);
}

TEST(Query, TablePathEqualsExhaustiveWhenCrossTermsEqual) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int M = 3, K = 4;
    SearchIndex index;
    index.quantizer = block_orthogonal_quantizer(M, K, rng);
    index.codes = random_codes(40, M, K, rng);
    index.common_space = passthrough_model(static_cast<int>(index.quantizer.dim()), rng);
    const Vector raw = random_matrix(static_cast<int>(index.quantizer.dim()) + 2, 1, rng).col(0);

    const ResultList table_path = xmq::query_cross_modal(index, raw, xmq::Modality::kB, 40);
    const ResultList exact_path = xmq::exhaustive_query(index, raw, xmq::Modality::kB, 40);
    ASSERT_EQ(table_path.size(), exact_path.size());
    for (std::size_t i = 0; i < table_path.size(); ++i) {
      EXPECT_EQ(table_path[i].id, exact_path[i].id);
    }
  }
}

TEST(Query, ExhaustiveEqualsTableForSingleDictionary) {
  std::mt19937_64 rng(19);
  SearchIndex index;
  index.quantizer = random_quantizer(4, 1, 6, rng);
  index.codes = random_codes(25, 1, 6, rng);
  index.common_space = passthrough_model(4, rng);
  const Vector raw = random_matrix(6, 1, rng).col(0);
  const ResultList a = xmq::query_cross_modal(index, raw, xmq::Modality::kB, 25);
  const ResultList b = xmq::exhaustive_query(index, raw, xmq::Modality::kB, 25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_NEAR(a[i].score, b[i].score, 1e-10);
  }
}

TEST(Query, TopTClampsAndScoresAscend) {
  std::mt19937_64 rng(23);
  SearchIndex index;
  index.quantizer = random_quantizer(4, 2, 3, rng);
  index.codes = random_codes(7, 2, 3, rng);
  index.common_space = passthrough_model(4, rng);
  const Vector raw = random_matrix(6, 1, rng).col(0);
  const ResultList out = xmq::query_cross_modal(index, raw, xmq::Modality::kB, 100);
  ASSERT_EQ(out.size(), 7u);
  for (std::size_t i = 1; i < out.size(); ++i) {
    EXPECT_LE(out[i - 1].score, out[i].score);
    if (out[i - 1].score == out[i].score) EXPECT_LT(out[i - 1].id, out[i].id);
  }
  std::vector<std::size_t> ids;
  for (const auto& r : out) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
}

TEST(Query, EqualScoresOrderedByItemId) {
  // all items share one code so every score ties; order must be by id
  std::mt19937_64 rng(29);
  SearchIndex index;
  index.quantizer = random_quantizer(4, 2, 3, rng);
  CodeMatrix c;
  c.num_items = 6;
  c.num_dictionaries = 2;
  c.dictionary_size = 3;
  c.codes.assign(12, 1);
  index.codes = c;
  index.common_space = passthrough_model(4, rng);
  const Vector raw = random_matrix(6, 1, rng).col(0);
  const ResultList out = xmq::query_cross_modal(index, raw, xmq::Modality::kB, 4);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].id, i);
}

TEST(Query, OperationCountsMatchComplexityClaim) {
  std::mt19937_64 rng(31);
  const int M = 3, K = 5;
  SearchIndex index;
  index.quantizer = random_quantizer(4, M, K, rng);
  index.codes = random_codes(50, M, K, rng);
  index.common_space = passthrough_model(4, rng);
  const Vector raw = random_matrix(6, 1, rng).col(0);
  xmq::QueryStats stats;
  xmq::query_cross_modal(index, raw, xmq::Modality::kB, 10, &stats);
  EXPECT_EQ(stats.table_entries_computed, static_cast<std::size_t>(M * K));
  EXPECT_EQ(stats.items_scored, 50u);
  EXPECT_EQ(stats.table_lookups, static_cast<std::size_t>(50 * M));
}

TEST(Query, ModalityAEmbedsThroughSparseCoding) {
  std::mt19937_64 rng(37);
  SearchIndex index;
  index.quantizer = random_quantizer(3, 2, 3, rng);
  index.codes = random_codes(10, 2, 3, rng);
  xmq::CommonSpaceModel cs;
  cs.hyper.rho = 0.01;
  cs.basis_b = random_matrix(4, 6, rng);
  xmq::project_columns_to_ball(cs.basis_b, 1.0);
  cs.transform_r = random_matrix(3, 6, rng);
  cs.factor_u = random_matrix(5, 3, rng);
  cs.mean_a = Vector::Zero(4);
  cs.mean_b = Vector::Zero(5);
  cs.pca_projection = Matrix::Identity(4, 4);
  index.common_space = cs;

  const Vector raw = cs.basis_b.col(2);
  const ResultList via_query = xmq::query_cross_modal(index, raw, xmq::Modality::kA, 10);
  const Vector latent = xmq::embed_query_a(cs, xmq::preprocess_query_a(cs, raw));
  const DistanceTable t = xmq::build_table(latent, index.quantizer);
  ResultList manual;
  for (std::size_t n = 0; n < 10; ++n) manual.push_back({n, xmq::score_item(t, index.codes, n)});
  std::sort(manual.begin(), manual.end(), [](const auto& a, const auto& b) {
    return std::pair(a.score, a.id) < std::pair(b.score, b.id);
  });
  ASSERT_EQ(via_query.size(), manual.size());
  for (std::size_t i = 0; i < manual.size(); ++i) {
    EXPECT_EQ(via_query[i].id, manual[i].id);
    EXPECT_NEAR(via_query[i].score, manual[i].score, 1e-12);
  }
}
