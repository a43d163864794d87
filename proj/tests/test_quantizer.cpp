#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "xmq/quantizer.hpp"

using xmq::CodeMatrix;
using xmq::CompositeQuantizer;
using xmq::Matrix;
using xmq::PenaltyObjective;
using xmq::QuantizationHyper;
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

// Pairwise double-loop cross term, the textbook definition.
double cross_term_naive(const CompositeQuantizer& q, const CodeMatrix& codes,
                        std::size_t n) {
  double total = 0.0;
  for (int i = 0; i < q.num_dictionaries; ++i) {
    for (int j = 0; j < q.num_dictionaries; ++j) {
      if (i == j) continue;
      total += q.element(i, codes.at(n, i)).dot(q.element(j, codes.at(n, j)));
    }
  }
  return total;
}

// Term-by-term penalty objective evaluator built only from loops.
double psi_naive(const PenaltyObjective& obj) {
  const auto& qa = *obj.quant_a;
  const auto& qb = *obj.quant_b;
  double psi = 0.0;
  for (std::size_t n = 0; n < obj.codes_a->num_items; ++n) {
    Vector ra = Vector::Zero(qa.dim());
    Vector rb = Vector::Zero(qb.dim());
    for (int m = 0; m < qa.num_dictionaries; ++m) ra += qa.element(m, obj.codes_a->at(n, m));
    for (int m = 0; m < qb.num_dictionaries; ++m) rb += qb.element(m, obj.codes_b->at(n, m));
    const auto col = static_cast<Eigen::Index>(n);
    psi += (obj.latent_a->col(col) - ra).squaredNorm();
    psi += (obj.latent_b->col(col) - rb).squaredNorm();
    psi += obj.hyper.gamma * (ra - rb).squaredNorm();
    const double da = cross_term_naive(qa, *obj.codes_a, n) - qa.epsilon;
    const double db = cross_term_naive(qb, *obj.codes_b, n) - qb.epsilon;
    psi += obj.hyper.mu * (da * da + db * db);
  }
  return psi;
}

// Per-item share of the penalty objective for one modality.
double item_objective(const CompositeQuantizer& q, const CodeMatrix& codes,
                      const Matrix& target, const Matrix& other_recon,
                      const QuantizationHyper& h, std::size_t n) {
  Vector recon = Vector::Zero(q.dim());
  for (int m = 0; m < q.num_dictionaries; ++m) recon += q.element(m, codes.at(n, m));
  const auto col = static_cast<Eigen::Index>(n);
  const double dev = cross_term_naive(q, codes, n) - q.epsilon;
  return (target.col(col) - recon).squaredNorm() +
         h.gamma * (other_recon.col(col) - recon).squaredNorm() + h.mu * dev * dev;
}

}  // namespace

TEST(CrossTerm, OrthogonalElementsGiveZero) {
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 1;
  q.elements = Matrix::Identity(2, 2);
  CodeMatrix c;
  c.num_items = 1;
  c.num_dictionaries = 2;
  c.dictionary_size = 1;
  c.codes = {0, 0};
  EXPECT_NEAR(xmq::cross_term(q, c, 0), 0.0, 1e-15);
}

TEST(CrossTerm, EqualUnitVectorsCountBothOrderings) {
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 1;
  q.elements = Matrix(2, 2);
  q.elements << 1, 1, 0, 0;
  CodeMatrix c;
  c.num_items = 1;
  c.num_dictionaries = 2;
  c.dictionary_size = 1;
  c.codes = {0, 0};
  EXPECT_NEAR(xmq::cross_term(q, c, 0), 2.0, 1e-15);
}

TEST(CrossTerm, IdentityMatchesPairwiseSum) {
  std::mt19937_64 rng(3);
  CompositeQuantizer q = random_quantizer(5, 3, 4, rng);
  CodeMatrix c = random_codes(20, 3, 4, rng);
  for (std::size_t n = 0; n < c.num_items; ++n) {
    EXPECT_NEAR(xmq::cross_term(q, c, n), cross_term_naive(q, c, n), 1e-10);
  }
}

TEST(UpdateEpsilon, ConstantCodesGiveThatCrossTerm) {
  std::mt19937_64 rng(5);
  CompositeQuantizer q = random_quantizer(4, 2, 3, rng);
  CodeMatrix c;
  c.num_items = 7;
  c.num_dictionaries = 2;
  c.dictionary_size = 3;
  c.codes.assign(14, 1);
  const double eps = xmq::update_epsilon(q, c);
  EXPECT_NEAR(eps, cross_term_naive(q, c, 0), 1e-12);
  EXPECT_EQ(q.epsilon, eps);
}

TEST(UpdateEpsilon, MeanOfZeroAndTwo) {
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 2;
  q.elements = Matrix(2, 4);
  // dictionary 0: e1, e1; dictionary 1: e2, e1
  q.elements << 1, 1, 0, 1, 0, 0, 1, 0;
  CodeMatrix c;
  c.num_items = 2;
  c.num_dictionaries = 2;
  c.dictionary_size = 2;
  c.codes = {0, 0, 1, 1};  // item 0 -> (e1, e2): cross 0; item 1 -> (e1, e1): cross 2
  EXPECT_NEAR(xmq::update_epsilon(q, c), 1.0, 1e-15);
}

TEST(UpdateEpsilon, MinimizesQuadraticPenalty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    CompositeQuantizer q = random_quantizer(4, 3, 3, rng);
    CodeMatrix c = random_codes(15, 3, 3, rng);
    const double eps = xmq::update_epsilon(q, c);
    auto penalty = [&](double e) {
      double total = 0.0;
      for (std::size_t n = 0; n < c.num_items; ++n) {
        const double d = cross_term_naive(q, c, n) - e;
        total += d * d;
      }
      return total;
    };
    EXPECT_LE(penalty(eps), penalty(eps + 0.1));
    EXPECT_LE(penalty(eps), penalty(eps - 0.1));
  }
}

TEST(EvaluatePsi, PerfectFitIsZero) {
  std::mt19937_64 rng(11);
  CompositeQuantizer qa = random_quantizer(3, 2, 2, rng);
  CompositeQuantizer qb = qa;
  CodeMatrix ca;
  ca.num_items = 4;
  ca.num_dictionaries = 2;
  ca.dictionary_size = 2;
  ca.codes.assign(8, 0);  // identical codes: every cross term equals epsilon
  CodeMatrix cb = ca;
  xmq::update_epsilon(qa, ca);
  xmq::update_epsilon(qb, cb);
  const Matrix recon = xmq::reconstruct(qa, ca);
  PenaltyObjective obj;
  obj.quant_a = &qa;
  obj.quant_b = &qb;
  obj.codes_a = &ca;
  obj.codes_b = &cb;
  obj.latent_a = &recon;
  obj.latent_b = &recon;
  obj.hyper = {0.3, 0.1};
  EXPECT_NEAR(xmq::evaluate_psi(obj), 0.0, 1e-12);
}

TEST(EvaluatePsi, SingleDictionaryHasNoCrossPenalty) {
  std::mt19937_64 rng(13);
  CompositeQuantizer qa = random_quantizer(3, 1, 4, rng);
  CompositeQuantizer qb = random_quantizer(3, 1, 4, rng);
  qa.epsilon = 0.0;
  qb.epsilon = 0.0;
  CodeMatrix ca = random_codes(6, 1, 4, rng);
  CodeMatrix cb = random_codes(6, 1, 4, rng);
  const Matrix xa = random_matrix(3, 6, rng);
  const Matrix xb = random_matrix(3, 6, rng);
  PenaltyObjective obj{&qa, &qb, &ca, &cb, &xa, &xb, {0.4, 0.1}};
  const Matrix ra = xmq::reconstruct(qa, ca);
  const Matrix rb = xmq::reconstruct(qb, cb);
  const double expected = (xa - ra).squaredNorm() + (xb - rb).squaredNorm() +
                          0.4 * (ra - rb).squaredNorm();
  EXPECT_NEAR(xmq::evaluate_psi(obj), expected, 1e-10);
}

TEST(EvaluatePsi, MatchesNaiveEvaluator) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    CompositeQuantizer qa = random_quantizer(4, 3, 3, rng);
    CompositeQuantizer qb = random_quantizer(4, 2, 4, rng);
    qa.epsilon = 0.7;
    qb.epsilon = -0.2;
    CodeMatrix ca = random_codes(9, 3, 3, rng);
    CodeMatrix cb = random_codes(9, 2, 4, rng);
    const Matrix xa = random_matrix(4, 9, rng);
    const Matrix xb = random_matrix(4, 9, rng);
    PenaltyObjective obj{&qa, &qb, &ca, &cb, &xa, &xb, {0.3, 0.1}};
    EXPECT_NEAR(xmq::evaluate_psi(obj), psi_naive(obj), 1e-10);
  }
}

TEST(Reconstruct, SumsSelectedElements) {
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 1;
  q.elements = Matrix::Identity(2, 2);
  CodeMatrix c;
  c.num_items = 1;
  c.num_dictionaries = 2;
  c.dictionary_size = 1;
  c.codes = {0, 0};
  const Matrix out = xmq::reconstruct(q, c);
  EXPECT_NEAR(out(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(1, 0), 1.0, 1e-15);
}

TEST(Reconstruct, ErrorEqualsFirstPsiTerm) {
  std::mt19937_64 rng(19);
  CompositeQuantizer qa = random_quantizer(3, 2, 3, rng);
  CompositeQuantizer qb = random_quantizer(3, 2, 3, rng);
  CodeMatrix ca = random_codes(5, 2, 3, rng);
  CodeMatrix cb = random_codes(5, 2, 3, rng);
  const Matrix xa = random_matrix(3, 5, rng);
  const Matrix rb = xmq::reconstruct(qb, cb);  // make the B terms vanish
  xmq::update_epsilon(qa, ca);
  xmq::update_epsilon(qb, cb);
  // with identical codes per item the cross deviation need not vanish, so
  // zero out the penalty instead
  PenaltyObjective obj{&qa, &qb, &ca, &cb, &xa, &rb, {0.0, 0.0}};
  const double expected = (xa - xmq::reconstruct(qa, ca)).squaredNorm();
  EXPECT_NEAR(xmq::evaluate_psi(obj), expected, 1e-10);
}

TEST(AssignCodes, NearestNeighborInSimplestCase) {
  CompositeQuantizer q;
  q.num_dictionaries = 1;
  q.dictionary_size = 2;
  q.elements = Matrix::Identity(2, 2);
  q.epsilon = 0.0;
  Matrix target(2, 1);
  target << 0.9, 0.1;
  CodeMatrix init;
  init.num_items = 1;
  init.num_dictionaries = 1;
  init.dictionary_size = 2;
  init.codes = {1};
  const Matrix other = Matrix::Zero(2, 1);
  const CodeMatrix out = xmq::assign_codes(q, init, target, other, {0.0, 0.0}, 1);
  EXPECT_EQ(out.at(0, 0), 0u);
}

TEST(AssignCodes, TiesGoToLowestIndex) {
  CompositeQuantizer q;
  q.num_dictionaries = 1;
  q.dictionary_size = 3;
  q.elements = Matrix(2, 3);
  q.elements << 0.5, 0.5, -1, 0.5, 0.5, 0;  // elements 0 and 1 identical
  q.epsilon = 0.0;
  Matrix target(2, 1);
  target << 0.5, 0.5;
  CodeMatrix init;
  init.num_items = 1;
  init.num_dictionaries = 1;
  init.dictionary_size = 3;
  init.codes = {2};
  const CodeMatrix out =
      xmq::assign_codes(q, init, target, Matrix::Zero(2, 1), {0.0, 0.0}, 1);
  EXPECT_EQ(out.at(0, 0), 0u);
}

TEST(AssignCodes, GreedyCycleNeverIncreasesItemObjective) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    CompositeQuantizer q = random_quantizer(4, 2, 4, rng);
    q.epsilon = 0.5;
    CodeMatrix codes = random_codes(12, 2, 4, rng);
    const Matrix target = random_matrix(4, 12, rng);
    const Matrix other = random_matrix(4, 12, rng);
    const QuantizationHyper h{0.3, 0.1};
    std::vector<double> before(codes.num_items);
    for (std::size_t n = 0; n < codes.num_items; ++n) {
      before[n] = item_objective(q, codes, target, other, h, n);
    }
    const CodeMatrix updated = xmq::assign_codes(q, codes, target, other, h, 1);
    for (std::size_t n = 0; n < codes.num_items; ++n) {
      const double after = item_objective(q, updated, target, other, h, n);
      EXPECT_LE(after, before[n] + 1e-12);
    }
  }
}

TEST(AssignCodes, GreedyReachesFixedPointAndBruteForceBoundsIt) {
  std::mt19937_64 rng(29);
  const int M = 2, K = 3;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    CompositeQuantizer q = random_quantizer(3, M, K, rng);
    q.epsilon = 0.2;
    CodeMatrix codes = random_codes(5, M, K, rng);
    const Matrix target = random_matrix(3, 5, rng);
    const Matrix other = random_matrix(3, 5, rng);
    const QuantizationHyper h{0.3, 0.1};

    CodeMatrix greedy = codes;
    for (int round = 0; round < 10; ++round) {
      greedy = xmq::assign_codes(q, greedy, target, other, h, 1);
    }
    const CodeMatrix again = xmq::assign_codes(q, greedy, target, other, h, 1);
    EXPECT_EQ(greedy.codes, again.codes);

    for (std::size_t n = 0; n < codes.num_items; ++n) {
      double best = std::numeric_limits<double>::infinity();
      CodeMatrix probe = greedy;
      for (std::uint32_t a = 0; a < K; ++a) {
        for (std::uint32_t b = 0; b < K; ++b) {
          probe.codes[n * M] = a;
          probe.codes[n * M + 1] = b;
          best = std::min(best, item_objective(q, probe, target, other, h, n));
        }
      }
      const double reached = item_objective(q, greedy, target, other, h, n);
      EXPECT_GE(reached, best - 1e-12);
      worst_gap = std::max(worst_gap, reached - best);
    }
  }
  RecordProperty("worst_gap_vs_brute_force", std::to_string(worst_gap));
}

TEST(AssignCodes, PlantedOrthogonalBlocksRecoverExactly) {
  // dictionary 0 lives in the first two coordinates, dictionary 1 in the last
  // two, so greedy block selection is globally optimal
  CompositeQuantizer q;
  q.num_dictionaries = 2;
  q.dictionary_size = 3;
  q.elements = Matrix::Zero(4, 6);
  q.elements(0, 0) = 1.0;
  q.elements(1, 1) = 1.0;
  q.elements(0, 2) = -1.0;
  q.elements(2, 3) = 1.0;
  q.elements(3, 4) = 1.0;
  q.elements(2, 5) = -2.0;
  q.epsilon = 0.0;

  std::mt19937_64 rng(31);
  CodeMatrix truth = random_codes(30, 2, 3, rng);
  const Matrix data = xmq::reconstruct(q, truth);

  CodeMatrix init = truth;
  for (auto& v : init.codes) v = 0;
  const CodeMatrix out =
      xmq::assign_codes(q, init, data, Matrix::Zero(4, 30), {0.0, 0.0}, 2);
  EXPECT_EQ(out.codes, truth.codes);
  EXPECT_LT((data - xmq::reconstruct(q, out)).norm(), 1e-14);
}

TEST(UpdateDictionary, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 3, M = 2, K = 3;
    CompositeQuantizer q = random_quantizer(dim, M, K, rng);
    q.epsilon = 0.3;
    const CodeMatrix codes = random_codes(8, M, K, rng);
    const Matrix target = random_matrix(dim, 8, rng);
    const Matrix other = random_matrix(dim, 8, rng);

    auto f = [&](const Vector& v, Vector* g) {
      const Eigen::Map<const Matrix> elems(v.data(), dim, M * K);
      Matrix grad;
      if (g) grad = Matrix::Zero(dim, M * K);
      const double value = xmq::detail::modality_objective_gradient(
          elems, K, codes, target, other, q.epsilon, 0.3, 0.1, g ? &grad : nullptr);
      if (g) *g = Eigen::Map<const Vector>(grad.data(), grad.size());
      return value;
    };
    const Vector x = Eigen::Map<const Vector>(q.elements.data(), q.elements.size());
    EXPECT_LT(xmq::gradient_check(f, x), 1e-6);
  }
}

TEST(UpdateDictionary, SingleDictionaryLeastSquaresOracle) {
  std::mt19937_64 rng(41);
  const int dim = 3, K = 3;
  CompositeQuantizer q = random_quantizer(dim, 1, K, rng);
  q.epsilon = 0.0;
  CodeMatrix codes;
  codes.num_items = 12;
  codes.num_dictionaries = 1;
  codes.dictionary_size = K;
  codes.codes.resize(12);
  for (std::size_t n = 0; n < 12; ++n) codes.codes[n] = static_cast<std::uint32_t>(n % K);
  const Matrix target = random_matrix(dim, 12, rng);

  xmq::LbfgsConfig cfg;
  cfg.max_iterations = 400;
  cfg.grad_tolerance = 1e-10;
  xmq::update_dictionary(q, codes, target, Matrix::Zero(dim, 12), {0.0, 0.0}, cfg);

  for (int k = 0; k < K; ++k) {
    Vector mean = Vector::Zero(dim);
    int count = 0;
    for (std::size_t n = 0; n < 12; ++n) {
      if (codes.codes[n] == static_cast<std::uint32_t>(k)) {
        mean += target.col(static_cast<Eigen::Index>(n));
        ++count;
      }
    }
    mean /= count;
    EXPECT_LT((q.element(0, static_cast<std::uint32_t>(k)) - mean).norm(), 1e-6);
  }
}

TEST(UpdateDictionary, PsiNeverIncreases) {
  std::mt19937_64 rng(43);
  CompositeQuantizer qa = random_quantizer(4, 2, 4, rng);
  CompositeQuantizer qb = random_quantizer(4, 2, 4, rng);
  CodeMatrix ca = random_codes(15, 2, 4, rng);
  CodeMatrix cb = random_codes(15, 2, 4, rng);
  const Matrix xa = random_matrix(4, 15, rng);
  const Matrix xb = random_matrix(4, 15, rng);
  xmq::update_epsilon(qa, ca);
  xmq::update_epsilon(qb, cb);
  PenaltyObjective obj{&qa, &qb, &ca, &cb, &xa, &xb, {0.3, 0.1}};

  const double before = xmq::evaluate_psi(obj);
  const auto res = xmq::update_dictionary(obj, xmq::Modality::kA, qa, {});
  const double after = xmq::evaluate_psi(obj);
  EXPECT_LE(after, before + 1e-10);
  EXPECT_LE(res.psi_after, res.psi_before + 1e-10);
  EXPECT_NEAR(res.psi_before - res.psi_after, before - after, 1e-8);
}

TEST(UpdateSharedDictionary, GradientAndDescent) {
  std::mt19937_64 rng(47);
  CompositeQuantizer q = random_quantizer(3, 2, 3, rng);
  CodeMatrix ca = random_codes(10, 2, 3, rng);
  CodeMatrix cb = random_codes(10, 2, 3, rng);
  const Matrix xa = random_matrix(3, 10, rng);
  const Matrix xb = random_matrix(3, 10, rng);
  xmq::update_epsilon(q, ca);
  const double eps_a = q.epsilon;
  xmq::update_epsilon(q, cb);
  const double eps_b = q.epsilon;
  q.epsilon = eps_a;
  CompositeQuantizer q_b_view = q;
  q_b_view.epsilon = eps_b;
  PenaltyObjective obj{&q, &q_b_view, &ca, &cb, &xa, &xb, {0.3, 0.1}};

  const int dim = 3, MK = 6;
  auto f = [&](const Vector& v, Vector* g) {
    const Eigen::Map<const Matrix> elems(v.data(), dim, MK);
    const Matrix rp = xmq::detail::reconstruct_raw(elems, 3, ca);
    const Matrix rq = xmq::detail::reconstruct_raw(elems, 3, cb);
    Matrix grad;
    if (g) grad = Matrix::Zero(dim, MK);
    Matrix* gp = g ? &grad : nullptr;
    double value = xmq::detail::modality_objective_gradient(elems, 3, ca, xa, rq,
                                                            eps_a, 0.3, 0.1, gp);
    value += xmq::detail::modality_objective_gradient(elems, 3, cb, xb, rp, eps_b,
                                                      0.3, 0.1, gp);
    value -= 0.3 * (rp - rq).squaredNorm();
    if (g) *g = Eigen::Map<const Vector>(grad.data(), grad.size());
    return value;
  };
  const Vector x = Eigen::Map<const Vector>(q.elements.data(), q.elements.size());
  EXPECT_LT(xmq::gradient_check(f, x), 1e-6);

  const double before = f(x, nullptr);
  const auto res = xmq::update_shared_dictionary(q, obj, {});
  EXPECT_LE(res.psi_after, before + 1e-10);
  EXPECT_LT(res.psi_after, before);
}

TEST(Initialize, DeterministicValidAndCoherent) {
  std::mt19937_64 rng(53);
  const Matrix data = random_matrix(4, 60, rng);
  auto [q1, c1] = xmq::initialize_quantizer(data, 2, 4, 77);
  auto [q2, c2] = xmq::initialize_quantizer(data, 2, 4, 77);
  EXPECT_EQ(c1.codes, c2.codes);
  EXPECT_EQ((q1.elements - q2.elements).cwiseAbs().maxCoeff(), 0.0);
  q1.validate();
  c1.validate();
  EXPECT_NEAR(q1.epsilon, xmq::cross_terms(q1, c1).mean(), 1e-12);
  const double err = (data - xmq::reconstruct(q1, c1)).squaredNorm();
  EXPECT_LT(err, data.squaredNorm());

  auto [q3, c3] = xmq::initialize_quantizer(data, 2, 4, 78);
  EXPECT_GT((q1.elements - q3.elements).cwiseAbs().maxCoeff(), 0.0);
}
