// Composite quantization of a latent point set: each item is approximated by a
// sum of one element from each of M dictionaries, with a penalty keeping the
// per-item cross terms near a shared constant so distances can be computed
// from lookup tables alone.
#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "xmq/codes.hpp"
#include "xmq/core.hpp"
#include "xmq/solvers.hpp"

namespace xmq {

struct QuantizationHyper {
  double gamma = 0.3;  // coupling strength between the two modalities
  double mu = 0.1;     // penalty keeping the cross terms constant
};

// M dictionaries of K elements each, stored as one D × (M·K) matrix with the
// m-th dictionary occupying columns [m·K, (m+1)·K).
struct CompositeQuantizer {
  Matrix elements;
  int num_dictionaries = 0;  // M
  int dictionary_size = 0;   // K
  double epsilon = 0.0;      // shared cross-term constant

  Eigen::Index dim() const { return elements.rows(); }

  auto dictionary(int m) const {
    return elements.middleCols(static_cast<Eigen::Index>(m) * dictionary_size,
                               dictionary_size);
  }
  auto element(int m, std::uint32_t k) const {
    return elements.col(static_cast<Eigen::Index>(m) * dictionary_size + k);
  }

  void validate() const {
    if (num_dictionaries < 1 || dictionary_size < 1) {
      throw DimensionError("CompositeQuantizer: M and K must be positive");
    }
    if (elements.cols() !=
        static_cast<Eigen::Index>(num_dictionaries) * dictionary_size) {
      throw DimensionError("CompositeQuantizer: element count mismatch");
    }
    if (!all_finite(elements)) {
      throw NonFiniteError("CompositeQuantizer: non-finite elements");
    }
  }
};

enum class Modality { kA, kB };

// Everything the coupled two-modality objective reads: both quantizers,
// both code sets, and the two latent representations they approximate.
struct PenaltyObjective {
  const CompositeQuantizer* quant_a = nullptr;
  const CompositeQuantizer* quant_b = nullptr;
  const CodeMatrix* codes_a = nullptr;
  const CodeMatrix* codes_b = nullptr;
  const Matrix* latent_a = nullptr;  // X' = R·S
  const Matrix* latent_b = nullptr;  // Y'
  QuantizationHyper hyper;
};

// Sum of the selected dictionary elements for every item.
inline Matrix reconstruct(const CompositeQuantizer& q, const CodeMatrix& codes) {
  if (codes.num_dictionaries != q.num_dictionaries ||
      codes.dictionary_size != static_cast<std::size_t>(q.dictionary_size)) {
    throw DimensionError("reconstruct: codes do not match quantizer layout");
  }
  Matrix out = Matrix::Zero(q.dim(), static_cast<Eigen::Index>(codes.num_items));
  for (std::size_t n = 0; n < codes.num_items; ++n) {
    for (int m = 0; m < q.num_dictionaries; ++m) {
      out.col(static_cast<Eigen::Index>(n)) += q.element(m, codes.at(n, m));
    }
  }
  return out;
}

// Cross term of one item: the sum of inner products between selected elements
// of distinct dictionaries, both orderings counted. Computed through the
// identity |sum c|^2 - sum |c|^2.
inline double cross_term(const CompositeQuantizer& q, const CodeMatrix& codes,
                         std::size_t item) {
  Vector sum = Vector::Zero(q.dim());
  double self = 0.0;
  for (int m = 0; m < q.num_dictionaries; ++m) {
    const auto elem = q.element(m, codes.at(item, m));
    sum += elem;
    self += elem.squaredNorm();
  }
  return sum.squaredNorm() - self;
}

inline Vector cross_terms(const CompositeQuantizer& q, const CodeMatrix& codes) {
  Vector out(static_cast<Eigen::Index>(codes.num_items));
  for (std::size_t n = 0; n < codes.num_items; ++n) {
    out[static_cast<Eigen::Index>(n)] = cross_term(q, codes, n);
  }
  return out;
}

// Mean per-item cross term: the exact minimizer of sum_n (cross_n - eps)^2.
inline double update_epsilon(CompositeQuantizer& q, const CodeMatrix& codes) {
  if (codes.num_items == 0) throw DimensionError("update_epsilon: no items");
  q.epsilon = cross_terms(q, codes).mean();
  return q.epsilon;
}

// Full penalty objective: two reconstruction terms, the pair-alignment term,
// and the two cross-term penalties.
inline double evaluate_psi(const PenaltyObjective& obj) {
  const Matrix recon_a = reconstruct(*obj.quant_a, *obj.codes_a);
  const Matrix recon_b = reconstruct(*obj.quant_b, *obj.codes_b);
  double psi = (*obj.latent_a - recon_a).squaredNorm() +
               (*obj.latent_b - recon_b).squaredNorm() +
               obj.hyper.gamma * (recon_a - recon_b).squaredNorm();
  const Vector cross_a = cross_terms(*obj.quant_a, *obj.codes_a);
  const Vector cross_b = cross_terms(*obj.quant_b, *obj.codes_b);
  psi += obj.hyper.mu *
         (cross_a.array() - obj.quant_a->epsilon).square().sum();
  psi += obj.hyper.mu *
         (cross_b.array() - obj.quant_b->epsilon).square().sum();
  return psi;
}

namespace detail {

inline Matrix reconstruct_raw(const Matrix& elements, int K, const CodeMatrix& codes) {
  Matrix out = Matrix::Zero(elements.rows(), static_cast<Eigen::Index>(codes.num_items));
  for (std::size_t n = 0; n < codes.num_items; ++n) {
    for (int m = 0; m < codes.num_dictionaries; ++m) {
      out.col(static_cast<Eigen::Index>(n)) +=
          elements.col(static_cast<Eigen::Index>(m) * K + codes.at(n, m));
    }
  }
  return out;
}

// Objective and gradient of one modality's share of the penalty objective as
// a function of its element matrix, with the other modality's reconstruction
// held constant:
//   |target - recon|^2 + gamma |recon - other|^2 + mu sum_n (cross_n - eps)^2
// The gradient of the first two terms routed through dictionary m is
// 2((gamma+1)·recon - target - gamma·other)·P_m^T; the penalty contributes
// 4mu(cross_n - eps)(recon_n - selected element) per item.
inline double modality_objective_gradient(const Matrix& elements, int K,
                                          const CodeMatrix& codes,
                                          const Matrix& target,
                                          const Matrix& other_recon,
                                          double epsilon, double gamma, double mu,
                                          Matrix* grad) {
  const Matrix recon = reconstruct_raw(elements, K, codes);
  Vector colsq(elements.cols());
  for (Eigen::Index j = 0; j < elements.cols(); ++j) colsq[j] = elements.col(j).squaredNorm();

  double objective = (target - recon).squaredNorm() +
                     gamma * (recon - other_recon).squaredNorm();

  Matrix base2;
  if (grad) {
    base2 = 2.0 * ((gamma + 1.0) * recon - target - gamma * other_recon);
  }

  for (std::size_t n = 0; n < codes.num_items; ++n) {
    const auto col = static_cast<Eigen::Index>(n);
    double self = 0.0;
    for (int m = 0; m < codes.num_dictionaries; ++m) {
      self += colsq[static_cast<Eigen::Index>(m) * K + codes.at(n, m)];
    }
    const double cross = recon.col(col).squaredNorm() - self;
    const double dev = cross - epsilon;
    objective += mu * dev * dev;
    if (grad) {
      const double w = 4.0 * mu * dev;
      for (int m = 0; m < codes.num_dictionaries; ++m) {
        const Eigen::Index j = static_cast<Eigen::Index>(m) * K + codes.at(n, m);
        grad->col(j) += base2.col(col) + w * (recon.col(col) - elements.col(j));
      }
    }
  }
  return objective;
}

}  // namespace detail

struct DictionaryUpdateResult {
  double psi_before = 0.0;
  double psi_after = 0.0;
  int iterations = 0;
  bool line_search_warning = false;
};

// Minimizes the penalty objective over one modality's dictionary elements
// with codes fixed. If the solver cannot make progress the elements are
// left untouched and the warning flag is set.
inline DictionaryUpdateResult update_dictionary(CompositeQuantizer& q,
                                                const CodeMatrix& codes,
                                                const Matrix& target,
                                                const Matrix& other_recon,
                                                const QuantizationHyper& hyper,
                                                const LbfgsConfig& cfg = {}) {
  const Eigen::Index dim = q.dim();
  const Eigen::Index cols = q.elements.cols();
  const int K = q.dictionary_size;

  auto f = [&](const Vector& v, Vector* g) {
    const Eigen::Map<const Matrix> elems(v.data(), dim, cols);
    Matrix grad;
    if (g) grad = Matrix::Zero(dim, cols);
    const double obj = detail::modality_objective_gradient(
        elems, K, codes, target, other_recon, q.epsilon, hyper.gamma, hyper.mu,
        g ? &grad : nullptr);
    if (g) *g = Eigen::Map<const Vector>(grad.data(), grad.size());
    return obj;
  };

  Vector x0 = Eigen::Map<const Vector>(q.elements.data(), q.elements.size());
  const LbfgsResult res = minimize_lbfgs(f, x0, cfg);

  DictionaryUpdateResult out;
  out.psi_before = f(x0, nullptr);
  out.psi_after = res.objective;
  out.iterations = res.iterations;
  if (res.objective < out.psi_before) {
    q.elements = Eigen::Map<const Matrix>(res.x.data(), dim, cols);
  } else {
    out.psi_after = out.psi_before;
    out.line_search_warning = res.status == SolveStatus::kLineSearchFailed;
  }
  return out;
}

// One modality's dictionary update drawn from a full penalty objective.
inline DictionaryUpdateResult update_dictionary(PenaltyObjective& obj, Modality which,
                                                CompositeQuantizer& q,
                                                const LbfgsConfig& cfg = {}) {
  if (which == Modality::kA) {
    const Matrix other = reconstruct(*obj.quant_b, *obj.codes_b);
    return update_dictionary(q, *obj.codes_a, *obj.latent_a, other, obj.hyper, cfg);
  }
  const Matrix other = reconstruct(*obj.quant_a, *obj.codes_a);
  return update_dictionary(q, *obj.codes_b, *obj.latent_b, other, obj.hyper, cfg);
}

// Joint update when both modalities share one element matrix. The pair term
// gamma|CP - CQ|^2 then depends on the elements through both code sets, so
// the gradient is the sum of the two per-modality accumulations.
inline DictionaryUpdateResult update_shared_dictionary(CompositeQuantizer& q,
                                                       const PenaltyObjective& obj,
                                                       const LbfgsConfig& cfg = {}) {
  const Eigen::Index dim = q.dim();
  const Eigen::Index cols = q.elements.cols();
  const int K = q.dictionary_size;
  const double gamma = obj.hyper.gamma;
  const double mu = obj.hyper.mu;

  auto f = [&](const Vector& v, Vector* g) {
    const Eigen::Map<const Matrix> elems(v.data(), dim, cols);
    const Matrix recon_p = detail::reconstruct_raw(elems, K, *obj.codes_a);
    const Matrix recon_q = detail::reconstruct_raw(elems, K, *obj.codes_b);
    Matrix grad;
    if (g) grad = Matrix::Zero(dim, cols);
    Matrix* gp = g ? &grad : nullptr;
    // each call covers its reconstruction + penalty terms and its half of the
    // pair term's gradient; the pair term's value would be double counted, so
    // remove one copy afterwards
    double obj_value = detail::modality_objective_gradient(
        elems, K, *obj.codes_a, *obj.latent_a, recon_q, obj.quant_a->epsilon,
        gamma, mu, gp);
    obj_value += detail::modality_objective_gradient(
        elems, K, *obj.codes_b, *obj.latent_b, recon_p, obj.quant_b->epsilon,
        gamma, mu, gp);
    obj_value -= gamma * (recon_p - recon_q).squaredNorm();
    if (g) *g = Eigen::Map<const Vector>(grad.data(), grad.size());
    return obj_value;
  };

  Vector x0 = Eigen::Map<const Vector>(q.elements.data(), q.elements.size());
  const LbfgsResult res = minimize_lbfgs(f, x0, cfg);

  DictionaryUpdateResult out;
  out.psi_before = f(x0, nullptr);
  out.psi_after = res.objective;
  out.iterations = res.iterations;
  if (res.objective < out.psi_before) {
    q.elements = Eigen::Map<const Matrix>(res.x.data(), dim, cols);
  } else {
    out.psi_after = out.psi_before;
    out.line_search_warning = res.status == SolveStatus::kLineSearchFailed;
  }
  return out;
}

// Greedy code assignment: cycling through the M dictionaries, re-select the
// element minimizing the per-item objective
//   |target_n - sum|^2 + gamma |sum - other_n|^2 + mu (cross_n - eps)^2
// with the other blocks fixed. Ties go to the lowest element index.
inline CodeMatrix assign_codes(const CompositeQuantizer& q, CodeMatrix codes,
                               const Matrix& target, const Matrix& other_recon,
                               const QuantizationHyper& hyper, int cycles = 1) {
  const int M = q.num_dictionaries;
  const int K = q.dictionary_size;
  const double gamma = hyper.gamma;
  const double mu = hyper.mu;
  Vector colsq(q.elements.cols());
  for (Eigen::Index j = 0; j < q.elements.cols(); ++j) colsq[j] = q.elements.col(j).squaredNorm();

  for (std::size_t n = 0; n < codes.num_items; ++n) {
    const auto col = static_cast<Eigen::Index>(n);
    Vector current = Vector::Zero(q.dim());
    double selected_sq = 0.0;
    for (int m = 0; m < M; ++m) {
      current += q.element(m, codes.at(n, m));
      selected_sq += colsq[static_cast<Eigen::Index>(m) * K + codes.at(n, m)];
    }
    for (int cycle = 0; cycle < cycles; ++cycle) {
      for (int m = 0; m < M; ++m) {
        const std::uint32_t old_k = codes.at(n, m);
        const Eigen::Index old_j = static_cast<Eigen::Index>(m) * K + old_k;
        const Vector base = current - q.elements.col(old_j);
        const double base_selected_sq = selected_sq - colsq[old_j];
        const double base_sq = base.squaredNorm();
        const Vector to_target = target.col(col) - base;
        const Vector to_other = other_recon.col(col) - base;
        const double target_sq = to_target.squaredNorm();
        const double other_sq = to_other.squaredNorm();

        std::uint32_t best_k = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::uint32_t k = 0; k < static_cast<std::uint32_t>(K); ++k) {
          const Eigen::Index j = static_cast<Eigen::Index>(m) * K + k;
          const auto elem = q.elements.col(j);
          const double esq = colsq[j];
          const double fit = target_sq - 2.0 * to_target.dot(elem) + esq;
          double score = fit;
          if (gamma != 0.0) {
            score += gamma * (other_sq - 2.0 * to_other.dot(elem) + esq);
          }
          if (mu != 0.0) {
            const double cross =
                base_sq + 2.0 * base.dot(elem) + esq - (base_selected_sq + esq);
            const double dev = cross - q.epsilon;
            score += mu * dev * dev;
          }
          if (score < best_score) {
            best_score = score;
            best_k = k;
          }
        }
        if (best_k != old_k) {
          const Eigen::Index new_j = static_cast<Eigen::Index>(m) * K + best_k;
          current = base + q.elements.col(new_j);
          selected_sq = base_selected_sq + colsq[new_j];
          codes.codes[n * M + m] = best_k;
        }
      }
    }
  }
  return codes;
}

inline CodeMatrix assign_codes(const PenaltyObjective& obj, Modality which, int cycles = 1) {
  if (which == Modality::kA) {
    const Matrix other = reconstruct(*obj.quant_b, *obj.codes_b);
    return assign_codes(*obj.quant_a, *obj.codes_a, *obj.latent_a, other, obj.hyper,
                        cycles);
  }
  const Matrix other = reconstruct(*obj.quant_a, *obj.codes_a);
  return assign_codes(*obj.quant_b, *obj.codes_b, *obj.latent_b, other, obj.hyper,
                      cycles);
}

// Residual k-means initialization: dictionary m is fit with Lloyd iterations
// on what the first m-1 dictionaries leave unexplained.
inline std::pair<CompositeQuantizer, CodeMatrix> initialize_quantizer(
    const Matrix& data, int M, int K, std::uint64_t seed, int lloyd_iterations = 10) {
  const Eigen::Index dim = data.rows();
  const auto n = static_cast<std::size_t>(data.cols());
  if (n < static_cast<std::size_t>(K)) {
    throw DimensionError("initialize_quantizer: need at least K items");
  }

  CompositeQuantizer q;
  q.num_dictionaries = M;
  q.dictionary_size = K;
  q.elements = Matrix::Zero(dim, static_cast<Eigen::Index>(M) * K);

  CodeMatrix codes;
  codes.num_items = n;
  codes.num_dictionaries = M;
  codes.dictionary_size = static_cast<std::size_t>(K);
  codes.codes.assign(n * static_cast<std::size_t>(M), 0);

  Matrix residual = data;
  std::mt19937_64 rng(split_seed(seed, 0x7175'616e'7469'7aULL));

  for (int m = 0; m < M; ++m) {
    // seed centers from K distinct items
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (int k = 0; k < K; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(order[k], order[pick(rng)]);
    }
    Matrix centers(dim, K);
    for (int k = 0; k < K; ++k) centers.col(k) = residual.col(static_cast<Eigen::Index>(order[k]));

    std::vector<std::uint32_t> assign(n, 0);
    for (int it = 0; it < lloyd_iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_k = 0;
        for (std::uint32_t k = 0; k < static_cast<std::uint32_t>(K); ++k) {
          const double d =
              (residual.col(static_cast<Eigen::Index>(i)) - centers.col(k)).squaredNorm();
          if (d < best) {
            best = d;
            best_k = k;
          }
        }
        assign[i] = best_k;
      }
      Matrix sums = Matrix::Zero(dim, K);
      std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
      for (std::size_t i = 0; i < n; ++i) {
        sums.col(assign[i]) += residual.col(static_cast<Eigen::Index>(i));
        ++counts[assign[i]];
      }
      for (int k = 0; k < K; ++k) {
        if (counts[static_cast<std::size_t>(k)] > 0) {
          centers.col(k) = sums.col(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
        }
      }
    }

    q.elements.middleCols(static_cast<Eigen::Index>(m) * K, K) = centers;
    for (std::size_t i = 0; i < n; ++i) {
      codes.codes[i * static_cast<std::size_t>(M) + static_cast<std::size_t>(m)] = assign[i];
      residual.col(static_cast<Eigen::Index>(i)) -= centers.col(assign[i]);
    }
  }

  update_epsilon(q, codes);
  return {std::move(q), std::move(codes)};
}

}  // namespace xmq
