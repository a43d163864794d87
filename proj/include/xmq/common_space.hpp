// Shared latent space for paired two-modality data: sparse coding on the
// first modality, matrix factorization on the second, and a linear transform
// aligning the two representations.
#pragma once

#include <random>
#include <utility>

#include "xmq/core.hpp"
#include "xmq/dataset.hpp"
#include "xmq/solvers.hpp"

namespace xmq {

struct CommonSpaceHyper {
  double rho = 0.3;     // sparsity weight on S
  double eta = 0.3;     // scale balance between the two modalities
  double lambda = 0.3;  // alignment weight between R·S and Y'
};

// Learned mapping parameters plus the preprocessing statistics needed to
// bring raw queries into the same space.
struct CommonSpaceModel {
  Matrix basis_b;        // d_pca × b, sparse-coding dictionary
  Matrix factor_u;       // D_T × D, factorization dictionary
  Matrix transform_r;    // D × b, aligns sparse codes with the latent space
  Vector mean_a;         // raw modality-A mean
  Vector mean_b;         // raw modality-B mean
  Matrix pca_projection; // d_pca × D_I, rows orthonormal
  CommonSpaceHyper hyper;

  Eigen::Index latent_dim() const { return transform_r.rows(); }
  Eigen::Index basis_count() const { return basis_b.cols(); }
};

// Per-item training variables: one sparse-code column and one latent column
// per paired item.
struct MappingState {
  Matrix sparse_codes;  // b × N
  Matrix latent_b;      // D × N
};

struct PreprocessResult {
  PairedDataset data;
  Vector mean_a;
  Vector mean_b;
  Matrix pca_projection;
};

namespace detail {

inline void normalize_columns_or_throw(Matrix& m, const char* modality) {
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double norm = m.col(i).norm();
    if (norm < 1e-12) {
      throw DegenerateDataError("preprocess: modality " + std::string(modality) +
                                " item " + std::to_string(i) +
                                " has zero norm after centering");
    }
    m.col(i) /= norm;
  }
}

}  // namespace detail

// Centers both modalities, reduces modality A with PCA fit on the centered
// training columns, and scales every column to unit length. The returned
// statistics reproduce the same transform for held-out queries.
inline PreprocessResult preprocess(const PairedDataset& ds, Eigen::Index target_pca_dim) {
  ds.validate();
  const Eigen::Index n = ds.size();
  if (n < target_pca_dim) {
    throw DimensionError("preprocess: need at least as many items as PCA dimensions");
  }
  if (target_pca_dim < 1 || target_pca_dim > ds.features_a.rows()) {
    throw DimensionError("preprocess: PCA dimension out of range");
  }

  PreprocessResult out;
  out.mean_a = ds.features_a.rowwise().mean();
  out.mean_b = ds.features_b.rowwise().mean();

  Matrix centered_a = ds.features_a.colwise() - out.mean_a;
  Matrix centered_b = ds.features_b.colwise() - out.mean_b;

  const Matrix second_moment = centered_a * centered_a.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment);
  if (eig.info() != Eigen::Success) {
    throw SolverError("preprocess: eigendecomposition failed");
  }

  // eigenvalues come back ascending; keep the leading directions and fix the
  // sign so repeated fits of the same data agree entry for entry
  out.pca_projection.resize(target_pca_dim, ds.features_a.rows());
  for (Eigen::Index k = 0; k < target_pca_dim; ++k) {
    Vector axis = eig.eigenvectors().col(ds.features_a.rows() - 1 - k);
    Eigen::Index lead;
    axis.cwiseAbs().maxCoeff(&lead);
    if (axis[lead] < 0) axis = -axis;
    out.pca_projection.row(k) = axis.transpose();
  }

  out.data.features_a = out.pca_projection * centered_a;
  out.data.features_b = std::move(centered_b);
  detail::normalize_columns_or_throw(out.data.features_a, "A");
  detail::normalize_columns_or_throw(out.data.features_b, "B");
  out.data.labels = ds.labels;
  return out;
}

inline Vector preprocess_query_a(const CommonSpaceModel& m, const Vector& raw) {
  Vector q = m.pca_projection * (raw - m.mean_a);
  const double norm = q.norm();
  if (norm < 1e-12) throw DegenerateDataError("query A has zero norm after preprocessing");
  return q / norm;
}

inline Vector preprocess_query_b(const CommonSpaceModel& m, const Vector& raw) {
  Vector q = raw - m.mean_b;
  const double norm = q.norm();
  if (norm < 1e-12) throw DegenerateDataError("query B has zero norm after preprocessing");
  return q / norm;
}

// Exact value of the mapping objective given the current variables. The two
// quantization coupling terms enter only when the corresponding
// reconstructions are supplied.
inline double mapping_objective(const CommonSpaceModel& m, const MappingState& st,
                                const Matrix& x, const Matrix& y,
                                const Matrix* cp = nullptr, const Matrix* dq = nullptr) {
  const auto& h = m.hyper;
  const Matrix xprime = m.transform_r * st.sparse_codes;
  double value = (x - m.basis_b * st.sparse_codes).squaredNorm() +
                 h.rho * st.sparse_codes.cwiseAbs().sum() +
                 h.eta * (y - m.factor_u * st.latent_b).squaredNorm() +
                 h.lambda * (st.latent_b - xprime).squaredNorm();
  if (cp) value += (xprime - *cp).squaredNorm();
  if (dq) value += (st.latent_b - *dq).squaredNorm();
  return value;
}

// Closed-form minimizer of the latent-variable subproblem. With the
// quantization reconstruction DQ absent the weight on the identity block
// drops from lambda+1 to lambda.
inline Matrix update_latent_text(const CommonSpaceModel& m, const MappingState& st,
                                 const Matrix& y, const Matrix* dq = nullptr) {
  const auto& h = m.hyper;
  const Eigen::Index d = m.latent_dim();
  const double diag = dq ? h.lambda + 1.0 : h.lambda;
  const Matrix lhs = h.eta * (m.factor_u.transpose() * m.factor_u) +
                     diag * Matrix::Identity(d, d);
  Matrix rhs = h.eta * (m.factor_u.transpose() * y) +
               h.lambda * (m.transform_r * st.sparse_codes);
  if (dq) rhs += *dq;
  Eigen::LLT<Matrix> llt(lhs);
  if (llt.info() != Eigen::Success) {
    throw SolverError("update_latent_text: normal-equations solve failed");
  }
  Matrix result = llt.solve(rhs);
  if (!all_finite(result)) throw NonFiniteError("update_latent_text: non-finite solution");
  return result;
}

namespace detail {

// The S subproblem couples the reconstruction term with one or two
// alignment terms. Both cases reduce to a single stacked lasso.
inline LassoProblem stacked_sparse_problem(const CommonSpaceModel& m, const MappingState& st,
                                           const Matrix& x, const Matrix* cp) {
  const auto& h = m.hyper;
  const Eigen::Index top = m.basis_b.rows();
  const Eigen::Index bottom = m.transform_r.rows();
  LassoProblem p;
  p.design.resize(top + bottom, m.basis_count());
  p.targets.resize(top + bottom, x.cols());
  if (cp) {
    const double scale = std::sqrt(1.0 / (h.lambda + 1.0));
    p.design.topRows(top) = scale * m.basis_b;
    p.design.bottomRows(bottom) = m.transform_r;
    p.targets.topRows(top) = scale * x;
    p.targets.bottomRows(bottom) = (*cp + h.lambda * st.latent_b) / (h.lambda + 1.0);
    p.l1_weight = 0.5 * h.rho / (h.lambda + 1.0);
  } else {
    const double scale = std::sqrt(h.lambda);
    p.design.topRows(top) = m.basis_b;
    p.design.bottomRows(bottom) = scale * m.transform_r;
    p.targets.topRows(top) = x;
    p.targets.bottomRows(bottom) = scale * st.latent_b;
    p.l1_weight = 0.5 * h.rho;
  }
  return p;
}

}  // namespace detail

inline Matrix update_sparse_codes(const CommonSpaceModel& m, const MappingState& st,
                                  const Matrix& x, const Matrix* cp = nullptr,
                                  int max_iter = 200, double tol = 1e-8) {
  const LassoProblem p = detail::stacked_sparse_problem(m, st, x, cp);
  return solve_lasso(p, st.sparse_codes, max_iter, tol).solution;
}

// Refits the three constrained dictionaries, warm-starting each solve from
// its current value so no sub-objective can increase.
inline void update_dictionaries(CommonSpaceModel& m, const MappingState& st,
                                const Matrix& x, const Matrix& y,
                                const Matrix* cp = nullptr,
                                int max_iter = 200, double tol = 1e-7) {
  const auto& h = m.hyper;
  {
    QclsProblem p;
    p.targets = x;
    p.factors = st.sparse_codes;
    m.basis_b = solve_qcls(p, m.basis_b, max_iter, tol).solution;
  }
  {
    QclsProblem p;
    p.targets = y;
    p.factors = st.latent_b;
    m.factor_u = solve_qcls(p, m.factor_u, max_iter, tol).solution;
  }
  {
    QclsProblem p;
    p.targets = cp ? Matrix((*cp + h.lambda * st.latent_b) / (h.lambda + 1.0))
                   : st.latent_b;
    p.factors = st.sparse_codes;
    m.transform_r = solve_qcls(p, m.transform_r, max_iter, tol).solution;
  }
}

// Sparse-codes a preprocessed modality-A query against the learned basis and
// carries it into the latent space.
inline Vector embed_query_a(const CommonSpaceModel& m, const Vector& x_q,
                            int max_iter = 200, double tol = 1e-8) {
  LassoProblem p;
  p.design = m.basis_b;
  p.targets = x_q;
  p.l1_weight = 0.5 * m.hyper.rho;
  const Matrix s = solve_lasso(p, Matrix::Zero(m.basis_count(), 1), max_iter, tol).solution;
  return m.transform_r * s.col(0);
}

// Least-squares embedding of a preprocessed modality-B query, with a small
// ridge so a rank-deficient factor matrix stays solvable.
inline Vector embed_query_b(const CommonSpaceModel& m, const Vector& y_q) {
  constexpr double kRidge = 1e-8;
  const Eigen::Index d = m.latent_dim();
  const Matrix lhs = m.factor_u.transpose() * m.factor_u + kRidge * Matrix::Identity(d, d);
  return Eigen::LLT<Matrix>(lhs).solve(m.factor_u.transpose() * y_q);
}

// Fresh mapping parameters for a preprocessed dataset: the basis seeded from
// observed columns, the dense factors from scaled Gaussian draws, everything
// projected to the feasible set.
inline std::pair<CommonSpaceModel, MappingState> initialize_common_space(
    const Matrix& x, const Matrix& y, Eigen::Index latent_dim, Eigen::Index basis_count,
    const CommonSpaceHyper& hyper, std::uint64_t seed) {
  if (x.cols() != y.cols()) throw DimensionError("initialize_common_space: column mismatch");

  CommonSpaceModel m;
  m.hyper = hyper;

  std::mt19937_64 rng(split_seed(seed, 0x6d61'7070'696e'67ULL));
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<Eigen::Index> pick(0, x.cols() - 1);

  m.basis_b.resize(x.rows(), basis_count);
  for (Eigen::Index j = 0; j < basis_count; ++j) {
    Vector col = x.col(pick(rng));
    for (Eigen::Index r = 0; r < col.size(); ++r) col[r] += 0.01 * gauss(rng);
    m.basis_b.col(j) = col;
  }
  project_columns_to_ball(m.basis_b, 1.0);

  m.factor_u.resize(y.rows(), latent_dim);
  for (Eigen::Index j = 0; j < latent_dim; ++j)
    for (Eigen::Index r = 0; r < y.rows(); ++r) m.factor_u(r, j) = gauss(rng);
  m.factor_u /= std::sqrt(static_cast<double>(y.rows()));
  project_columns_to_ball(m.factor_u, 1.0);

  m.transform_r.resize(latent_dim, basis_count);
  for (Eigen::Index j = 0; j < basis_count; ++j)
    for (Eigen::Index r = 0; r < latent_dim; ++r) m.transform_r(r, j) = gauss(rng);
  m.transform_r /= std::sqrt(static_cast<double>(latent_dim));
  project_columns_to_ball(m.transform_r, 1.0);

  MappingState st;
  st.sparse_codes = Matrix::Zero(basis_count, x.cols());
  st.latent_b = Matrix::Zero(latent_dim, x.cols());
  return {std::move(m), std::move(st)};
}

}  // namespace xmq
