#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include "xmq/core.hpp"

namespace xmq {

enum class SolveStatus {
  kConverged,
  kMaxIterations,
  kLineSearchFailed,
};

// ---------------------------------------------------------------------------
// L1-regularized least squares (lasso)
//
// minimize over S:  0.5 * ||design * S - targets||_F^2 + l1_weight * |S|_1
//
// Columns are independent subproblems; they are solved together so the hot
// path stays in matrix-matrix products.
// ---------------------------------------------------------------------------

struct LassoProblem {
  Matrix design;   // d x b
  Matrix targets;  // d x n
  double l1_weight = 0.0;
};

struct LassoResult {
  Matrix solution;       // b x n
  double objective = 0;  // final value
  double optimality = 0; // max subgradient residual
  int iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

namespace detail {

// Largest eigenvalue of op composed with itself is estimated by plain power
// iteration; apply(v) must compute the symmetric PSD operator's action.
inline double power_iteration_lmax(const std::function<Vector(const Vector&)>& apply,
                                   Eigen::Index dim, int iters = 60) {
  if (dim == 0) return 0.0;
  Vector v = Vector::Ones(dim);
  // deterministic perturbation so v is not orthogonal to the top eigenvector
  for (Eigen::Index i = 0; i < dim; ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vector w = apply(v);
    const double norm = w.norm();
    if (norm <= 0.0 || !std::isfinite(norm)) return std::max(lambda, 0.0);
    lambda = norm;
    v = w / norm;
  }
  return lambda;
}

inline Matrix soft_threshold(const Matrix& v, double tau) {
  return v.unaryExpr([tau](double x) {
    if (x > tau) return x - tau;
    if (x < -tau) return x + tau;
    return 0.0;
  });
}

}  // namespace detail

// Max-norm violation of the lasso optimality conditions at S:
// |g| <= w at zeros, g + w*sign(S) == 0 at nonzeros, with g the gradient of
// the smooth half.
inline double lasso_optimality_residual(const LassoProblem& p, const Matrix& s,
                                        const Matrix& smooth_grad) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double g = smooth_grad(i, j);
      const double v = s(i, j);
      double r;
      if (v > 0.0) r = std::abs(g + p.l1_weight);
      else if (v < 0.0) r = std::abs(g - p.l1_weight);
      else r = std::max(0.0, std::abs(g) - p.l1_weight);
      worst = std::max(worst, r);
    }
  }
  return worst;
}

inline double lasso_objective(const LassoProblem& p, const Matrix& s) {
  const double quad = 0.5 * (p.design * s - p.targets).squaredNorm();
  return quad + p.l1_weight * s.cwiseAbs().sum();
}

// Monotone FISTA with backtracking on the step size. The reported objective
// sequence never increases.
inline LassoResult solve_lasso(const LassoProblem& p, const Matrix& init, int max_iter = 200,
                               double tol = 1e-8) {
  if (p.l1_weight < 0.0) throw DimensionError("solve_lasso: negative l1 weight");
  if (p.design.rows() != p.targets.rows()) {
    throw DimensionError("solve_lasso: design and targets row counts differ");
  }
  if (init.rows() != p.design.cols() || init.cols() != p.targets.cols()) {
    throw DimensionError("solve_lasso: bad init shape");
  }

  const Matrix& a = p.design;
  double lip = detail::power_iteration_lmax(
      [&a](const Vector& v) { return Vector(a.transpose() * (a * v)); }, a.cols());
  lip = std::max(lip * 1.01, 1e-12);

  Matrix x = init;
  Matrix ax = a * x;                       // cached design*x
  double fx = 0.5 * (ax - p.targets).squaredNorm() + p.l1_weight * x.cwiseAbs().sum();
  Matrix x_prev = x;
  Matrix ax_prev = ax;
  Matrix y = x;
  Matrix ay = ax;
  double t = 1.0;

  LassoResult res;
  res.status = SolveStatus::kMaxIterations;

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Matrix grad_y = a.transpose() * (ay - p.targets);

    Matrix z, az;
    double fz_smooth = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      z = detail::soft_threshold(y - grad_y / lip, p.l1_weight / lip);
      az = a * z;
      fz_smooth = 0.5 * (az - p.targets).squaredNorm();
      const double fy_smooth = 0.5 * (ay - p.targets).squaredNorm();
      const Matrix dz = z - y;
      const double model = fy_smooth + grad_y.cwiseProduct(dz).sum() + 0.5 * lip * dz.squaredNorm();
      if (fz_smooth <= model + 1e-12 * (1.0 + std::abs(model))) break;
      lip *= 2.0;
    }
    const double fz = fz_smooth + p.l1_weight * z.cwiseAbs().sum();
    if (!std::isfinite(fz)) throw SolverError("solve_lasso: non-finite objective");

    x_prev.swap(x);
    ax_prev.swap(ax);
    if (fz <= fx) {
      x = z;
      ax = az;
      fx = fz;
    } else {
      x = x_prev;  // keep the best point, momentum continues through z
      ax = ax_prev;
    }

    const Matrix grad_x = a.transpose() * (ax - p.targets);
    const double resid = lasso_optimality_residual(p, x, grad_x);
    if (resid <= tol) {
      res.status = SolveStatus::kConverged;
      res.optimality = resid;
      ++iter;
      break;
    }
    res.optimality = resid;

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev);
    ay = ax + (t / t_next) * (az - ax) + ((t - 1.0) / t_next) * (ax - ax_prev);
    t = t_next;
  }

  res.solution = std::move(x);
  res.objective = fx;
  res.iterations = iter;
  return res;
}

// ---------------------------------------------------------------------------
// Least squares with unit-ball column constraints
//
// minimize over W:  ||W * factors - targets||_F^2
// subject to        ||W.col(i)||_2^2 <= radius^2 for every column i
//
// Solved by accelerated projected gradient; the feasible set projects
// column-by-column.
// ---------------------------------------------------------------------------

struct QclsProblem {
  Matrix targets;  // d x n
  Matrix factors;  // b x n
  double radius = 1.0;
};

struct QclsResult {
  Matrix solution;  // d x b
  double objective = 0;
  double kkt_residual = 0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

inline void project_columns_to_ball(Matrix& w, double radius) {
  for (Eigen::Index i = 0; i < w.cols(); ++i) {
    const double norm = w.col(i).norm();
    if (norm > radius) w.col(i) *= radius / norm;
  }
}

inline double qcls_objective(const QclsProblem& p, const Matrix& w) {
  return (w * p.factors - p.targets).squaredNorm();
}

// Stationarity of the Lagrangian with one multiplier per column: at interior
// columns the gradient must vanish; at boundary columns the gradient may only
// point along the outward normal.
inline double qcls_kkt_residual(const QclsProblem& p, const Matrix& w, const Matrix& gram,
                                const Matrix& cross) {
  const Matrix grad = 2.0 * (w * gram - cross);
  const double r2 = p.radius * p.radius;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.cols(); ++i) {
    const double nsq = w.col(i).squaredNorm();
    double r;
    if (nsq < r2 * (1.0 - 1e-9)) {
      r = grad.col(i).norm();
    } else {
      const double nu = std::max(0.0, -grad.col(i).dot(w.col(i)) / (2.0 * nsq));
      r = (grad.col(i) + 2.0 * nu * w.col(i)).norm();
    }
    worst = std::max(worst, r);
  }
  return worst;
}

inline QclsResult solve_qcls(const QclsProblem& p, const Matrix& init, int max_iter = 200,
                             double tol = 1e-7) {
  if (p.radius <= 0.0) throw DimensionError("solve_qcls: radius must be positive");
  if (p.targets.cols() != p.factors.cols()) {
    throw DimensionError("solve_qcls: targets and factors column counts differ");
  }
  if (init.rows() != p.targets.rows() || init.cols() != p.factors.rows()) {
    throw DimensionError("solve_qcls: bad init shape");
  }

  const Matrix gram = p.factors * p.factors.transpose();          // b x b
  const Matrix cross = p.targets * p.factors.transpose();         // d x b
  const double target_sq = p.targets.squaredNorm();
  auto objective = [&](const Matrix& w) {
    return (w * gram).cwiseProduct(w).sum() - 2.0 * w.cwiseProduct(cross).sum() + target_sq;
  };

  double lip = detail::power_iteration_lmax(
      [&gram](const Vector& v) { return Vector(gram * v); }, gram.rows());
  lip = std::max(2.0 * lip * 1.01, 1e-12);

  Matrix x = init;
  project_columns_to_ball(x, p.radius);
  double fx = objective(x);
  Matrix x_prev = x;
  Matrix y = x;
  double t = 1.0;

  QclsResult res;
  res.status = SolveStatus::kMaxIterations;

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Matrix grad_y = 2.0 * (y * gram - cross);

    Matrix z;
    double fz = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      z = y - grad_y / lip;
      project_columns_to_ball(z, p.radius);
      fz = objective(z);
      const Matrix dz = z - y;
      const double model =
          objective(y) + grad_y.cwiseProduct(dz).sum() + 0.5 * lip * dz.squaredNorm();
      if (fz <= model + 1e-12 * (1.0 + std::abs(model))) break;
      lip *= 2.0;
    }
    if (!std::isfinite(fz)) throw SolverError("solve_qcls: non-finite objective");

    x_prev.swap(x);
    if (fz <= fx) {
      x = z;
      fx = fz;
    } else {
      x = x_prev;
    }

    const double resid = qcls_kkt_residual(p, x, gram, cross);
    res.kkt_residual = resid;
    if (resid <= tol) {
      res.status = SolveStatus::kConverged;
      ++iter;
      break;
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
  }

  res.solution = std::move(x);
  res.objective = fx;
  res.iterations = iter;
  return res;
}

// ---------------------------------------------------------------------------
// Limited-memory BFGS with Armijo backtracking
// ---------------------------------------------------------------------------

// Evaluates the objective at x; fills *grad_out when non-null.
using ObjectiveFn = std::function<double(const Vector& x, Vector* grad_out)>;

struct LbfgsConfig {
  int memory = 8;
  int max_iterations = 50;
  double grad_tolerance = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_line_search_steps = 40;
};

struct LbfgsResult {
  Vector x;
  double objective = 0;
  double grad_norm = 0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

inline LbfgsResult minimize_lbfgs(const ObjectiveFn& f, Vector x0, const LbfgsConfig& cfg) {
  if (cfg.memory < 1) throw DimensionError("minimize_lbfgs: memory must be >= 1");

  Vector grad(x0.size());
  double fx = f(x0, &grad);
  if (!std::isfinite(fx) || !grad.allFinite()) {
    throw SolverError("minimize_lbfgs: non-finite objective or gradient at x0");
  }

  LbfgsResult res;
  res.status = SolveStatus::kMaxIterations;

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  Vector x = std::move(x0);
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    if (grad.norm() <= cfg.grad_tolerance) {
      res.status = SolveStatus::kConverged;
      break;
    }

    // two-loop recursion
    Vector dir = -grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      dir *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }

    double slope = grad.dot(dir);
    if (slope >= 0.0) {  // curvature breakdown; fall back to steepest descent
      dir = -grad;
      slope = -grad.squaredNorm();
    }

    double step = 1.0;
    double fn = fx;
    Vector xn, gn(grad.size());
    bool accepted = false;
    for (int ls = 0; ls < cfg.max_line_search_steps; ++ls) {
      xn = x + step * dir;
      fn = f(xn, nullptr);
      if (std::isfinite(fn) && fn <= fx + cfg.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack_factor;
    }
    if (!accepted) {
      res.status = SolveStatus::kLineSearchFailed;
      break;
    }

    const double fn2 = f(xn, &gn);
    if (!std::isfinite(fn2) || !gn.allFinite()) {
      throw SolverError("minimize_lbfgs: non-finite objective or gradient");
    }

    Vector s = xn - x;
    Vector yv = gn - grad;
    // Backtracking alone does not guarantee positive curvature along the
    // step, and a rejected pair leaves the history stale. Shifting y toward
    // s enforces a minimum relative curvature so every pair stays usable.
    const double floor = 1e-4 * s.norm() * yv.norm();
    double sy = s.dot(yv);
    if (s.squaredNorm() > 0.0 && sy < floor) {
      yv += ((floor - sy) / s.squaredNorm()) * s;
      sy = s.dot(yv);
    }
    if (sy > 0.0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    x = std::move(xn);
    fx = fn2;
    grad = gn;
  }

  res.x = std::move(x);
  res.objective = fx;
  res.grad_norm = grad.norm();
  res.iterations = iter;
  return res;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Relative disagreement between the analytic gradient of f at x and a central
// finite-difference estimate.
inline double gradient_check(const ObjectiveFn& f, const Vector& x, double step = 1e-6) {
  Vector analytic(x.size());
  f(x, &analytic);
  Vector fd(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double fp = f(probe, nullptr);
    probe[i] = x[i] - h;
    const double fm = f(probe, nullptr);
    probe[i] = x[i];
    fd[i] = (fp - fm) / (2.0 * h);
  }
  const double denom = std::max(analytic.norm() + fd.norm(), 1e-12);
  return (analytic - fd).norm() / denom;
}

}  // namespace xmq
