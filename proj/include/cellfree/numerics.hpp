#ifndef CELLFREE_NUMERICS_HPP
#define CELLFREE_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cellfree/errors.hpp"

namespace cellfree {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// All numerical thresholds of the dense kernels live here.
struct Tolerances {
  static constexpr double hermitian_asymmetry = 1e-10;  // relative, Frobenius
  static constexpr double max_condition = 1e12;
  static constexpr double solve_residual = 1e-8;        // relative, Frobenius
  static constexpr double lp_pivot = 1e-11;
  static constexpr double lp_phase1 = 1e-10;            // residual infeasibility accepted as zero
  static constexpr double lp_witness = 1e-9;            // absolute, on row-normalized constraints
};

namespace numerics {

struct HermitianSystem {
  CMatrix a;  // M x M, Hermitian
  CMatrix b;  // M x U
};

/// Solves A X = B for Hermitian, possibly indefinite A.
///
/// Uses a partially pivoted LU so the sign pattern of the diagonal loading is
/// irrelevant. Throws IllConditioned when the reciprocal condition estimate
/// falls below 1/max_condition or the residual check fails, and
/// std::invalid_argument when A is not Hermitian.
inline CMatrix hermitian_solve(const HermitianSystem& sys) {
  const auto& a = sys.a;
  if (a.rows() != a.cols() || a.rows() != sys.b.rows()) {
    throw std::invalid_argument("hermitian_solve: dimension mismatch");
  }
  const double norm_a = a.norm();
  if ((a - a.adjoint()).norm() > Tolerances::hermitian_asymmetry * norm_a) {
    throw std::invalid_argument("hermitian_solve: matrix is not Hermitian");
  }
  if (!a.allFinite() || !sys.b.allFinite()) {
    throw IllConditioned("hermitian_solve: non-finite input", std::numeric_limits<double>::infinity());
  }

  Eigen::PartialPivLU<CMatrix> lu(a);
  // The estimator is blind to an exactly zero pivot, so look at the pivots too.
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double pivot_ratio = pivots.maxCoeff() > 0.0 ? pivots.minCoeff() / pivots.maxCoeff() : 0.0;
  const double rcond = std::min(lu.rcond(), pivot_ratio);
  if (!(rcond * Tolerances::max_condition > 1.0)) {
    throw IllConditioned("hermitian_solve: system is numerically singular",
                         rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
  }
  CMatrix x = lu.solve(sys.b);
  const double norm_b = sys.b.norm();
  const double residual = (a * x - sys.b).norm();
  if (!x.allFinite() || !(residual <= Tolerances::solve_residual * std::max(norm_b, std::numeric_limits<double>::min()))) {
    throw IllConditioned("hermitian_solve: residual check failed", 1.0 / rcond);
  }
  return x;
}

/// Feasibility form { x : a_ub x <= b_ub, x >= 0 }.
struct LinearFeasibilityProblem {
  RMatrix a_ub;
  RVector b_ub;
};

struct FeasibilityResult {
  bool feasible = false;
  std::optional<RVector> witness;
  std::size_t pivots = 0;
};

/// Largest violation of a_ub x <= b_ub and x >= 0, each row measured relative
/// to max(1, |row|_inf).
inline double max_violation(const LinearFeasibilityProblem& prob, const RVector& x) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) worst = std::max(worst, -x[j]);
  const RVector lhs = prob.a_ub * x;
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    const double scale = std::max({1.0, prob.a_ub.row(i).cwiseAbs().maxCoeff(), std::abs(prob.b_ub[i])});
    worst = std::max(worst, (lhs[i] - prob.b_ub[i]) / scale);
  }
  return worst;
}

namespace detail {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row `rows` of `t` holds reduced costs, the last column the right-hand
/// side. Columns at or beyond `allowed` never enter the basis.
class Simplex {
 public:
  Simplex(Tableau& t, std::vector<Eigen::Index>& basis, std::size_t& pivots, std::size_t max_pivots)
      : t_(t), basis_(basis), pivots_(pivots), max_pivots_(max_pivots) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index rhs() const { return t_.cols() - 1; }

  void pivot(Eigen::Index leave, Eigen::Index enter) {
    if (++pivots_ > max_pivots_) throw CycleDetected("lp: pivot limit exceeded");
    t_.row(leave) /= t_(leave, enter);
    for (Eigen::Index i = 0; i <= rows(); ++i) {
      if (i == leave) continue;
      const double factor = t_(i, enter);
      if (factor != 0.0) t_.row(i) -= factor * t_.row(leave);
    }
    basis_[static_cast<std::size_t>(leave)] = enter;
  }

  /// Minimizes the objective row with Bland's rule. `done` is consulted
  /// before each pivot. Returns false when the objective is unbounded.
  template <class Done>
  bool minimize(Eigen::Index allowed, Done done) {
    while (!done()) {
      // A column whose reduced cost is negative only through rounding has no
      // positive pivot; it is skipped rather than reported as unbounded.
      Eigen::Index enter = -1;
      Eigen::Index leave = -1;
      bool unbounded = false;
      for (Eigen::Index j = 0; j < allowed && leave < 0; ++j) {
        if (!(t_(rows(), j) < -Tolerances::lp_pivot)) continue;
        leave = ratio_test(j);
        if (leave >= 0) enter = j;
        else if (t_(rows(), j) < -1e-6) unbounded = true;
      }
      if (enter < 0) return !unbounded;
      pivot(leave, enter);
    }
    return true;
  }

 private:
  Eigen::Index ratio_test(Eigen::Index col) const {
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double coef = t_(i, col);
      if (coef <= Tolerances::lp_pivot) continue;
      const double ratio = t_(i, rhs()) / coef;
      if (leave < 0) {
        best = ratio;
        leave = i;
        continue;
      }
      const double slack = 1e-14 * (1.0 + std::abs(best));
      if (ratio < best - slack) {
        best = ratio;
        leave = i;
      } else if (std::abs(ratio - best) <= slack &&
                 basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
        leave = i;
      }
    }
    return leave;
  }

  Tableau& t_;
  std::vector<Eigen::Index>& basis_;
  std::size_t& pivots_;
  std::size_t max_pivots_;
};

}  // namespace detail

/// Dense two-phase tableau simplex with Bland's rule.
///
/// Rows with a negative bound get an artificial variable; phase 1 drives the
/// sum of artificials to zero or proves it positive. Each row is scaled by its
/// largest coefficient before pivoting. When `objective` is given, phase 2
/// then maximizes objective^T x over the feasible set (the set must be bounded
/// in every direction the objective rewards). A feasible verdict always
/// carries a witness that passes max_violation() <= lp_witness.
inline FeasibilityResult lp_feasible(const LinearFeasibilityProblem& prob,
                                     const std::optional<RVector>& objective = std::nullopt) {
  const Eigen::Index rows = prob.a_ub.rows();
  const Eigen::Index n = prob.a_ub.cols();
  if (prob.b_ub.size() != rows) {
    throw std::invalid_argument("lp_feasible: bound vector length mismatch");
  }
  if (objective && objective->size() != n) {
    throw std::invalid_argument("lp_feasible: objective length mismatch");
  }
  if (!prob.a_ub.allFinite() || !prob.b_ub.allFinite()) {
    throw SolverFailure("lp_feasible: non-finite coefficients");
  }

  FeasibilityResult result;
  if (!objective && (prob.b_ub.array() >= 0.0).all()) {
    result.feasible = true;
    result.witness = RVector::Zero(n);
    return result;
  }

  std::vector<Eigen::Index> art_rows;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (prob.b_ub[i] < 0.0) art_rows.push_back(i);
  }
  const auto n_art = static_cast<Eigen::Index>(art_rows.size());
  // Columns: [x (n) | slack (rows) | artificial (n_art) | rhs]
  const Eigen::Index structural = n + rows;
  const Eigen::Index cols = structural + n_art;
  const Eigen::Index rhs = cols;
  // Row-major keeps the pivot row update contiguous.
  detail::Tableau t = detail::Tableau::Zero(rows + 1, cols + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));

  Eigen::Index next_art = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    double scale = std::max(prob.a_ub.row(i).cwiseAbs().maxCoeff(), std::abs(prob.b_ub[i]));
    if (scale == 0.0) scale = 1.0;
    const double sign = prob.b_ub[i] < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * prob.a_ub.row(i) / scale;
    t(i, n + i) = sign;
    t(i, rhs) = sign * prob.b_ub[i] / scale;
    if (sign < 0.0) {
      const Eigen::Index col = structural + next_art++;
      t(i, col) = 1.0;
      basis[static_cast<std::size_t>(i)] = col;
    } else {
      basis[static_cast<std::size_t>(i)] = n + i;
    }
  }
  // Reduced costs of the phase-1 objective (sum of artificials).
  for (Eigen::Index i : art_rows) t.row(rows) -= t.row(i);
  t.row(rows).segment(structural, n_art).setZero();

  const std::size_t max_pivots = 50 * static_cast<std::size_t>(rows + cols) + 1000;
  detail::Simplex simplex(t, basis, result.pivots, max_pivots);
  const double rhs_scale = 1.0 + t.col(rhs).head(rows).cwiseAbs().sum();
  const auto phase1_done = [&] { return -t(rows, rhs) <= Tolerances::lp_phase1 * rhs_scale; };
  // The phase-1 objective is bounded below by zero.
  if (!simplex.minimize(cols, phase1_done)) throw SolverFailure("lp_feasible: unbounded phase-1 direction");
  if (!phase1_done()) {
    result.feasible = false;
    return result;
  }

  if (objective && n_art > 0) {
    // Artificials still basic sit at zero; swap them for any structural
    // column of their row so phase 2 cannot raise them again. Rows with no
    // structural entry are redundant and keep their artificial at zero.
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (basis[static_cast<std::size_t>(i)] < structural) continue;
      Eigen::Index col = -1;
      t.row(i).head(structural).cwiseAbs().maxCoeff(&col);
      if (std::abs(t(i, col)) > Tolerances::lp_pivot) simplex.pivot(i, col);
    }
  }
  if (objective) {
    t.row(rows).setZero();
    t.row(rows).head(n) = -objective->transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index var = basis[static_cast<std::size_t>(i)];
      if (var < n && t(rows, var) != 0.0) t.row(rows) -= t(rows, var) * t.row(i);
    }
    if (!simplex.minimize(structural, [] { return false; })) {
      throw SolverFailure("lp_feasible: objective is unbounded");
    }
  }

  RVector x = RVector::Zero(n);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index var = basis[static_cast<std::size_t>(i)];
    if (var < n) x[var] = std::max(0.0, t(i, rhs));
  }
  if (max_violation(prob, x) > Tolerances::lp_witness) {
    throw SolverFailure("lp_feasible: witness fails constraint check");
  }
  result.feasible = true;
  result.witness = std::move(x);
  return result;
}

}  // namespace numerics
}  // namespace cellfree

#endif  // CELLFREE_NUMERICS_HPP
