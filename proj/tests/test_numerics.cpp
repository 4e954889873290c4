#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "cellfree/errors.hpp"
#include "cellfree/numerics.hpp"

using namespace cellfree;
using numerics::LinearFeasibilityProblem;

namespace {

CMatrix random_complex(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  CMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = {nd(rng), nd(rng)};
  return m;
}

// Exhaustive oracle for a 3-variable problem: the region {a x <= b, x >= 0}
// is pointed, so it is non-empty iff one of its basic solutions is feasible.
struct VertexOracle {
  bool feasible = false;
  double best_objective = -std::numeric_limits<double>::infinity();
};

VertexOracle enumerate_vertices(const LinearFeasibilityProblem& p, const RVector& c) {
  const Eigen::Index n = p.a_ub.cols();
  const Eigen::Index rows = p.a_ub.rows();
  RMatrix all(rows + n, n);
  RVector rhs(rows + n);
  all.topRows(rows) = p.a_ub;
  rhs.head(rows) = p.b_ub;
  all.bottomRows(n) = -RMatrix::Identity(n, n);
  rhs.tail(n).setZero();
  VertexOracle out;
  const Eigen::Index total = rows + n;
  for (Eigen::Index i = 0; i < total; ++i)
    for (Eigen::Index j = i + 1; j < total; ++j)
      for (Eigen::Index k = j + 1; k < total; ++k) {
        RMatrix a(3, 3);
        a << all.row(i), all.row(j), all.row(k);
        Eigen::FullPivLU<RMatrix> lu(a);
        if (lu.rank() < 3) continue;
        const RVector x = lu.solve(RVector((RVector(3) << rhs[i], rhs[j], rhs[k]).finished()));
        if (((all * x - rhs).array() <= 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff())).all()) {
          out.feasible = true;
          out.best_objective = std::max(out.best_objective, c.dot(x));
        }
      }
  return out;
}

}  // namespace

TEST(HermitianSolve, IdentityReturnsRightHandSide) {
  std::mt19937_64 rng(1);
  const CMatrix b = random_complex(4, 2, rng);
  const CMatrix x = numerics::hermitian_solve({CMatrix::Identity(4, 4), b});
  EXPECT_LT((x - b).norm(), 1e-14);
}

TEST(HermitianSolve, ScaledIdentity) {
  const CMatrix x = numerics::hermitian_solve({2.0 * CMatrix::Identity(3, 3), CMatrix::Identity(3, 3)});
  EXPECT_LT((x - 0.5 * CMatrix::Identity(3, 3)).norm(), 1e-15);
}

TEST(HermitianSolve, RandomWellConditionedResidual) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const CMatrix g = random_complex(8, 8, rng);
    const CMatrix a = g * g.adjoint() + CMatrix::Identity(8, 8);
    const CMatrix b = random_complex(8, 3, rng);
    const CMatrix x = numerics::hermitian_solve({a, b});
    EXPECT_LE((a * x - b).norm(), 1e-8 * b.norm());
  }
}

TEST(HermitianSolve, IndefiniteSystemIsSolved) {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -3.0;
  a(0, 1) = cdouble(0.5, 0.25);
  a(1, 0) = std::conj(a(0, 1));
  const CMatrix b = CMatrix::Identity(2, 2);
  const CMatrix x = numerics::hermitian_solve({a, b});
  EXPECT_LT((a * x - b).norm(), 1e-12);
}

TEST(HermitianSolve, RejectsNonHermitian) {
  CMatrix a = CMatrix::Identity(2, 2);
  a(0, 1) = 1.0;
  EXPECT_THROW(numerics::hermitian_solve({a, CMatrix::Identity(2, 2)}), std::invalid_argument);
}

TEST(HermitianSolve, SingularCarriesConditionEstimate) {
  CMatrix a = CMatrix::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  try {
    numerics::hermitian_solve({a, CMatrix::Identity(3, 3)});
    FAIL() << "expected IllConditioned";
  } catch (const IllConditioned& e) {
    EXPECT_GT(e.condition(), Tolerances::max_condition);
  }
}

TEST(LpFeasible, SingleUpperBoundHasZeroWitness) {
  LinearFeasibilityProblem p{RMatrix::Ones(1, 1), RVector::Ones(1)};
  const auto r = numerics::lp_feasible(p);
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ((*r.witness)[0], 0.0);
}

TEST(LpFeasible, ContradictoryBoundsAreInfeasible) {
  LinearFeasibilityProblem p;
  p.a_ub = RMatrix(2, 1);
  p.a_ub << -1.0, 1.0;
  p.b_ub = RVector(2);
  p.b_ub << -1.0, 0.5;
  const auto r = numerics::lp_feasible(p);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.witness.has_value());
}

TEST(LpFeasible, NonFiniteInputIsSolverFailure) {
  LinearFeasibilityProblem p{RMatrix::Ones(1, 1), RVector::Constant(1, std::nan(""))};
  EXPECT_THROW(numerics::lp_feasible(p), SolverFailure);
}

TEST(LpFeasible, MatchesVertexEnumerationOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> rows_dist(2, 7);
  int feasible_count = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const int rows = rows_dist(rng);
    LinearFeasibilityProblem p{RMatrix(rows, 3), RVector(rows)};
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < 3; ++j) p.a_ub(i, j) = nd(rng);
      p.b_ub[i] = nd(rng);
    }
    // A box keeps every instance bounded so the objective oracle is defined.
    LinearFeasibilityProblem boxed{RMatrix(rows + 1, 3), RVector(rows + 1)};
    boxed.a_ub << p.a_ub, RMatrix::Ones(1, 3);
    boxed.b_ub << p.b_ub, 10.0;

    const RVector c = RVector::Random(3);
    const auto oracle = enumerate_vertices(boxed, c);
    const auto verdict = numerics::lp_feasible(boxed);
    ASSERT_EQ(verdict.feasible, oracle.feasible) << "instance " << rep;
    if (!verdict.feasible) continue;
    ++feasible_count;
    EXPECT_LE(numerics::max_violation(boxed, *verdict.witness), Tolerances::lp_witness);

    const auto best = numerics::lp_feasible(boxed, c);
    ASSERT_TRUE(best.feasible);
    EXPECT_NEAR(c.dot(*best.witness), oracle.best_objective, 1e-8 * (1.0 + std::abs(oracle.best_objective)))
        << "instance " << rep;
  }
  EXPECT_GT(feasible_count, 30);
  EXPECT_LT(feasible_count, 290);
}

TEST(LpFeasible, DegenerateRowsTerminate) {
  // Many copies of the same constraint exercise the tie-breaking rule.
  LinearFeasibilityProblem p{RMatrix(6, 2), RVector(6)};
  for (int i = 0; i < 6; ++i) {
    p.a_ub.row(i) << -1.0, -1.0;
    p.b_ub[i] = -1.0;
  }
  const auto r = numerics::lp_feasible(p, RVector(RVector::Zero(2)));
  ASSERT_TRUE(r.feasible);
  EXPECT_GE(r.witness->sum(), 1.0 - 1e-12);
}

TEST(LpFeasible, IsDeterministic) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  LinearFeasibilityProblem p{RMatrix(6, 3), RVector(6)};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j) p.a_ub(i, j) = nd(rng);
    p.b_ub[i] = nd(rng) + 0.5;
  }
  const auto a = numerics::lp_feasible(p);
  const auto b = numerics::lp_feasible(p);
  ASSERT_EQ(a.feasible, b.feasible);
  EXPECT_EQ(a.pivots, b.pivots);
  if (a.feasible) {
    EXPECT_EQ(*a.witness, *b.witness);
  }
}

TEST(LpFeasible, UnboundedObjectiveIsReported) {
  LinearFeasibilityProblem p{RMatrix(1, 2), RVector(1)};
  p.a_ub << 1.0, 0.0;
  p.b_ub << 1.0;
  EXPECT_THROW(numerics::lp_feasible(p, RVector(RVector::Ones(2))), SolverFailure);
}
