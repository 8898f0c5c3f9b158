#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hcap/pointwise.hpp"
#include "hcap/random.hpp"
#include "support.hpp"

using namespace hcap;
using hcap::oracle::mat2;

namespace {

const SignatureSpace kOne(1);

KreinOperator i_sigma2() { return {kOne, mat2(0, 1, -1, 0)}; }
KreinOperator signature_q() { return {kOne, kOne.signature()}; }

// Lowest eigenvalue of S q - alpha S from a general (non-Hermitian) eigensolver.
double lowest_by_general_solver(const KreinOperator& q, double alpha) {
  const Matrix h = q.space().apply_left(q.matrix()) - alpha * q.space().signature();
  return Eigen::ComplexEigenSolver<Matrix>(h).eigenvalues().real().minCoeff();
}

void expect_solution_invariants(const PointwiseProblem& pb, const PointwiseSolution& s, double tol) {
  const double scale = std::max(1.0, pb.q.norm());
  EXPECT_TRUE(is_positive(s.a, 1e-9));
  EXPECT_NEAR(s.a.trace(), pb.a, tol * std::max(1.0, pb.b));
  EXPECT_NEAR(s.a.signed_trace(), pb.b, tol * std::max(1.0, pb.b));
  const Eigen::Index dim = pb.q.space().dimension();
  const Matrix shifted =
      pb.q.matrix() - s.alpha * Matrix::Identity(dim, dim) - s.beta * pb.q.space().signature();
  EXPECT_LE(spectral_norm(s.a.matrix() * shifted), tol * scale * std::max(1.0, pb.b));
  EXPECT_TRUE(is_positive(KreinOperator(pb.q.space(), shifted), 1e-9));
  EXPECT_NEAR(s.objective, (pb.q.matrix() * s.a.matrix()).trace().real(), tol * scale * std::max(1.0, pb.b));
}

}  // namespace

TEST(BetaOfAlpha, PaperExamples) {
  EXPECT_NEAR(beta_of_alpha(i_sigma2(), 0.0), -1.0, 1e-14);
  EXPECT_NEAR(beta_of_alpha(signature_q(), 0.0), 1.0, 1e-14);
  for (double alpha : {-2.0, -0.3, 0.4, 1.7}) {
    EXPECT_NEAR(beta_of_alpha(i_sigma2(), alpha), -std::sqrt(1 + alpha * alpha), 1e-13);
    EXPECT_NEAR(beta_of_alpha(signature_q(), alpha), 1.0 - std::abs(alpha), 1e-13);
  }
}

TEST(BetaOfAlpha, MatchesGeneralEigensolver) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const KreinOperator q = random_symmetric(SignatureSpace(1 + trial % 2), rng);
    const double alpha = std::normal_distribution<double>()(rng);
    EXPECT_NEAR(beta_of_alpha(q, alpha), lowest_by_general_solver(q, alpha), 1e-10 * (1.0 + q.norm()));
  }
}

TEST(AOfAlpha, ExampleOneClosedForm) {
  for (double alpha : {-3.0, -0.5, 0.0, 0.25, 2.0}) {
    const AlphaResponse r = a_of_alpha(i_sigma2(), alpha);
    EXPECT_FALSE(r.degenerate);
    EXPECT_NEAR(r.a, alpha / std::sqrt(1 + alpha * alpha), 1e-13);
    EXPECT_NEAR(r.projector.trace().real(), 1.0, 1e-13);
  }
}

TEST(AOfAlpha, ExampleTwoStep) {
  for (double alpha : {-2.0, -1e-3, -1e-9}) EXPECT_NEAR(a_of_alpha(signature_q(), alpha).a, -1.0, 1e-12);
  for (double alpha : {1e-9, 1e-3, 2.0}) EXPECT_NEAR(a_of_alpha(signature_q(), alpha).a, 1.0, 1e-12);
  const AlphaResponse jump = a_of_alpha(signature_q(), 0.0);
  EXPECT_TRUE(jump.degenerate);
  EXPECT_NEAR(jump.a_low, -1.0, 1e-14);
  EXPECT_NEAR(jump.a_high, 1.0, 1e-14);
}

TEST(AOfAlpha, MonotoneOnRandomOperators) {
  Rng rng(42);
  for (int n : {1, 2}) {
    for (int trial = 0; trial < 100; ++trial) {
      const KreinOperator q = random_symmetric(SignatureSpace(n), rng);
      double previous = -2.0, previous_alpha = 0.0;
      for (int i = 0; i <= 200; ++i) {
        const double alpha = -10.0 + 0.1 * i;
        const AlphaResponse r = a_of_alpha(q, alpha);
        EXPECT_GE(r.a_low, previous - 1e-12) << "n=" << n << " trial=" << trial << " alpha=" << alpha;
        if (i > 0 && std::abs(previous) < 1.0 - 1e-6 && std::abs(r.a_low) < 1.0 - 1e-6) {
          EXPECT_GT(r.a_low, previous) << "not strict between " << previous_alpha << " and " << alpha;
        }
        previous = r.a_high;
        previous_alpha = alpha;
      }
    }
  }
}

TEST(AOfAlpha, DerivativeMatchesDifferences) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const KreinOperator q = random_symmetric(SignatureSpace(1 + trial % 2), rng);
    const double alpha = 0.5 * std::normal_distribution<double>()(rng);
    const double h = 1e-5;
    const double fd = (a_of_alpha(q, alpha + h).a - a_of_alpha(q, alpha - h).a) / (2 * h);
    EXPECT_NEAR(a_derivative(q, alpha), fd, 1e-5 * (1.0 + std::abs(fd)));
    EXPECT_GE(a_derivative(q, alpha), 0.0);
  }
  EXPECT_THROW(a_derivative(signature_q(), 0.0), PreconditionError);
}

TEST(AOfAlpha, ContourProjectorAgrees) {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const KreinOperator q = random_symmetric(SignatureSpace(1 + trial % 2), rng);
    const AlphaResponse r = a_of_alpha(q, 0.3);
    EXPECT_LT((projector_by_contour(q, 0.3) - r.projector).norm(), 1e-10);
  }
}

TEST(Solve, ExampleOne) {
  for (double a : {-0.9, -0.5, 0.0, 0.5, 0.6, 0.9}) {
    const PointwiseSolution s = solve({i_sigma2(), a, 1.0});
    const double root = std::sqrt(1 - a * a);
    EXPECT_NEAR(s.alpha, a / root, 1e-10);
    EXPECT_NEAR(s.beta, -1.0 / root, 1e-10);
    const Matrix expected = 0.5 * mat2(a + 1, root, -root, a - 1);
    EXPECT_LT((s.a.matrix() - expected).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(s.branch, PointwiseBranch::regular);
  }
}

TEST(Solve, ExampleOneScalesWithB) {
  const double a = 0.6, b = 2.0;
  const PointwiseSolution s = solve({i_sigma2(), a, b});
  const double root = std::sqrt(b * b - a * a);
  EXPECT_NEAR(s.alpha, a / root, 1e-10);
  EXPECT_NEAR(s.beta, -b / root, 1e-10);
  EXPECT_LT((s.a.matrix() - 0.5 * mat2(a + b, root, -root, a - b)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Solve, ExampleTwoObjectiveIsB) {
  for (double a : {-1.0, -0.4, 0.0, 0.7, 1.0}) {
    const PointwiseProblem pb{signature_q(), a, 1.0};
    const PointwiseSolution s = solve(pb);
    EXPECT_NEAR(s.objective, 1.0, 1e-12);
    expect_solution_invariants(pb, s, 1e-10);
  }
  const PointwiseSolution top = solve({signature_q(), 1.0, 1.0});
  EXPECT_EQ(top.branch, PointwiseBranch::boundary);
  EXPECT_NEAR(top.a(1, 1).real(), 0.0, 1e-14);
  EXPECT_NEAR(top.alpha + top.beta, 1.0, 1e-14);
  EXPECT_EQ(solve({signature_q(), 0.2, 1.0}).branch, PointwiseBranch::plateau);
}

TEST(Solve, TrivialAndInvalid) {
  const PointwiseSolution s = solve({i_sigma2(), 0.0, 0.0});
  EXPECT_EQ(s.branch, PointwiseBranch::trivial);
  EXPECT_EQ(s.a.matrix().norm(), 0.0);
  EXPECT_THROW(solve({i_sigma2(), 1.5, 1.0}), InfeasibleError);
  EXPECT_THROW(solve({i_sigma2(), 0.0, -1.0}), InfeasibleError);
  EXPECT_THROW(solve({KreinOperator(kOne, mat2(0, 1, 0, 0)), 0.0, 1.0}), InvalidInput);
}

TEST(Solve, InvariantsOnRandomProblems) {
  Rng rng(45);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const KreinOperator q = random_symmetric(SignatureSpace(1 + trial % 2), rng);
    const double b = 0.5 + std::abs(unit(rng));
    const PointwiseProblem pb{q, b * unit(rng), b};
    expect_solution_invariants(pb, solve(pb), 1e-9);
  }
}

TEST(Solve, AlphaOnBoundaryOfAdmissibleSet) {
  Rng rng(46);
  std::uniform_real_distribution<double> unit(-0.95, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    const KreinOperator q = random_symmetric(SignatureSpace(1 + trial % 2), rng);
    const PointwiseSolution s = solve({q, unit(rng), 1.0});
    const auto set = admissible_alpha_set(q, s.beta);
    ASSERT_TRUE(set.has_value()) << "trial " << trial;
    const double scale = 1e-6 * (1.0 + q.norm());
    EXPECT_TRUE(std::abs(s.alpha - set->lower) < scale || std::abs(s.alpha - set->upper) < scale)
        << "alpha " << s.alpha << " set [" << set->lower << ", " << set->upper << "]";
  }
  const auto example = admissible_alpha_set(i_sigma2(), -1.0);
  ASSERT_TRUE(example.has_value());
  EXPECT_NEAR(example->lower, 0.0, 1e-7);
  EXPECT_NEAR(example->upper, 0.0, 1e-7);
}

TEST(BruteForce, AgreesWithSolve) {
  Rng rng(47);
  std::uniform_real_distribution<double> unit(-0.9, 0.9);
  for (int trial = 0; trial < 20; ++trial) {
    const KreinOperator q = random_symmetric(kOne, rng);
    const PointwiseProblem pb{q, unit(rng), 1.0};
    const double exact = solve(pb).objective;
    const double sampled = brute_force(pb, 8, rng);
    EXPECT_LE(exact, sampled + 1e-9);
    EXPECT_NEAR(sampled, exact, 1e-4);
  }
  EXPECT_NEAR(brute_force({signature_q(), 0.3, 1.0}, 4, rng), 1.0, 1e-10);
}

TEST(LagrangeFromPoint, ExampleOneStrict) {
  const PointwiseSolution s = solve({i_sigma2(), 0.0, 1.0});
  const MultiplierSet m = lagrange_from_point(i_sigma2(), s.a, true);
  EXPECT_TRUE(m.unique);
  EXPECT_NEAR(m.alpha, 0.0, 1e-12);
  EXPECT_NEAR(m.beta, -1.0, 1e-12);
  EXPECT_TRUE(m.positive);
}

TEST(LagrangeFromPoint, ExampleTwoFamily) {
  const PointwiseSolution s = solve({signature_q(), 1.0, 1.0});
  try {
    lagrange_from_point(signature_q(), s.a, true);
    FAIL() << "expected NonUniqueMultipliers";
  } catch (const NonUniqueMultipliers& e) {
    const MultiplierSet& f = e.family();
    EXPECT_FALSE(f.unique);
    EXPECT_NEAR(f.beta_intercept, 1.0, 1e-12);
    EXPECT_NEAR(f.beta_slope, -1.0, 1e-12);
    EXPECT_NEAR(f.alpha_min, 0.0, 1e-9);
    EXPECT_TRUE(std::isinf(f.alpha_max));
  }
  const MultiplierSet loose = lagrange_from_point(signature_q(), s.a, false);
  EXPECT_NEAR(loose.alpha, 0.0, 1e-9);
  EXPECT_NEAR(loose.beta, 1.0, 1e-9);
  EXPECT_TRUE(loose.positive);
}

TEST(LagrangeFromPoint, RoundTripOnRandomStrictInstances) {
  Rng rng(48);
  std::uniform_real_distribution<double> unit(-0.9, 0.9);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const KreinOperator q = random_symmetric(kOne, rng);
    const PointwiseSolution s = solve({q, unit(rng), 1.0});
    if (!(std::abs(s.a.trace()) < s.a.signed_trace() * (1.0 - 1e-9))) continue;
    const MultiplierSet m = lagrange_from_point(q, s.a, true);
    EXPECT_NEAR(m.alpha, s.alpha, 1e-8 * (1.0 + std::abs(s.alpha)));
    EXPECT_NEAR(m.beta, s.beta, 1e-8 * (1.0 + std::abs(s.beta)));
    ++checked;
  }
  EXPECT_GT(checked, 90);
}

TEST(LagrangeFromPoint, RejectsNonPositive) {
  EXPECT_THROW(lagrange_from_point(i_sigma2(), KreinOperator(kOne, mat2(-1, 0, 0, 0)), false), PreconditionError);
}
