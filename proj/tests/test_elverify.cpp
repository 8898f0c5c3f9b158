#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hcap/elverify.hpp"
#include "hcap/pointwise.hpp"
#include "hcap/random.hpp"
#include "support.hpp"

using namespace hcap;
using hcap::oracle::mat2;

namespace {

const SignatureSpace kOne(1);

KreinOperator i_sigma2() { return {kOne, mat2(0, 1, -1, 0)}; }

QhatEvaluator constant(const KreinOperator& q) {
  return [q](const Momentum&) { return q; };
}

// S G^dagger G with the positive block weighted up, so that 0 < Tr < Tr S.
KreinOperator tilted_positive(const SignatureSpace& space, Rng& rng) {
  Matrix g = random_matrix(space.dimension(), space.dimension(), rng);
  g.leftCols(space.spin_dimension()) *= 3.0;
  return {space, space.apply_left(g.adjoint() * g)};
}

KreinOperator block_scaled(const KreinOperator& t, double s1, double s2) {
  const int n = t.space().spin_dimension();
  RealVector d(2 * n);
  d.head(n).setConstant(1.0 + s1);
  d.tail(n).setConstant(1.0 + s2);
  const Matrix dm = d.cast<Complex>().asDiagonal();
  return {t.space(), dm * t.matrix() * dm};
}

}  // namespace

TEST(Pushforward, CarriesAtomsAndPairings) {
  Rng rng(31);
  const OperatorMeasure nu = random_measure(SignatureSpace(2), MomentumBox{}, 4, rng);
  const KreinOperator q = random_symmetric(nu.space(), rng);
  const PushforwardMeasure mu = pushforward(nu, constant(q));
  ASSERT_EQ(mu.atoms.size(), nu.size());
  EXPECT_LT((mu.total(nu.space()).matrix() - total_operator(nu).matrix()).norm(), 1e-12);
  double pairing = 0.0, anti = 0.0;
  const Matrix s = nu.space().signature();
  for (const Atom& atom : nu.atoms()) {
    pairing += (q.matrix() * atom.a.matrix()).trace().real();
    anti += (0.5 * (q.matrix() * s + s * q.matrix()) * atom.a.matrix()).trace().real();
  }
  EXPECT_NEAR(mu.pairing(), pairing, 1e-12 * std::abs(pairing) + 1e-12);
  EXPECT_NEAR(mu.anticommutator_pairing(), anti, 1e-12 * std::abs(anti) + 1e-12);
}

TEST(Kappa, CaseAByHand) {
  // Tr A = 2, c = 1.
  const KreinOperator a(kOne, mat2(2, 0, 0, 0));
  const Kappa k = kappa_coefficients(ConstraintCase::a, a, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(k.kappa1, -1.0);
  EXPECT_DOUBLE_EQ(k.kappa2, -1.0);
  EXPECT_THROW(kappa_coefficients(ConstraintCase::a, a, 2.0, 1.0), InvalidInput);
}

TEST(Kappa, PreservesConstraintsToFirstOrder) {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const SignatureSpace space(1 + trial % 2);
    const KreinOperator total = tilted_positive(space, rng);
    const double c = total.trace(), f = total.signed_trace();
    ASSERT_GT(c, 0.0);
    ASSERT_LT(c, f);
    const KreinOperator a = random_positive(space, rng);
    for (ConstraintCase which : {ConstraintCase::a, ConstraintCase::b}) {
      const Kappa k = kappa_coefficients(which, a, c, f);
      auto family = [&](double t) { return block_scaled(total, k.kappa1 * t, k.kappa2 * t) + t * a; };
      const double h = 1e-5;
      const KreinOperator plus = family(h), minus = family(-h);
      const double scale = std::abs(a.trace()) + a.signed_trace() + f;
      EXPECT_NEAR((plus.trace() - minus.trace()) / (2 * h), 0.0, 1e-8 * scale);
      if (which == ConstraintCase::b) {
        EXPECT_NEAR((plus.signed_trace() - minus.signed_trace()) / (2 * h), 0.0, 1e-8 * scale);
      }
    }
  }
}

TEST(LagrangeParameters, CaseASingleAtomIdentity) {
  Rng rng(33);
  const KreinOperator a = tilted_positive(kOne, rng);
  const KreinOperator identity(kOne, Matrix::Identity(2, 2));
  const OperatorMeasure nu(kOne, MomentumBox{}, {{Momentum::Zero(), a}});
  const double c = a.trace();
  const LagrangeParameters lp = lagrange_parameters(pushforward(nu, constant(identity)), kOne, c, 2.0 * a.signed_trace());
  EXPECT_EQ(lp.which, ConstraintCase::a);
  EXPECT_NEAR(lp.alpha, 1.0, 1e-14);
  EXPECT_EQ(lp.beta, 0.0);
}

TEST(LagrangeParameters, CaseBClosedForm) {
  // Tr = 1, Tr S = 2, so c = 1, f = 2 and the denominator is 3.
  const KreinOperator a(kOne, mat2(1.5, 0.3, -0.3, -0.5));
  ASSERT_TRUE(is_positive(a));
  const OperatorMeasure nu(kOne, MomentumBox{}, {{Momentum::Zero(), a}});
  const KreinOperator q(kOne, mat2(0.7, 0.2, -0.2, 0.1));
  const double t1 = (q.matrix() * a.matrix()).trace().real();
  const Matrix s = kOne.signature();
  const double t2 = (0.5 * (q.matrix() * s + s * q.matrix()) * a.matrix()).trace().real();
  const LagrangeParameters lp = lagrange_parameters(pushforward(nu, constant(q)), kOne, 1.0, 2.0);
  EXPECT_EQ(lp.which, ConstraintCase::b);
  EXPECT_NEAR(lp.alpha, (2.0 * t2 - t1) / 3.0, 1e-14);
  EXPECT_NEAR(lp.beta, (2.0 * t1 - t2) / 3.0, 1e-14);
  EXPECT_THROW(lagrange_parameters(pushforward(nu, constant(q)), kOne, 1.0, 1.5), InfeasibleError);
}

TEST(ElResiduals, StationaryFixtureFromPointwise) {
  for (double target : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
    const PointwiseSolution sol = solve({i_sigma2(), target, 1.0});
    if (target <= 0.0) {
      // The constraint targets must satisfy 0 < c < f; check the residuals with the solution's multipliers directly.
      const ELReport r = el_residuals(stationary_fixture(sol), constant(i_sigma2()), sol.alpha, sol.beta,
                                      {Momentum::Zero()});
      EXPECT_LE(r.max_relative_residual(), 1e-12);
      EXPECT_GE(r.min_relative_margin(), -1e-12);
      continue;
    }
    const ELReport r = verify_el(stationary_fixture(sol), constant(i_sigma2()), target, 1.0, {Momentum::Zero()});
    EXPECT_EQ(r.which, ConstraintCase::b);
    EXPECT_NEAR(r.alpha, sol.alpha, 1e-10);
    EXPECT_NEAR(r.beta, sol.beta, 1e-10);
    EXPECT_LE(r.max_relative_residual(), 1e-12);
    EXPECT_GE(r.min_relative_margin(), -1e-12);
    EXPECT_TRUE(beta_sign_check(r));
    EXPECT_EQ(r.action, 0.0);
  }
}

TEST(ElResiduals, PerturbationGrowsLinearly) {
  const PointwiseSolution sol = solve({i_sigma2(), 0.5, 1.0});
  Rng rng(34);
  const KreinOperator e = random_positive(kOne, rng);
  std::vector<double> eps{1e-2, 1e-3, 1e-4}, res;
  for (double x : eps) {
    const OperatorMeasure nu(kOne, MomentumBox{}, {{Momentum::Zero(), sol.a + x * e}});
    const ELReport r = el_residuals(nu, constant(i_sigma2()), sol.alpha, sol.beta, {});
    res.push_back(std::max(r.residuals[0].left, r.residuals[0].right));
  }
  EXPECT_NEAR(oracle::log_log_slope(eps, res), 1.0, 0.02);
}

TEST(ElResiduals, BothSidedProductsAgreeInNorm) {
  Rng rng(35);
  const OperatorMeasure nu = random_measure(SignatureSpace(2), MomentumBox{}, 3, rng);
  const KreinOperator q = random_symmetric(nu.space(), rng);
  const ELReport r = el_residuals(nu, constant(q), 0.3, -0.2, nu.box().grid_points());
  ASSERT_EQ(r.residuals.size(), 3u);
  for (const auto& s : r.residuals) EXPECT_NEAR(s.left, s.right, 1e-12 * (1.0 + s.left));
}

TEST(SupportGap, HandExamples) {
  EXPECT_EQ(support_gap(KreinOperator::zero(kOne)), 0.0);
  // S B = diag(2, 0): positive with a kernel.
  EXPECT_EQ(support_gap(KreinOperator(kOne, mat2(2, 0, 0, 0))), 0.0);
  // B = diag(2, -0.5): spectral points 2 (positive type) and -0.5 (negative type).
  EXPECT_NEAR(support_gap(KreinOperator(kOne, mat2(2, 0, 0, -0.5))), 0.5, 1e-14);
  // S B = diag(1, -1) is indefinite.
  EXPECT_EQ(support_gap(KreinOperator(kOne, mat2(1, 0, 0, 1))), 0.0);
}

TEST(SupportGap, MatchesShiftCriterion) {
  // g is the largest t with B - t and B + t both positive; check by direct scan.
  Rng rng(36);
  for (int trial = 0; trial < 30; ++trial) {
    const KreinOperator b = random_positive(SignatureSpace(1 + trial % 2), rng);
    const double g = support_gap(b);
    const Eigen::Index dim = b.space().dimension();
    auto positive_shift = [&](double t) {
      return is_positive(KreinOperator(b.space(), b.matrix() - t * Matrix::Identity(dim, dim)), 1e-12) &&
             is_positive(KreinOperator(b.space(), b.matrix() + t * Matrix::Identity(dim, dim)), 1e-12);
    };
    EXPECT_TRUE(positive_shift(0.999 * g));
    EXPECT_FALSE(positive_shift(1.001 * g + 1e-12));
  }
}

TEST(BetaSign, Check) {
  ELReport r;
  r.beta = -1.0;
  EXPECT_TRUE(beta_sign_check(r));
  r.beta = 0.0;
  EXPECT_TRUE(beta_sign_check(r));
  r.beta = 0.1;
  EXPECT_FALSE(beta_sign_check(r));
}

TEST(VerifyEl, GradientFieldReportIsComplete) {
  Rng rng(37);
  MomentumBox box;
  box.grid_shape = {2, 1, 1, 1};
  const OperatorMeasure nu = random_measure(kOne, box, 2, rng);
  const GradientField field(nu, PositionGrid(2.0, 3));
  const KreinOperator total = total_operator(nu);
  const double c = total.trace() > 0 ? total.trace() : 1.0;
  const double f = 2.0 * total.signed_trace() + 2.0 * std::abs(c);
  const ELReport r = verify_el(nu, field, c, f, box.grid_points());
  EXPECT_EQ(r.probes.size(), 2u);
  EXPECT_EQ(r.residuals.size(), 2u);
  EXPECT_EQ(r.action, field.action());
  EXPECT_EQ(r.which, ConstraintCase::a);
  EXPECT_NEAR(r.constraints.mod_dim, total.signed_trace(), 1e-12 * f);
  std::ostringstream csv;
  write_probe_csv(csv, r);
  EXPECT_EQ(csv.str().rfind("p0,p1,p2,p3,g,psd_margin\n", 0), 0u);
}
