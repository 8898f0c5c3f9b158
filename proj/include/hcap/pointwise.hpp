#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hcap/core.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"
#include "hcap/random.hpp"

namespace hcap {

/** \brief Minimize Tr(qA) over positive A with Tr(A) = a and Tr(SA) = b. */
struct PointwiseProblem {
  KreinOperator q;
  double a = 0;
  double b = 0;

  void validate(double tol = Tolerances{}.herm) const {
    if (!is_symmetric(q, tol)) throw InvalidInput("pointwise problem: q is not symmetric");
    if (!(b >= 0.0)) throw InfeasibleError("pointwise problem: b must be non-negative");
    if (std::abs(a) > b * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()))
      throw InfeasibleError("pointwise problem: |a| > b");
  }
};

/**
 * \brief How the minimizer was obtained.
 *
 * regular: simple lowest eigenvalue at the solving alpha. plateau: degenerate lowest eigenspace, mixed to hit a.
 * boundary: |a| = b > 0, the constraints coincide and alpha is set to 0. trivial: a = b = 0.
 */
enum class PointwiseBranch { regular, plateau, boundary, trivial };

inline const char* to_string(PointwiseBranch b) {
  switch (b) {
    case PointwiseBranch::regular: return "regular";
    case PointwiseBranch::plateau: return "plateau";
    case PointwiseBranch::boundary: return "boundary";
    case PointwiseBranch::trivial: return "trivial";
  }
  return "unknown";
}

struct PointwiseSolution {
  KreinOperator a;
  double alpha = 0;
  double beta = 0;
  double objective = 0;
  PointwiseBranch branch = PointwiseBranch::regular;
  /// ||A(q - alpha - beta S)||; zero up to rounding except possibly on the boundary branch.
  double annihilation_residual = 0;
};

namespace detail {

/** \brief S q, Hermitized. */
inline Matrix hat(const KreinOperator& q) { return hermitian_part(q.hermitian_form()); }

inline Matrix shifted_hat(const KreinOperator& q, double alpha) {
  return hat(q) - alpha * q.space().signature();
}

}  // namespace detail

/** \brief beta(alpha) = min spectrum of Sq - alpha S. */
inline double beta_of_alpha(const KreinOperator& q, double alpha) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::shifted_hat(q, alpha), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/** \brief a(alpha) with the lowest spectral projector of Sq - alpha S. */
struct AlphaResponse {
  double alpha = 0;
  double beta = 0;
  double a = 0;         ///< Tr(S F1) for a simple lowest eigenvalue, else the midpoint of [a_low, a_high]
  double a_low = 0;     ///< min spectrum of F1 S F1 on the lowest eigenspace
  double a_high = 0;    ///< max spectrum of F1 S F1 on the lowest eigenspace
  bool degenerate = false;
  Matrix projector;     ///< F1
  Matrix lowest_basis;  ///< orthonormal columns spanning the lowest eigenspace
  RealVector eigenvalues;
  Matrix eigenvectors;
};

inline AlphaResponse a_of_alpha(const KreinOperator& q, double alpha, double cluster_tol = 1e-12) {
  const SignatureSpace& space = q.space();
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::shifted_hat(q, alpha));
  const RealVector& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  Eigen::Index k = 1;
  while (k < ev.size() && ev(k) - ev(0) <= cluster_tol * scale) ++k;

  AlphaResponse r;
  r.alpha = alpha;
  r.beta = ev(0);
  r.eigenvalues = ev;
  r.eigenvectors = es.eigenvectors();
  r.lowest_basis = es.eigenvectors().leftCols(k);
  r.projector = r.lowest_basis * r.lowest_basis.adjoint();
  r.degenerate = k > 1;
  const Matrix compressed = hermitian_part(r.lowest_basis.adjoint() * space.apply_left(r.lowest_basis));
  Eigen::SelfAdjointEigenSolver<Matrix> cs(compressed, Eigen::EigenvaluesOnly);
  r.a_low = cs.eigenvalues()(0);
  r.a_high = cs.eigenvalues()(k - 1);
  r.a = r.degenerate ? 0.5 * (r.a_low + r.a_high) : r.a_low;
  return r;
}

/** \brief a'(alpha) = sum_{j>=2} 2/(l_j - l_1) Tr(S F1 S F_j) for a simple lowest eigenvalue. */
inline double a_derivative(const KreinOperator& q, double alpha) {
  const AlphaResponse r = a_of_alpha(q, alpha);
  if (r.degenerate) throw PreconditionError("a_derivative: lowest eigenvalue is degenerate");
  const SignatureSpace& space = q.space();
  const Matrix sf1s = space.apply_right(space.apply_left(r.projector));
  double out = 0.0;
  for (Eigen::Index j = 1; j < r.eigenvalues.size(); ++j) {
    const Vector v = r.eigenvectors.col(j);
    out += 2.0 / (r.eigenvalues(j) - r.eigenvalues(0)) * v.dot(sf1s * v).real();
  }
  return out;
}

/**
 * \brief Lowest spectral projector of Sq - alpha S by the resolvent contour integral.
 *
 * Trapezoidal rule on a circle around the lowest eigenvalue with radius half the spectral gap; converges
 * geometrically. Used as an independent check of the eigensolver path.
 */
inline Matrix projector_by_contour(const KreinOperator& q, double alpha, int nodes = 64) {
  const Matrix h = detail::shifted_hat(q, alpha);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  const RealVector& ev = es.eigenvalues();
  if (ev.size() < 2 || !(ev(1) > ev(0))) throw PreconditionError("contour projector needs a spectral gap");
  const double radius = 0.5 * (ev(1) - ev(0));
  const Eigen::Index dim = h.rows();
  Matrix sum = Matrix::Zero(dim, dim);
  for (int k = 0; k < nodes; ++k) {
    const Complex dir = std::polar(1.0, 2.0 * M_PI * k / nodes);
    const Complex z = ev(0) + radius * dir;
    const Matrix resolvent = (h - z * Matrix::Identity(dim, dim)).inverse();
    sum += dir * resolvent;  // dz = i r dir dtheta, prefactor -1/(2 pi i)
  }
  return -(radius / nodes) * sum;
}

namespace detail {

inline PointwiseSolution finish_solution(const PointwiseProblem& pb, const Matrix& a_hat, double alpha,
                                         double beta, PointwiseBranch branch) {
  const SignatureSpace& space = pb.q.space();
  const KreinOperator a(space, pb.b * space.apply_right(a_hat));
  PointwiseSolution s{a, alpha, beta, 0.0, branch, 0.0};
  s.objective = (pb.q.matrix() * a.matrix()).trace().real();
  const Eigen::Index dim = space.dimension();
  const Matrix residual = a.matrix() * (pb.q.matrix() - alpha * Matrix::Identity(dim, dim) - beta * space.signature());
  s.annihilation_residual = spectral_norm(residual);
  return s;
}

/** \brief Trace-one positive matrix on the lowest eigenspace with Tr(S Ahat) = target. */
inline Matrix mix_lowest(const AlphaResponse& r, const SignatureSpace& space, double target) {
  const Matrix compressed = hermitian_part(r.lowest_basis.adjoint() * space.apply_left(r.lowest_basis));
  Eigen::SelfAdjointEigenSolver<Matrix> cs(compressed);
  const Eigen::Index k = compressed.rows();
  const Vector low = r.lowest_basis * cs.eigenvectors().col(0);
  const Vector high = r.lowest_basis * cs.eigenvectors().col(k - 1);
  const double s_low = cs.eigenvalues()(0);
  const double s_high = cs.eigenvalues()(k - 1);
  const double theta = s_high > s_low ? std::clamp((s_high - target) / (s_high - s_low), 0.0, 1.0) : 1.0;
  return theta * low * low.adjoint() + (1.0 - theta) * high * high.adjoint();
}

}  // namespace detail

/**
 * \brief Solves the pointwise problem.
 *
 * b is normalized to 1; alpha is found by bisection on the monotone map a(alpha), and the answer is
 * A = b F1 S with beta = beta(alpha). A target inside a jump of a(alpha) is met by mixing the extreme
 * eigenvectors of F1 S F1 on the degenerate eigenspace.
 */
inline PointwiseSolution solve(const PointwiseProblem& pb) {
  pb.validate();
  const SignatureSpace& space = pb.q.space();
  const Eigen::Index dim = space.dimension();
  if (pb.b == 0.0) {
    return detail::finish_solution(pb, Matrix::Zero(dim, dim), 0.0, beta_of_alpha(pb.q, 0.0),
                                   PointwiseBranch::trivial);
  }
  const double target = std::clamp(pb.a / pb.b, -1.0, 1.0);

  if (1.0 - std::abs(target) <= 1e-14) {
    // Constraints coincide: A lives on the S = sign(a) block; the lowest block eigenvector minimizes.
    const int n = space.spin_dimension();
    const Matrix h = detail::hat(pb.q);
    const Eigen::Index offset = target > 0 ? 0 : n;
    Eigen::SelfAdjointEigenSolver<Matrix> bs(h.block(offset, offset, n, n));
    Vector v = Vector::Zero(dim);
    v.segment(offset, n) = bs.eigenvectors().col(0);
    return detail::finish_solution(pb, v * v.adjoint(), 0.0, bs.eigenvalues()(0), PointwiseBranch::boundary);
  }

  double width = 1.0 + 2.0 * detail::hat(pb.q).cwiseAbs().rowwise().sum().maxCoeff();
  double lo = -width, hi = width;
  for (int grow = 0; a_of_alpha(pb.q, lo).a_high >= target || a_of_alpha(pb.q, hi).a_low <= target; ++grow) {
    if (grow > 80) throw NumericalFailure("pointwise solve: could not bracket alpha");
    width *= 2.0;
    lo = -width;
    hi = width;
  }
  std::optional<AlphaResponse> hit;
  for (int iter = 0; iter < 400 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    AlphaResponse r = a_of_alpha(pb.q, mid);
    if (r.a_low > target) {
      hi = mid;
    } else if (r.a_high < target) {
      lo = mid;
    } else {
      hit = std::move(r);
      break;
    }
  }
  if (!hit) hit = a_of_alpha(pb.q, 0.5 * (lo + hi));
  if (hit->degenerate) {
    return detail::finish_solution(pb, detail::mix_lowest(*hit, space, target), hit->alpha, hit->beta,
                                   PointwiseBranch::plateau);
  }
  return detail::finish_solution(pb, hit->projector, hit->alpha, hit->beta, PointwiseBranch::regular);
}

/**
 * \brief Single-atom measure carrying a pointwise minimizer at momentum p.
 *
 * Paired with the constant field Qhat = q and targets c = a, f = b it satisfies the Euler-Lagrange
 * conditions with the solution's multipliers.
 */
inline OperatorMeasure stationary_fixture(const PointwiseSolution& s, const Momentum& p = Momentum::Zero(),
                                          MomentumBox box = {}) {
  return {s.a.space(), std::move(box), {{p, s.a}}};
}

/**
 * \brief Independent oracle: randomized projected descent over M with A = S M^dagger M.
 *
 * The constraints fix the squared Frobenius norms of the column blocks of M, (b+a)/2 and (b-a)/2,
 * so projection is a blockwise rescaling.
 */
inline double brute_force(const PointwiseProblem& pb, int samples, Rng& rng, int refine_steps = 400) {
  pb.validate();
  const SignatureSpace& space = pb.q.space();
  const int n = space.spin_dimension();
  const int dim = space.dimension();
  const double plus = 0.5 * (pb.b + pb.a), minus = 0.5 * (pb.b - pb.a);
  const Matrix qs = hermitian_part(space.apply_right(pb.q.matrix()));  // Tr(qA) = Tr(M (qS) M^dagger)
  const double step = 0.25 / std::max(spectral_norm(qs), 1e-300);

  auto project = [&](Matrix& m) {
    const double np = m.leftCols(n).norm(), nm = m.rightCols(n).norm();
    if (np > 0) m.leftCols(n) *= std::sqrt(plus) / np;
    if (nm > 0) m.rightCols(n) *= std::sqrt(minus) / nm;
  };
  auto objective = [&](const Matrix& m) { return (m * qs * m.adjoint()).trace().real(); };

  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Matrix m = random_matrix(dim, dim, rng);
    project(m);
    double value = objective(m);
    for (int it = 0; it < refine_steps; ++it) {
      Matrix trial = m - step * m * qs;
      project(trial);
      const double tv = objective(trial);
      if (!(tv < value)) break;
      m = std::move(trial);
      value = tv;
    }
    best = std::min(best, value);
  }
  return best;
}

/** \brief A multiplier pair, or the one-parameter family beta = intercept + slope * alpha, alpha in [min, max]. */
struct MultiplierSet {
  bool unique = true;
  double alpha = 0;
  double beta = 0;
  double beta_intercept = 0;
  double beta_slope = 0;
  double alpha_min = 0;
  double alpha_max = 0;
  double residual = 0;  ///< ||A(q - alpha - beta S)|| for the reported pair
  bool positive = false;  ///< whether q - alpha - beta S is positive for the reported pair
};

class NonUniqueMultipliers : public PreconditionError {
 public:
  NonUniqueMultipliers(const std::string& what, MultiplierSet family) : PreconditionError(what), family_(family) {}
  [[nodiscard]] const MultiplierSet& family() const noexcept { return family_; }

 private:
  MultiplierSet family_;
};

namespace detail {

inline double lowest_hermitian(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline bool shifted_positive(const KreinOperator& q, double alpha, double beta, double tol) {
  const Matrix h = shifted_hat(q, alpha) - beta * Matrix::Identity(q.space().dimension(), q.space().dimension());
  return lowest_hermitian(h) >= -tol * std::max(1.0, spectral_norm(h));
}

}  // namespace detail

/**
 * \brief Multipliers making A(q - alpha - beta S) = 0 with q - alpha - beta S positive.
 *
 * Under |Tr A| < Tr(SA), A and AS are independent and the pair is unique. Otherwise A = s A S with
 * s = sign(Tr A), only alpha + s beta is fixed, and positivity cuts the family to a half-line.
 */
inline MultiplierSet lagrange_from_point(const KreinOperator& q, const KreinOperator& a, bool strict,
                                         const Tolerances& tol = {}) {
  require_positive(a, "lagrange_from_point", tol.psd);
  const SignatureSpace& space = q.space();
  const double tr = a.trace(), str = a.signed_trace();
  const bool independent = std::abs(tr) < str * (1.0 - 1e-12);
  const Matrix aq = a.matrix() * q.matrix();
  const Matrix as = space.apply_right(a.matrix());
  MultiplierSet out;

  if (independent) {
    // Real least squares for aq = alpha A + beta AS.
    const Matrix& x1 = a.matrix();
    Eigen::Matrix2d gram;
    gram << x1.squaredNorm(), x1.cwiseProduct(as.conjugate()).sum().real(), 0, as.squaredNorm();
    gram(1, 0) = gram(0, 1);
    const Eigen::Vector2d rhs(x1.conjugate().cwiseProduct(aq).sum().real(), as.conjugate().cwiseProduct(aq).sum().real());
    const Eigen::Vector2d sol = gram.ldlt().solve(rhs);
    out.alpha = sol(0);
    out.beta = sol(1);
    out.residual = spectral_norm(aq - out.alpha * x1 - out.beta * as);
    out.positive = detail::shifted_positive(q, out.alpha, out.beta, tol.el);
    return out;
  }

  // A = s A S: A(q - alpha - beta S) = A q - (alpha + s beta) A.
  const double s = tr >= 0.0 ? 1.0 : -1.0;
  const double norm_a = a.matrix().squaredNorm();
  const double kappa = norm_a > 0.0 ? a.matrix().conjugate().cwiseProduct(aq).sum().real() / norm_a : 0.0;
  out.unique = false;
  out.beta_intercept = s * kappa;
  out.beta_slope = -s;
  // S(q - alpha - beta S) = (Sq - s kappa) - alpha (S - s): monotone in alpha, feasible set is a half-line.
  const double big = 1e6 * (1.0 + spectral_norm(q.matrix()));
  auto feasible = [&](double al) { return detail::shifted_positive(q, al, s * (kappa - al), tol.psd); };
  const double far = s > 0 ? big : -big;
  if (!feasible(far)) {
    out.alpha_min = std::numeric_limits<double>::quiet_NaN();
    out.alpha_max = std::numeric_limits<double>::quiet_NaN();
  } else {
    double inside = far, outside = -far;
    if (feasible(outside)) {
      inside = outside;
    } else {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (inside + outside);
        (feasible(mid) ? inside : outside) = mid;
      }
    }
    out.alpha_min = s > 0 ? inside : -std::numeric_limits<double>::infinity();
    out.alpha_max = s > 0 ? std::numeric_limits<double>::infinity() : inside;
    if (feasible(-far)) {
      out.alpha_min = -std::numeric_limits<double>::infinity();
      out.alpha_max = std::numeric_limits<double>::infinity();
    }
  }
  // Reported representative: alpha = 0 when admissible, else the finite end of the half-line.
  const double rep = (out.alpha_min <= 0.0 && 0.0 <= out.alpha_max) ? 0.0 : (s > 0 ? out.alpha_min : out.alpha_max);
  out.alpha = rep;
  out.beta = out.beta_intercept + out.beta_slope * rep;
  out.residual = spectral_norm(aq - kappa * a.matrix());
  out.positive = std::isfinite(rep) && feasible(rep);
  if (strict)
    throw NonUniqueMultipliers("multipliers are not unique: |Tr A| = Tr(SA)", out);
  return out;
}

/** \brief The closed interval of alpha_0 for which eigenvalues of q - beta S below (above) alpha_0 are negative (positive) type. */
struct AlphaInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/**
 * \brief The set of admissible alpha_0 for q - beta S, or nullopt when empty.
 *
 * Every eigenvalue that is not of positive type bounds alpha_0 from below, every eigenvalue not of
 * negative type bounds it from above. Type is read off the Gram matrix of the eigenspace.
 */
inline std::optional<AlphaInterval> admissible_alpha_set(const KreinOperator& q, double beta, double tol = 1e-9) {
  const SignatureSpace& space = q.space();
  const Matrix c = q.matrix() - beta * space.signature();
  Eigen::ComplexEigenSolver<Matrix> es(c);
  const Vector& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  AlphaInterval out;
  std::vector<bool> used(static_cast<size_t>(ev.size()), false);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (used[static_cast<size_t>(i)]) continue;
    if (std::abs(ev(i).imag()) > tol * scale) return std::nullopt;
    std::vector<Eigen::Index> cluster;
    for (Eigen::Index j = i; j < ev.size(); ++j)
      if (!used[static_cast<size_t>(j)] && std::abs(ev(j) - ev(i)) <= 1e-7 * scale) {
        cluster.push_back(j);
        used[static_cast<size_t>(j)] = true;
      }
    Matrix basis(c.rows(), static_cast<Eigen::Index>(cluster.size()));
    for (size_t k = 0; k < cluster.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(cluster[k]);
    // Orthonormalize to drop duplicate directions of defective clusters.
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-6);
    const Matrix span = Matrix(qr.householderQ()).leftCols(qr.rank());
    const Matrix gram = hermitian_part(span.adjoint() * space.apply_left(span));
    Eigen::SelfAdjointEigenSolver<Matrix> gs(gram, Eigen::EigenvaluesOnly);
    const bool positive_type = gs.eigenvalues().minCoeff() > tol;
    const bool negative_type = gs.eigenvalues().maxCoeff() < -tol;
    // A defective cluster has fewer eigenvectors than its multiplicity and is neither type.
    const bool defective = qr.rank() < static_cast<Eigen::Index>(cluster.size());
    const double value = ev(i).real();
    if (!positive_type || defective) out.lower = std::max(out.lower, value);
    if (!negative_type || defective) out.upper = std::min(out.upper, value);
  }
  if (out.lower > out.upper + tol * scale) return std::nullopt;
  return out;
}

}  // namespace hcap
