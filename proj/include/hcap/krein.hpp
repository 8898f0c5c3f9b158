#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hcap/core.hpp"

namespace hcap {

/** \brief Indefinite inner product space of signature (n,n) in a pseudo-orthonormal basis. */
class SignatureSpace {
 public:
  explicit SignatureSpace(int spin_dimension) : n_(spin_dimension) {
    if (spin_dimension < 1) throw InvalidInput("spin dimension must be positive");
  }

  [[nodiscard]] int spin_dimension() const noexcept { return n_; }
  [[nodiscard]] int dimension() const noexcept { return 2 * n_; }
  [[nodiscard]] double sign(int index) const noexcept { return index < n_ ? 1.0 : -1.0; }

  [[nodiscard]] RealVector signs() const {
    RealVector s(dimension());
    for (int i = 0; i < dimension(); ++i) s(i) = sign(i);
    return s;
  }

  [[nodiscard]] Matrix signature() const { return signs().cast<Complex>().asDiagonal(); }

  /** \brief S * m without forming S. */
  [[nodiscard]] Matrix apply_left(const Matrix& m) const {
    Matrix out = m;
    out.bottomRows(n_) *= -1.0;
    return out;
  }

  /** \brief m * S without forming S. */
  [[nodiscard]] Matrix apply_right(const Matrix& m) const {
    Matrix out = m;
    out.rightCols(n_) *= -1.0;
    return out;
  }

  /** \brief Adjoint with respect to the indefinite inner product, S m^dagger S. */
  [[nodiscard]] Matrix adjoint(const Matrix& m) const { return apply_right(apply_left(m.adjoint())); }

  [[nodiscard]] Complex inner(const Vector& u, const Vector& v) const {
    Vector sv = v;
    sv.tail(n_) *= -1.0;
    return u.dot(sv);
  }

  friend bool operator==(const SignatureSpace& a, const SignatureSpace& b) { return a.n_ == b.n_; }

 private:
  int n_;
};

/** \brief Linear operator on a signature space. */
class KreinOperator {
 public:
  KreinOperator(SignatureSpace space, Matrix entries) : space_(space), m_(std::move(entries)) {
    if (m_.rows() != space_.dimension() || m_.cols() != space_.dimension())
      throw InvalidInput("operator size " + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) +
                         " does not match space dimension " + std::to_string(space_.dimension()));
  }

  static KreinOperator zero(SignatureSpace space) {
    return {space, Matrix::Zero(space.dimension(), space.dimension())};
  }

  [[nodiscard]] const SignatureSpace& space() const noexcept { return space_; }
  [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
  [[nodiscard]] Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  [[nodiscard]] KreinOperator adjoint() const { return {space_, space_.adjoint(m_)}; }
  /** \brief The matrix S*A, Hermitian exactly when the operator is symmetric. */
  [[nodiscard]] Matrix hermitian_form() const { return space_.apply_left(m_); }
  [[nodiscard]] double trace() const { return m_.trace().real(); }
  [[nodiscard]] double signed_trace() const { return hermitian_form().trace().real(); }
  [[nodiscard]] double norm() const { return spectral_norm(m_); }

  KreinOperator& operator+=(const KreinOperator& o) {
    check_same_space(o);
    m_ += o.m_;
    return *this;
  }
  KreinOperator& operator-=(const KreinOperator& o) {
    check_same_space(o);
    m_ -= o.m_;
    return *this;
  }
  KreinOperator& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  friend KreinOperator operator+(KreinOperator a, const KreinOperator& b) { return a += b; }
  friend KreinOperator operator-(KreinOperator a, const KreinOperator& b) { return a -= b; }
  friend KreinOperator operator*(double s, KreinOperator a) { return a *= s; }
  friend KreinOperator operator*(const KreinOperator& a, const KreinOperator& b) {
    a.check_same_space(b);
    return {a.space_, a.m_ * b.m_};
  }

 private:
  void check_same_space(const KreinOperator& o) const {
    if (!(space_ == o.space_)) throw InvalidInput("operators live on different spaces");
  }

  SignatureSpace space_;
  Matrix m_;
};

namespace detail {

inline double psd_threshold(const Matrix& hermitian, double tol) { return tol * spectral_norm(hermitian); }

/** \brief Principal square root of a Hermitian positive semi-definite matrix, negative noise clipped. */
inline Matrix hermitian_sqrt(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(hermitian));
  RealVector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/** \brief True iff S*A is Hermitian up to tol relative to its norm. */
inline bool is_symmetric(const KreinOperator& a, double tol = Tolerances{}.herm) {
  const Matrix h = a.hermitian_form();
  const double scale = std::max(spectral_norm(h), std::numeric_limits<double>::min());
  return spectral_norm(h - h.adjoint()) <= 2.0 * tol * scale;
}

/**
 * \brief Positivity test: S*A symmetric and positive semi-definite.
 *
 * The lowest eigenvalue of the Hermitian part must exceed -tol times the norm. Symmetry is required
 * as well, since a real form u -> <u|Au> on a complex space forces S*A to be Hermitian.
 */
inline bool is_positive(const KreinOperator& a, double tol = Tolerances{}.psd) {
  if (!is_symmetric(a, tol)) return false;
  const Matrix h = hermitian_part(a.hermitian_form());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -detail::psd_threshold(h, tol);
}

inline void require_positive(const KreinOperator& a, const char* what, double tol = Tolerances{}.psd) {
  if (!is_positive(a, tol)) throw PreconditionError(std::string(what) + ": operator is not positive");
}

/** \brief M with A = S M^dagger M; M is the principal square root of S*A. */
inline Matrix psd_factorize(const KreinOperator& a, double tol = Tolerances{}.psd) {
  require_positive(a, "psd_factorize", tol);
  return detail::hermitian_sqrt(a.hermitian_form());
}

/** \brief Spectral parts of a positive operator. */
struct SpectralSplit {
  KreinOperator plus;
  KreinOperator zero;
  KreinOperator minus;
  RealVector eigenvalues;  ///< ascending, algebraic multiplicity
};

/**
 * \brief Splits a positive operator into its strictly positive, zero and strictly negative spectral parts.
 *
 * With A = S M^dagger M, the nonzero spectrum of A agrees with that of the Hermitian matrix K = M S M^dagger,
 * and an eigenvector w of K yields the eigenvector S M^dagger w of A. Each part is S M^dagger P M for the
 * corresponding spectral projector P of K, so the parts are positive, commute with A, and may carry the
 * non-diagonalizable structure only in the zero part.
 */
inline SpectralSplit spectral_split(const KreinOperator& a, const Tolerances& tol = {}) {
  require_positive(a, "spectral_split", tol.psd);
  const SignatureSpace& space = a.space();
  const Matrix m = detail::hermitian_sqrt(a.hermitian_form());
  const Matrix k = hermitian_part(m * space.apply_left(m.adjoint()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  const RealVector& mu = es.eigenvalues();
  const double scale = mu.cwiseAbs().maxCoeff();
  const double cut = tol.zero * scale;

  const Eigen::Index dim = space.dimension();
  Matrix p_plus = Matrix::Zero(dim, dim);
  Matrix p_zero = Matrix::Zero(dim, dim);
  Matrix p_minus = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Vector w = es.eigenvectors().col(i);
    Matrix& target = mu(i) > cut ? p_plus : (mu(i) < -cut ? p_minus : p_zero);
    target += w * w.adjoint();
  }
  const Matrix smd = space.apply_left(m.adjoint());
  return {KreinOperator(space, smd * p_plus * m), KreinOperator(space, smd * p_zero * m),
          KreinOperator(space, smd * p_minus * m), mu};
}

/** \brief Real spectrum of a positive operator, ascending. */
inline RealVector real_spectrum(const KreinOperator& a, const Tolerances& tol = {}) {
  return spectral_split(a, tol).eigenvalues;
}

/** \brief Result of diagonalizing H + eps*S: U H U^* = D + remainder. */
struct EpsilonDiagonalization {
  Matrix u;            ///< pseudo-unitary, U^* = S U^dagger S = U^{-1}
  RealVector d;        ///< eigenvalues of H + eps*S, positive-type first
  Matrix remainder;    ///< U H U^* - diag(d) = -eps U S U^*
  double epsilon = 0;
};

/**
 * \brief Diagonalizes H + eps*S with a pseudo-unitary transformation.
 *
 * Works whenever S*H + eps is positive definite, which holds for every eps > 0 when H is positive.
 * Otherwise a retryable error suggests an eps for which it holds.
 */
inline EpsilonDiagonalization epsilon_diagonalize(const KreinOperator& h, double eps,
                                                  const Tolerances& tol = {}) {
  if (!(eps > 0.0)) throw InvalidInput("epsilon must be positive");
  if (!is_symmetric(h, tol.herm)) throw PreconditionError("epsilon_diagonalize: operator is not symmetric");
  const SignatureSpace& space = h.space();
  const Eigen::Index dim = space.dimension();
  const Matrix g = hermitian_part(h.hermitian_form()) + eps * Matrix::Identity(dim, dim);
  Eigen::SelfAdjointEigenSolver<Matrix> ges(g);
  const double lowest = ges.eigenvalues()(0);
  const double scale = std::max(ges.eigenvalues().cwiseAbs().maxCoeff(), eps);
  if (lowest <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
    const double suggested = 2.0 * (eps - lowest) + eps;
    throw RetryableEpsilon("H + eps S is not in the definite regime for eps = " + std::to_string(eps),
                           suggested);
  }
  const Matrix m = detail::hermitian_sqrt(g);
  const Matrix k = hermitian_part(m * space.apply_left(m.adjoint()));
  Eigen::SelfAdjointEigenSolver<Matrix> kes(k);

  // Sylvester: K is congruent to S, so exactly n eigenvalues of each sign. Positive ones first.
  Matrix v(dim, dim);
  RealVector d(dim);
  const Matrix smd = space.apply_left(m.adjoint());
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Eigen::Index src = dim - 1 - i;  // eigenvalues come ascending
    const double mu = kes.eigenvalues()(src);
    d(i) = mu;
    v.col(i) = smd * kes.eigenvectors().col(src) / std::sqrt(std::abs(mu));
  }
  const Matrix u = space.adjoint(v);  // V^{-1} for pseudo-unitary V
  const Matrix remainder = u * h.matrix() * v - Matrix(d.cast<Complex>().asDiagonal());
  return {u, d, remainder, eps};
}

/** \brief Outcome of the trace-pairing test Tr(AB) = 0 implies AB = 0. */
struct AnnihilationCheck {
  bool annihilates = false;
  double trace = 0;          ///< Tr(AB) = Tr((SA)(BS)) >= 0
  double product_norm = 0;   ///< spectral norm of AB
  double bound = 0;          ///< sqrt(Tr(AB) ||SA|| ||SB||), an upper bound for ||AB||
};

inline AnnihilationCheck check_annihilation(const KreinOperator& a, const KreinOperator& b, double tol,
                                            const Tolerances& tols = {}) {
  require_positive(a, "product_annihilates", tols.psd);
  require_positive(b, "product_annihilates", tols.psd);
  AnnihilationCheck out;
  out.trace = (a.matrix() * b.matrix()).trace().real();
  out.product_norm = spectral_norm(a.matrix() * b.matrix());
  const double na = spectral_norm(a.hermitian_form());
  const double nb = spectral_norm(b.hermitian_form());
  out.bound = std::sqrt(std::max(out.trace, 0.0) * na * nb);
  out.annihilates = std::abs(out.trace) <= tol;
  return out;
}

/**
 * \brief True iff |Tr(AB)| <= tol. When true, ||AB|| <= sqrt(tol ||SA|| ||SB||) is asserted as well.
 */
inline bool product_annihilates(const KreinOperator& a, const KreinOperator& b, double tol) {
  const AnnihilationCheck c = check_annihilation(a, b, tol);
  if (c.annihilates) {
    const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * a.norm() * b.norm();
    const double allowed =
        std::sqrt(tol * spectral_norm(a.hermitian_form()) * spectral_norm(b.hermitian_form())) + roundoff;
    if (c.product_norm > allowed)
      throw NumericalFailure("Tr(AB) vanishes but AB does not; inputs are not positive to working precision");
  }
  return c.annihilates;
}

}  // namespace hcap
