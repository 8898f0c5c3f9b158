#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "hcap/action.hpp"
#include "hcap/core.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"

namespace hcap {

/** \brief A vector in V per atom of the measure; the discrete stand-in for a compactly supported test function. */
struct TestFunction {
  std::vector<Vector> values;
};

inline void require_matching(const TestFunction& u, const OperatorMeasure& nu) {
  if (u.values.size() != nu.size()) throw InvalidInput("test function must have one value per atom");
  for (const Vector& v : u.values)
    if (v.size() != nu.space().dimension()) throw InvalidInput("test function value has wrong dimension");
}

/** \brief <u|v> = sum_j <<u(p_j) | A_j v(p_j)>>; positive semi-definite. */
inline Complex hilbert_inner(const TestFunction& u, const TestFunction& v, const OperatorMeasure& nu) {
  require_matching(u, nu);
  require_matching(v, nu);
  Complex sum = 0.0;
  for (size_t j = 0; j < nu.size(); ++j)
    sum += nu.space().inner(u.values[j], nu.atoms()[j].a.matrix() * v.values[j]);
  return sum;
}

/** \brief psi(x) = sum_j exp(-i p_j.x) A_j u(p_j). */
inline Vector physical_wave(const TestFunction& u, const OperatorMeasure& nu, const Position& x) {
  require_matching(u, nu);
  Vector psi = Vector::Zero(nu.space().dimension());
  for (size_t j = 0; j < nu.size(); ++j) {
    const Atom& atom = nu.atoms()[j];
    psi += std::polar(1.0, -atom.p.dot(x)) * (atom.a.matrix() * u.values[j]);
  }
  return psi;
}

/** \brief One unit vector per atom and spin component. */
inline std::vector<TestFunction> coordinate_basis(const OperatorMeasure& nu) {
  const Eigen::Index dim = nu.space().dimension();
  std::vector<TestFunction> basis;
  for (size_t j = 0; j < nu.size(); ++j)
    for (Eigen::Index k = 0; k < dim; ++k) {
      TestFunction u{std::vector<Vector>(nu.size(), Vector::Zero(dim))};
      u.values[j](k) = 1.0;
      basis.push_back(std::move(u));
    }
  return basis;
}

/**
 * \brief F(x) in a test-function basis.
 *
 * matrix(i,k) = -<<psi_i(x) | psi_k(x)>>, gram(i,k) = <u_i|u_k>. The spectrum is that of the pencil
 * (matrix, gram) on the range of gram, i.e. of F on the quotient by the null space.
 */
struct LocalCorrelation {
  Position x;
  double weight = 1.0;
  Matrix matrix;
  Matrix gram;
  RealVector eigenvalues;  ///< ascending
  Eigen::Index rank = 0;   ///< rank of gram used for the reduction
  bool reduced = false;    ///< gram was singular and the basis was reduced
  int positive_count = 0;
  int negative_count = 0;
};

inline LocalCorrelation local_correlation(const OperatorMeasure& nu, const Position& x,
                                          const std::vector<TestFunction>& basis, double zero_tol = 1e-10) {
  const SignatureSpace& space = nu.space();
  const Eigen::Index count = static_cast<Eigen::Index>(basis.size());
  Matrix psi(space.dimension(), count);
  for (Eigen::Index i = 0; i < count; ++i) psi.col(i) = physical_wave(basis[static_cast<size_t>(i)], nu, x);

  LocalCorrelation out;
  out.x = x;
  out.matrix = -(psi.adjoint() * space.apply_left(psi));
  out.gram = Matrix(count, count);
  for (Eigen::Index i = 0; i < count; ++i)
    for (Eigen::Index k = 0; k < count; ++k)
      out.gram(i, k) = hilbert_inner(basis[static_cast<size_t>(i)], basis[static_cast<size_t>(k)], nu);
  out.gram = hermitian_part(out.gram);

  Eigen::SelfAdjointEigenSolver<Matrix> gs(out.gram);
  const double gram_scale = std::max(gs.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < count; ++i)
    if (gs.eigenvalues()(i) > zero_tol * gram_scale) kept.push_back(i);
  out.rank = static_cast<Eigen::Index>(kept.size());
  out.reduced = out.rank < count;
  if (out.rank == 0) {
    out.eigenvalues = RealVector();
    return out;
  }
  // W = U_r Lambda_r^{-1/2} whitens the Gram matrix on its range.
  Matrix w(count, out.rank);
  for (Eigen::Index r = 0; r < out.rank; ++r)
    w.col(r) = gs.eigenvectors().col(kept[static_cast<size_t>(r)]) / std::sqrt(gs.eigenvalues()(kept[static_cast<size_t>(r)]));
  Eigen::SelfAdjointEigenSolver<Matrix> fs(hermitian_part(w.adjoint() * out.matrix * w), Eigen::EigenvaluesOnly);
  out.eigenvalues = fs.eigenvalues();
  const double scale = std::max(out.eigenvalues.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  for (double e : out.eigenvalues) {
    if (e > zero_tol * scale) ++out.positive_count;
    if (e < -zero_tol * scale) ++out.negative_count;
  }
  return out;
}

/** \brief Local correlation operators over a position grid, each carrying its quadrature weight. */
inline std::vector<LocalCorrelation> empirical_cfs(const OperatorMeasure& nu, const PositionGrid& grid,
                                                   const std::vector<TestFunction>& basis) {
  std::vector<LocalCorrelation> out;
  out.reserve(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    out.push_back(local_correlation(nu, grid.point(i), basis));
    out.back().weight = grid.weight(i);
  }
  return out;
}

/** \brief CSV rows x0,x1,x2,x3,weight,positive,negative,ev0,ev1,... */
inline void write_correlation_csv(std::ostream& out, const std::vector<LocalCorrelation>& rho) {
  out.precision(17);
  Eigen::Index width = 0;
  for (const auto& f : rho) width = std::max(width, f.eigenvalues.size());
  out << "x0,x1,x2,x3,weight,positive,negative";
  for (Eigen::Index k = 0; k < width; ++k) out << ",ev" << k;
  out << '\n';
  for (const auto& f : rho) {
    out << f.x(0) << ',' << f.x(1) << ',' << f.x(2) << ',' << f.x(3) << ',' << f.weight << ',' << f.positive_count
        << ',' << f.negative_count;
    for (Eigen::Index k = 0; k < width; ++k) {
      out << ',';
      if (k < f.eigenvalues.size()) out << f.eigenvalues(k);
    }
    out << '\n';
  }
}

}  // namespace hcap
