#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "hcap/core.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"

namespace hcap {

/**
 * \brief Truncated position domain [-R,R]^4 with product trapezoidal weights.
 *
 * Points are stored in row-major axis order, so the point -xi of index i sits at index size()-1-i.
 * An axis with a single point contributes xi = 0 with unit weight.
 */
class PositionGrid {
 public:
  PositionGrid(double radius, std::array<int, 4> counts) : radius_(radius), counts_(counts) {
    if (!(radius > 0.0)) throw InvalidInput("position box radius must be positive");
    std::array<std::vector<double>, 4> nodes, w;
    for (size_t k = 0; k < 4; ++k) {
      const int c = counts[k];
      if (c < 1) throw InvalidInput("position grid counts must be positive");
      if (c == 1) {
        nodes[k] = {0.0};
        w[k] = {1.0};
        continue;
      }
      const double h = 2.0 * radius / (c - 1);
      for (int i = 0; i < c; ++i) {
        // Mirror-exact nodes: compute from the nearer end so that xi and -xi are bitwise negatives.
        const int from_end = c - 1 - i;
        nodes[k].push_back(i <= from_end ? -radius + h * i : radius - h * from_end);
        w[k].push_back(i == 0 || i == c - 1 ? 0.5 * h : h);
      }
    }
    for (size_t a = 0; a < nodes[0].size(); ++a)
      for (size_t b = 0; b < nodes[1].size(); ++b)
        for (size_t c = 0; c < nodes[2].size(); ++c)
          for (size_t d = 0; d < nodes[3].size(); ++d) {
            points_.emplace_back(nodes[0][a], nodes[1][b], nodes[2][c], nodes[3][d]);
            weights_.push_back(w[0][a] * w[1][b] * w[2][c] * w[3][d]);
            boundary_.push_back(is_end(a, nodes[0].size()) || is_end(b, nodes[1].size()) ||
                                is_end(c, nodes[2].size()) || is_end(d, nodes[3].size()));
          }
  }

  PositionGrid(double radius, int count) : PositionGrid(radius, {count, count, count, count}) {}

  [[nodiscard]] size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] const Position& point(size_t i) const { return points_[i]; }
  [[nodiscard]] double weight(size_t i) const { return weights_[i]; }
  [[nodiscard]] bool on_boundary(size_t i) const { return boundary_[i]; }
  [[nodiscard]] size_t mirror(size_t i) const noexcept { return points_.size() - 1 - i; }
  [[nodiscard]] double radius() const noexcept { return radius_; }
  [[nodiscard]] const std::array<int, 4>& counts() const noexcept { return counts_; }

 private:
  static bool is_end(size_t i, size_t n) { return n > 1 && (i == 0 || i + 1 == n); }

  double radius_;
  std::array<int, 4> counts_;
  std::vector<Position> points_;
  std::vector<double> weights_;
  std::vector<bool> boundary_;
};

/** \brief P(xi) = -sum_j exp(i p_j.xi) A_j with the Euclidean dual pairing. */
inline KreinOperator kernel_P(const OperatorMeasure& nu, const Position& xi) {
  Matrix p = Matrix::Zero(nu.space().dimension(), nu.space().dimension());
  for (const Atom& atom : nu.atoms()) p -= std::polar(1.0, atom.p.dot(xi)) * atom.a.matrix();
  return {nu.space(), p};
}

struct ClosedChainSpectrum {
  KreinOperator chain;
  Vector lambdas;
};

/** \brief A = P P^* and its eigenvalues. */
inline ClosedChainSpectrum closed_chain(const KreinOperator& p) {
  KreinOperator chain = p * p.adjoint();
  Eigen::ComplexEigenSolver<Matrix> es(chain.matrix(), false);
  return {std::move(chain), es.eigenvalues()};
}

namespace detail {

inline RealVector moduli(const Vector& lambdas, double smoothing) {
  RealVector m(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    m(i) = smoothing > 0.0 ? std::sqrt(std::norm(lambdas(i)) + smoothing * smoothing) : std::abs(lambdas(i));
  return m;
}

inline double lagrangian_of_moduli(const RealVector& m, int spin_dimension) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    for (Eigen::Index j = 0; j < m.size(); ++j) sum += (m(i) - m(j)) * (m(i) - m(j));
  return sum / (4.0 * spin_dimension);
}

}  // namespace detail

/** \brief L = (1/4n) sum_ij (|l_i| - |l_j|)^2; smoothing > 0 replaces |l| by sqrt(|l|^2 + smoothing^2). */
inline double lagrangian(const ClosedChainSpectrum& spectrum, double smoothing = 0.0) {
  return detail::lagrangian_of_moduli(detail::moduli(spectrum.lambdas, smoothing),
                                      spectrum.chain.space().spin_dimension());
}

inline double lagrangian_at(const OperatorMeasure& nu, const Position& xi, double smoothing = 0.0) {
  return lagrangian(closed_chain(kernel_P(nu, xi)), smoothing);
}

/** \brief Quadrature approximation of the homogeneous causal action. */
inline double action(const OperatorMeasure& nu, const PositionGrid& grid, double smoothing = 0.0) {
  double total = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) total += grid.weight(i) * lagrangian_at(nu, grid.point(i), smoothing);
  return total;
}

enum class GradientMode { analytic, finite_difference };

struct GradientOptions {
  GradientMode mode = GradientMode::analytic;
  double smoothing = 0.0;
  double gap = Tolerances{}.gap;
  double fd_step = 2e-6;            ///< relative to ||P||
  double kink_tolerance = 1e-3;     ///< one-sided slope mismatch, relative to ||P||^3
};

namespace detail {

inline double lagrangian_of_kernel(const Matrix& p, const SignatureSpace& space, double smoothing) {
  return lagrangian(closed_chain(KreinOperator(space, p)), smoothing);
}

/** \brief R with dL = 2 Re Tr(R dP) by central differences; throws at a kink. */
inline Matrix kernel_gradient_fd(const Matrix& p, const SignatureSpace& space, const GradientOptions& opt,
                                 const Position& xi) {
  const double scale = std::max(spectral_norm(p), std::numeric_limits<double>::min());
  const double h = opt.fd_step * scale;
  const double base = lagrangian_of_kernel(p, space, opt.smoothing);
  const Eigen::Index dim = p.rows();
  Matrix r(dim, dim);
  const Complex directions[2] = {Complex(1, 0), Complex(0, 1)};
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b) {
      double slope[2];
      for (int d = 0; d < 2; ++d) {
        Matrix plus = p, minus = p;
        plus(a, b) += h * directions[d];
        minus(a, b) -= h * directions[d];
        const double fp = lagrangian_of_kernel(plus, space, opt.smoothing);
        const double fm = lagrangian_of_kernel(minus, space, opt.smoothing);
        const double forward = (fp - base) / h;
        const double backward = (base - fm) / h;
        if (std::abs(forward - backward) > opt.kink_tolerance * scale * scale * scale)
          throw NonsmoothPoint("Lagrangian is not differentiable at this position", xi);
        slope[d] = (fp - fm) / (2.0 * h);
      }
      r(b, a) = Complex(0.5 * slope[0], -0.5 * slope[1]);
    }
  return r;
}

/**
 * \brief R with dL = 2 Re Tr(R dP) from first-order eigenvalue perturbation.
 *
 * dL = Re Tr(G dA) with G = sum_k c_k conj(l_k)/m_k Pi_k, and dA = dP P^* + P dP^* gives R = P^* (G + G^*) / 2.
 * Returns false when the formula does not apply (defective or ill-conditioned eigenbasis, or a vanishing
 * eigenvalue that carries weight without smoothing).
 */
inline bool kernel_gradient_analytic(const Matrix& p, const SignatureSpace& space, const GradientOptions& opt,
                                     Matrix& r) {
  const Matrix p_star = space.adjoint(p);
  const Matrix chain = p * p_star;
  const Eigen::ComplexEigenSolver<Matrix> es(chain);
  if (es.info() != Eigen::Success) return false;
  const Vector& lambda = es.eigenvalues();
  const Matrix& right = es.eigenvectors();
  const RealVector m = moduli(lambda, opt.smoothing);
  const double top = std::max(m.maxCoeff(), std::numeric_limits<double>::min());
  const Eigen::Index dim = p.rows();
  const int n = space.spin_dimension();

  RealVector c(dim);
  for (Eigen::Index k = 0; k < dim; ++k) c(k) = (dim * m(k) - m.sum()) / n;

  Eigen::FullPivLU<Matrix> lu(right);
  if (!lu.isInvertible()) return false;
  const Matrix left = lu.inverse();
  const double cond = spectral_norm(right) * spectral_norm(left);
  if (!(cond < 1.0 / opt.gap)) return false;

  Matrix g = Matrix::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const bool weighty = std::abs(c(k)) > opt.gap * top;
    if (m(k) <= opt.gap * top) {
      if (weighty && opt.smoothing == 0.0) return false;
      if (m(k) == 0.0) continue;
    }
    g += (c(k) * std::conj(lambda(k)) / m(k)) * right.col(k) * left.row(k);
  }
  r = 0.5 * p_star * (g + space.adjoint(g));
  return true;
}

inline Matrix kernel_gradient(const Matrix& p, const SignatureSpace& space, const GradientOptions& opt,
                              const Position& xi) {
  Matrix r;
  if (opt.mode == GradientMode::analytic && kernel_gradient_analytic(p, space, opt, r)) return r;
  return kernel_gradient_fd(p, space, opt, xi);
}

}  // namespace detail

/**
 * \brief The kernel Q at xi, characterized by dL(-xi) = 2 Re Tr(Q(xi) dP(-xi)).
 *
 * Single-point evaluation; symmetrization against -xi is left to GradientField.
 */
inline KreinOperator gradient_kernel_Q(const OperatorMeasure& nu, const Position& xi, const GradientOptions& opt = {}) {
  const Position minus_xi = -xi;
  return {nu.space(), detail::kernel_gradient(kernel_P(nu, minus_xi).matrix(), nu.space(), opt, minus_xi)};
}

/**
 * \brief Lagrangian and gradient kernel on a whole position grid, with the Fourier transform of Q.
 *
 * Q is symmetrized as (Q(xi) + Q(-xi)^*)/2. The transform carries the sign of the kernel definition,
 * Qhat(p) = -sum_xi w Q(xi) exp(-i p.xi), so that dS = 2 sum_j Tr(Qhat(p_j) dA_j).
 */
class GradientField {
 public:
  GradientField(const OperatorMeasure& nu, const PositionGrid& grid, const GradientOptions& opt = {})
      : space_(nu.space()), grid_(grid) {
    const size_t count = grid.size();
    std::vector<Matrix> raw(count);
    lagrangian_.resize(count);
    for (size_t i = 0; i < count; ++i) {
      const Position& xi = grid.point(i);
      const Matrix p = kernel_P(nu, xi).matrix();
      lagrangian_[i] = detail::lagrangian_of_kernel(p, space_, opt.smoothing);
      // Gradient with respect to P(xi) is Q(-xi).
      raw[grid.mirror(i)] = detail::kernel_gradient(p, space_, opt, xi);
      action_ += grid.weight(i) * lagrangian_[i];
    }
    q_.resize(count);
    double top = 0.0, tail = 0.0;
    for (size_t i = 0; i < count; ++i) {
      q_[i] = 0.5 * (raw[i] + space_.adjoint(raw[grid.mirror(i)]));
      const double norm = spectral_norm(q_[i]);
      top = std::max(top, norm);
      if (grid.on_boundary(i)) tail = std::max(tail, norm);
    }
    tail_ratio_ = top > 0.0 ? tail / top : 0.0;
  }

  [[nodiscard]] double action() const noexcept { return action_; }
  [[nodiscard]] const std::vector<double>& lagrangian_values() const noexcept { return lagrangian_; }
  [[nodiscard]] const Matrix& q(size_t grid_index) const { return q_[grid_index]; }
  [[nodiscard]] const PositionGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const SignatureSpace& space() const noexcept { return space_; }
  /** \brief max ||Q|| on the box boundary over max ||Q|| overall; a proxy for the integrability tail. */
  [[nodiscard]] double tail_ratio() const noexcept { return tail_ratio_; }

  [[nodiscard]] KreinOperator q_hat(const Momentum& p) const {
    Matrix out = Matrix::Zero(space_.dimension(), space_.dimension());
    for (size_t i = 0; i < grid_.size(); ++i) out -= (grid_.weight(i) * std::polar(1.0, -p.dot(grid_.point(i)))) * q_[i];
    return {space_, out};
  }

 private:
  SignatureSpace space_;
  PositionGrid grid_;
  std::vector<double> lagrangian_;
  std::vector<Matrix> q_;
  double action_ = 0.0;
  double tail_ratio_ = 0.0;
};

/** \brief Qhat at an arbitrary point (the one-off form of GradientField::q_hat). */
inline KreinOperator fourier_Q_hat(const OperatorMeasure& nu, const PositionGrid& grid, const Momentum& p,
                                   const GradientOptions& opt = {}) {
  return GradientField(nu, grid, opt).q_hat(p);
}

/** \brief CSV rows xi0,xi1,xi2,xi3,L. */
inline void write_lagrangian_csv(std::ostream& out, const GradientField& field) {
  out.precision(17);
  out << "xi0,xi1,xi2,xi3,L\n";
  for (size_t i = 0; i < field.grid().size(); ++i) {
    const Position& xi = field.grid().point(i);
    out << xi(0) << ',' << xi(1) << ',' << xi(2) << ',' << xi(3) << ',' << field.lagrangian_values()[i] << '\n';
  }
}

}  // namespace hcap
