#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hcap/core.hpp"
#include "hcap/krein.hpp"

namespace hcap {

/** \brief Compact momentum box with a per-axis point count for its sampling grid. */
struct MomentumBox {
  Momentum lower = Momentum::Constant(-1.0);
  Momentum upper = Momentum::Constant(1.0);
  std::array<int, 4> grid_shape{1, 1, 1, 1};

  void validate() const {
    for (int k = 0; k < 4; ++k) {
      if (!(lower(k) < upper(k))) throw InvalidInput("momentum box needs lower < upper on every axis");
      if (grid_shape[static_cast<size_t>(k)] < 1) throw InvalidInput("grid counts must be positive");
    }
  }

  [[nodiscard]] bool contains(const Momentum& p, double slack = 1e-12) const {
    const double pad = slack * std::max(1.0, (upper - lower).cwiseAbs().maxCoeff());
    return ((p - lower).array() >= -pad).all() && ((upper - p).array() >= -pad).all();
  }

  /** \brief Axis samples: the midpoint for a single point, otherwise evenly spaced including both ends. */
  [[nodiscard]] std::vector<double> axis(int k) const {
    const int count = grid_shape[static_cast<size_t>(k)];
    std::vector<double> out(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
      out[static_cast<size_t>(i)] =
          count == 1 ? 0.5 * (lower(k) + upper(k))
                     : lower(k) + (upper(k) - lower(k)) * static_cast<double>(i) / (count - 1);
    return out;
  }

  [[nodiscard]] std::vector<Momentum> grid_points() const {
    std::vector<Momentum> out;
    const auto a0 = axis(0), a1 = axis(1), a2 = axis(2), a3 = axis(3);
    for (double x0 : a0)
      for (double x1 : a1)
        for (double x2 : a2)
          for (double x3 : a3) out.emplace_back(x0, x1, x2, x3);
    return out;
  }
};

struct Atom {
  Momentum p;
  KreinOperator a;
};

/** \brief Finitely supported positive operator-valued measure on a momentum box. Immutable. */
class OperatorMeasure {
 public:
  OperatorMeasure(SignatureSpace space, MomentumBox box, std::vector<Atom> atoms, const Tolerances& tol = {})
      : space_(space), box_(std::move(box)), atoms_(std::move(atoms)) {
    box_.validate();
    for (size_t j = 0; j < atoms_.size(); ++j) {
      const Atom& atom = atoms_[j];
      if (!(atom.a.space() == space_)) throw InvalidInput("atom " + std::to_string(j) + " has wrong dimension");
      if (!box_.contains(atom.p)) throw InvalidInput("atom " + std::to_string(j) + " lies outside the box");
      if (!is_positive(atom.a, tol.psd)) throw InvalidInput("atom " + std::to_string(j) + " is not positive");
      for (size_t i = 0; i < j; ++i)
        if (atoms_[i].p == atom.p) throw InvalidInput("atom momenta must be pairwise distinct");
    }
  }

  [[nodiscard]] const SignatureSpace& space() const noexcept { return space_; }
  [[nodiscard]] const MomentumBox& box() const noexcept { return box_; }
  [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  [[nodiscard]] size_t size() const noexcept { return atoms_.size(); }
  [[nodiscard]] bool empty() const noexcept { return atoms_.empty(); }

 private:
  SignatureSpace space_;
  MomentumBox box_;
  std::vector<Atom> atoms_;
};

/** \brief nu(K), the sum of all atoms. */
inline KreinOperator total_operator(const OperatorMeasure& nu) {
  KreinOperator total = KreinOperator::zero(nu.space());
  for (const Atom& atom : nu.atoms()) total += atom.a;
  return total;
}

struct ConstraintValues {
  double trace = 0;    ///< Tr nu(K)
  double dim_sum = 0;  ///< sum of |eigenvalues| of nu(K)
  double mod_dim = 0;  ///< Tr(S nu(K))
};

/**
 * \brief Trace, dimension and modified dimension functionals.
 *
 * dim_sum diagonalizes nu(K) + eps S at eps and eps/2 and extrapolates linearly to eps = 0;
 * eps is relative_eps times the norm of nu(K).
 */
inline ConstraintValues constraint_values(const OperatorMeasure& nu, double relative_eps = 1e-9) {
  const KreinOperator total = total_operator(nu);
  ConstraintValues out;
  out.trace = total.trace();
  out.mod_dim = total.signed_trace();
  const double scale = total.norm();
  if (scale == 0.0) return out;
  const double eps = relative_eps * scale;
  const double coarse = epsilon_diagonalize(total, eps).d.cwiseAbs().sum();
  const double fine = epsilon_diagonalize(total, 0.5 * eps).d.cwiseAbs().sum();
  out.dim_sum = 2.0 * fine - coarse;
  return out;
}

/** \brief Norm used for Radon-Nikodym densities. */
enum class DensityNorm { hermitian_spectral, frobenius };

inline double density_norm(const KreinOperator& a, DensityNorm kind = DensityNorm::hermitian_spectral) {
  return kind == DensityNorm::frobenius ? a.matrix().norm() : spectral_norm(a.hermitian_form());
}

struct MeasureDecomposition {
  OperatorMeasure particle;
  OperatorMeasure neutral;
  OperatorMeasure sea;
};

/** \brief Atomwise spectral splitting into particle, neutral and sea parts. Vanishing parts are dropped. */
inline MeasureDecomposition decompose(const OperatorMeasure& nu, DensityNorm norm = DensityNorm::hermitian_spectral,
                                      const Tolerances& tol = {}) {
  std::vector<Atom> particle, neutral, sea;
  for (const Atom& atom : nu.atoms()) {
    const double weight = density_norm(atom.a, norm);
    if (weight == 0.0) continue;
    const SpectralSplit split = spectral_split((1.0 / weight) * atom.a, tol);
    auto keep = [&](std::vector<Atom>& into, const KreinOperator& part) {
      if (part.norm() > tol.zero) into.push_back({atom.p, weight * part});
    };
    keep(particle, split.plus);
    keep(neutral, split.zero);
    keep(sea, split.minus);
  }
  return {OperatorMeasure(nu.space(), nu.box(), std::move(particle), tol),
          OperatorMeasure(nu.space(), nu.box(), std::move(neutral), tol),
          OperatorMeasure(nu.space(), nu.box(), std::move(sea), tol)};
}

struct ScalarAtom {
  Momentum p;
  double weight;
};

/** \brief |nu|; for atomic measures the supremum over partitions is attained atom by atom. */
inline std::vector<ScalarAtom> variation_measure(const OperatorMeasure& nu,
                                                 DensityNorm norm = DensityNorm::hermitian_spectral) {
  std::vector<ScalarAtom> out;
  out.reserve(nu.size());
  for (const Atom& atom : nu.atoms()) out.push_back({atom.p, density_norm(atom.a, norm)});
  return out;
}

struct Translate {
  Momentum shift;
};
struct LinearMap {
  Eigen::Matrix4d map;
};
struct Scale {
  double factor;
};
using Transformation = std::variant<Translate, LinearMap, Scale>;

/**
 * \brief Applies a momentum translation, a linear momentum map or a rescaling.
 *
 * Without an explicit target box the box is carried along (shifted, or the bounding box of the mapped corners).
 */
inline OperatorMeasure transform(const OperatorMeasure& nu, const Transformation& kind,
                                 std::optional<MomentumBox> target = std::nullopt) {
  MomentumBox box = nu.box();
  std::vector<Atom> atoms = nu.atoms();
  if (const auto* t = std::get_if<Translate>(&kind)) {
    for (Atom& atom : atoms) atom.p += t->shift;
    box.lower += t->shift;
    box.upper += t->shift;
  } else if (const auto* l = std::get_if<LinearMap>(&kind)) {
    for (Atom& atom : atoms) atom.p = l->map * atom.p;
    Momentum lo = Momentum::Constant(std::numeric_limits<double>::infinity());
    Momentum hi = -lo;
    for (int corner = 0; corner < 16; ++corner) {
      Momentum c;
      for (int k = 0; k < 4; ++k) c(k) = (corner >> k) & 1 ? nu.box().upper(k) : nu.box().lower(k);
      const Momentum mapped = l->map * c;
      lo = lo.cwiseMin(mapped);
      hi = hi.cwiseMax(mapped);
    }
    for (int k = 0; k < 4; ++k)
      if (!(lo(k) < hi(k))) throw InvalidInput("linear map collapses the momentum box");
    box.lower = lo;
    box.upper = hi;
  } else {
    const double factor = std::get<Scale>(kind).factor;
    if (!(factor > 0.0)) throw InvalidInput("scale factor must be positive");
    for (Atom& atom : atoms) atom.a = factor * atom.a;
  }
  if (target) {
    for (const Atom& atom : atoms)
      if (!target->contains(atom.p)) throw InvalidInput("transformed atom leaves the target box");
    box = *target;
  }
  return {nu.space(), box, std::move(atoms)};
}

namespace dirac {

/** \brief Dirac matrices in the Dirac representation, gamma^0 = diag(1,1,-1,-1). */
inline std::array<Matrix, 4> gammas() {
  const Complex i(0.0, 1.0);
  Eigen::Matrix2cd sigma[3];
  sigma[0] << 0, 1, 1, 0;
  sigma[1] << 0, -i, i, 0;
  sigma[2] << 1, 0, 0, -1;
  std::array<Matrix, 4> g;
  g[0] = Matrix::Zero(4, 4);
  g[0].diagonal() << 1, 1, -1, -1;
  for (int k = 0; k < 3; ++k) {
    g[static_cast<size_t>(k + 1)] = Matrix::Zero(4, 4);
    g[static_cast<size_t>(k + 1)].topRightCorner(2, 2) = sigma[k];
    g[static_cast<size_t>(k + 1)].bottomLeftCorner(2, 2) = -sigma[k];
  }
  return g;
}

/** \brief gamma^j p_j for contravariant p and signature (+,-,-,-). */
inline Matrix slash(const Momentum& p) {
  const auto g = gammas();
  return g[0] * p(0) - g[1] * p(1) - g[2] * p(2) - g[3] * p(3);
}

inline double minkowski_square(const Momentum& p) { return p(0) * p(0) - p.tail<3>().squaredNorm(); }

}  // namespace dirac

inline MomentumBox bounding_box(const std::vector<Momentum>& points, double margin) {
  if (points.empty()) throw InvalidInput("no momenta given");
  MomentumBox box;
  box.lower = points.front();
  box.upper = points.front();
  for (const Momentum& p : points) {
    box.lower = box.lower.cwiseMin(p);
    box.upper = box.upper.cwiseMax(p);
  }
  box.lower.array() -= margin;
  box.upper.array() += margin;
  return box;
}

/** \brief Atoms -(pslash + m) on the lower mass shell; n = 2, S = gamma^0. */
inline OperatorMeasure dirac_sea_fixture(double mass, const std::vector<Momentum>& shell_points,
                                         double shell_tol = 1e-9) {
  if (!(mass > 0.0)) throw InvalidInput("mass must be positive");
  const SignatureSpace space(2);
  std::vector<Atom> atoms;
  for (const Momentum& p : shell_points) {
    if (std::abs(dirac::minkowski_square(p) - mass * mass) > shell_tol * mass * mass || !(p(0) < 0.0))
      throw InvalidInput("momentum is not on the lower mass shell");
    atoms.push_back({p, KreinOperator(space, -(dirac::slash(p) + mass * Matrix::Identity(4, 4)))});
  }
  return {space, bounding_box(shell_points, mass), std::move(atoms)};
}

/** \brief count points on the lower mass shell with spatial momentum (k,0,0), k evenly spaced in [-k_max,k_max]. */
inline std::vector<Momentum> lower_shell_points(double mass, int count, double k_max = 1.0) {
  if (count < 1) throw InvalidInput("need at least one shell point");
  std::vector<Momentum> out;
  for (int i = 0; i < count; ++i) {
    const double k = count == 1 ? 0.0 : -k_max + 2.0 * k_max * i / (count - 1);
    out.emplace_back(-std::sqrt(mass * mass + k * k), k, 0.0, 0.0);
  }
  return out;
}

/** \brief Atoms -pslash on the lower light cone; each density is nilpotent. */
inline OperatorMeasure massless_fixture(const std::vector<Momentum>& cone_points, double cone_tol = 1e-9) {
  const SignatureSpace space(2);
  std::vector<Atom> atoms;
  for (const Momentum& p : cone_points) {
    if (std::abs(dirac::minkowski_square(p)) > cone_tol * p.squaredNorm() || !(p(0) < 0.0))
      throw InvalidInput("momentum is not on the lower light cone");
    atoms.push_back({p, KreinOperator(space, -dirac::slash(p))});
  }
  return {space, bounding_box(cone_points, 1.0), std::move(atoms)};
}

/** \brief The n = 1 operator [[1,1],[-1,-1]]: positive, nilpotent, not diagonalizable. */
inline KreinOperator nilpotent_operator() {
  Matrix m(2, 2);
  m << 1, 1, -1, -1;
  return {SignatureSpace(1), m};
}

inline OperatorMeasure nilpotent_fixture() {
  return {SignatureSpace(1), MomentumBox{}, {Atom{Momentum::Zero(), nilpotent_operator()}}};
}

}  // namespace hcap
