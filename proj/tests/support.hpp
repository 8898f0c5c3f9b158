#pragma once

// Oracles shared by the unit tests and the acceptance binary. They avoid the library code paths they check.

#include <cmath>
#include <vector>

#include "hcap/action.hpp"
#include "hcap/measure.hpp"
#include "hcap/random.hpp"

namespace hcap::oracle {

inline Matrix mat2(Complex a, Complex b, Complex c, Complex d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

/** \brief Measure with one atom per grid point of the box, each A_j = S M_j^dagger M_j for random M_j. */
struct FactoredMeasure {
  SignatureSpace space;
  MomentumBox box;
  std::vector<Momentum> momenta;
  std::vector<Matrix> factors;

  [[nodiscard]] OperatorMeasure measure(double tau = 0.0, const std::vector<Matrix>* direction = nullptr) const {
    std::vector<Atom> atoms;
    for (size_t j = 0; j < momenta.size(); ++j) {
      Matrix m = factors[j];
      if (direction) m += tau * (*direction)[j];
      atoms.push_back({momenta[j], KreinOperator(space, space.apply_left(m.adjoint() * m))});
    }
    return {space, box, std::move(atoms)};
  }
};

inline FactoredMeasure random_factored(int n, const MomentumBox& box, Rng& rng, double scale = 1.0) {
  FactoredMeasure out{SignatureSpace(n), box, box.grid_points(), {}};
  for (size_t j = 0; j < out.momenta.size(); ++j) out.factors.push_back(scale * random_matrix(2 * n, 2 * n, rng));
  return out;
}

/** \brief Derivative of the quadrature action along M_j -> M_j + tau dM_j by 4-point central differences. */
inline double action_derivative_fd(const FactoredMeasure& fm, const std::vector<Matrix>& direction,
                                   const PositionGrid& grid, double h) {
  auto at = [&](double t) { return action(fm.measure(t, &direction), grid); };
  return (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
}

/** \brief The induced first-order change of each atom, S (M^dagger dM + dM^dagger M). */
inline std::vector<Matrix> induced_variation(const FactoredMeasure& fm, const std::vector<Matrix>& direction) {
  std::vector<Matrix> out;
  for (size_t j = 0; j < fm.factors.size(); ++j)
    out.push_back(fm.space.apply_left(fm.factors[j].adjoint() * direction[j] + direction[j].adjoint() * fm.factors[j]));
  return out;
}

inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  const double count = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / count;
    my += std::log(y[i]) / count;
  }
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace hcap::oracle
