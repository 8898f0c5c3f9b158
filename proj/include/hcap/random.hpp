#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hcap/core.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"

namespace hcap {

using Rng = std::mt19937_64;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(normal(rng), normal(rng));
  return m;
}

/** \brief S M^dagger M with M of the given rank (full rank when rank <= 0). */
inline KreinOperator random_positive(const SignatureSpace& space, Rng& rng, int rank = 0) {
  const int dim = space.dimension();
  const int r = rank <= 0 || rank > dim ? dim : rank;
  const Matrix m = random_matrix(r, dim, rng);
  return {space, space.apply_left(m.adjoint() * m)};
}

/** \brief S H with H a random Hermitian matrix. */
inline KreinOperator random_symmetric(const SignatureSpace& space, Rng& rng) {
  const Matrix g = random_matrix(space.dimension(), space.dimension(), rng);
  return {space, space.apply_left(hermitian_part(g))};
}

inline Momentum random_momentum(const MomentumBox& box, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Momentum p;
  for (int k = 0; k < 4; ++k) p(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
  return p;
}

/** \brief Random atoms at uniformly drawn momenta, each density of random rank. */
inline OperatorMeasure random_measure(const SignatureSpace& space, const MomentumBox& box, int atom_count,
                                      Rng& rng) {
  std::uniform_int_distribution<int> rank(1, space.dimension());
  std::vector<Atom> atoms;
  for (int j = 0; j < atom_count; ++j) atoms.push_back({random_momentum(box, rng), random_positive(space, rng, rank(rng))});
  return {space, box, std::move(atoms)};
}

}  // namespace hcap
