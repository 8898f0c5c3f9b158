#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hcap/action.hpp"
#include "hcap/core.hpp"
#include "hcap/elverify.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"
#include "hcap/random.hpp"

namespace hcap {

struct MinimizeConfig {
  int spin_dimension = 1;
  MomentumBox box;  ///< atoms are placed at every grid point of the box
  double position_radius = 2.0;
  std::array<int, 4> position_counts{5, 5, 5, 5};
  double c = 1.0;
  double f = 2.0;
  double smoothing = 0.0;
  double initial_step = 1e-2;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-10;  ///< on the projected gradient, relative to the raw gradient scale
  double stall_tolerance = 1e-6;      ///< accepted as converged when the line search stalls below this
  std::uint64_t seed = 1;
  Tolerances tol;
  GradientMode gradient_mode = GradientMode::analytic;

  void validate() const {
    if (spin_dimension < 1) throw InvalidInput("spin dimension must be positive");
    box.validate();
    validate_constraint_targets(c, f);
    if (!(smoothing >= 0.0)) throw InvalidInput("smoothing must be non-negative");
    if (!(position_radius > 0.0)) throw InvalidInput("position radius must be positive");
    for (int count : position_counts)
      if (count < 1) throw InvalidInput("position counts must be positive");
    if (!(initial_step > 0.0) || !(0.0 < backtrack && backtrack < 1.0) || !(0.0 < armijo && armijo < 1.0))
      throw InvalidInput("invalid line search parameters");
    if (max_iterations < 0 || max_backtracks < 1) throw InvalidInput("invalid iteration limits");
  }

  [[nodiscard]] PositionGrid position_grid() const { return {position_radius, position_counts}; }
  [[nodiscard]] GradientOptions gradient_options() const {
    GradientOptions opt;
    opt.mode = gradient_mode;
    opt.smoothing = smoothing;
    opt.gap = tol.gap;
    return opt;
  }
};

/** \brief Per-atom factors M_j with A_j = S M_j^dagger M_j. */
struct Factors {
  SignatureSpace space;
  std::vector<Momentum> momenta;
  std::vector<Matrix> m;
};

inline OperatorMeasure assemble(const Factors& x, const MomentumBox& box, const Tolerances& tol = {}) {
  std::vector<Atom> atoms;
  atoms.reserve(x.m.size());
  for (size_t j = 0; j < x.m.size(); ++j)
    atoms.push_back({x.momenta[j], KreinOperator(x.space, x.space.apply_left(x.m[j].adjoint() * x.m[j]))});
  return {x.space, box, std::move(atoms), tol};
}

/** \brief Traces of the ++ and -- blocks of the total operator (non-negative and non-positive). */
struct BlockTraces {
  double plus = 0;
  double minus = 0;
};

inline BlockTraces block_traces(const Factors& x) {
  const int n = x.space.spin_dimension();
  BlockTraces t;
  for (const Matrix& m : x.m) {
    t.plus += m.leftCols(n).squaredNorm();
    t.minus -= m.rightCols(n).squaredNorm();
  }
  return t;
}

struct Restoration {
  ConstraintCase which = ConstraintCase::a;
  double s1 = 0;
  double s2 = 0;
};

/**
 * \brief Restores Tr = c (case a), or Tr = c and Tr(S.) = f (case b), by the block scaling
 * A -> D A D with D = diag((1+s1) on the S=+1 block, (1+s2) on the S=-1 block).
 *
 * In terms of the block traces the conditions are linear in u = (1+s1)^2 and v = (1+s2)^2, so the root is
 * closed form. Roots with s outside (-1,1) are rejected unless require_small is false.
 */
inline Restoration restore_constraints(Factors& x, ConstraintCase which, double c, double f,
                                       bool require_small = true) {
  validate_constraint_targets(c, f);
  const BlockTraces t = block_traces(x);
  double u = 0, v = 0;
  if (which == ConstraintCase::a) {
    const double tr = t.plus + t.minus;
    if (!(tr > 0.0)) throw RestorationError("case a restoration needs a positive trace");
    u = v = c / tr;
  } else {
    if (!(t.plus > 0.0) || !(t.minus < 0.0)) throw RestorationError("case b restoration needs both blocks occupied");
    u = (c + f) / (2.0 * t.plus);
    v = (c - f) / (2.0 * t.minus);
  }
  const double s1 = std::sqrt(u) - 1.0, s2 = std::sqrt(v) - 1.0;
  if (require_small && (std::abs(s1) >= 1.0 || std::abs(s2) >= 1.0))
    throw RestorationError("no block scaling with s in (-1,1) restores the constraints");
  const int n = x.space.spin_dimension();
  for (Matrix& m : x.m) {
    m.leftCols(n) *= 1.0 + s1;
    m.rightCols(n) *= 1.0 + s2;
  }
  return {which, s1, s2};
}

/** \brief Case a restoration, switching to case b when it would leave Tr(S.) above f. */
inline Restoration restore_feasible(Factors& x, double c, double f, bool require_small = true) {
  Factors trial = x;
  Restoration r = restore_constraints(trial, ConstraintCase::a, c, f, require_small);
  const BlockTraces t = block_traces(trial);
  if (t.plus - t.minus > f) {
    r = restore_constraints(x, ConstraintCase::b, c, f, require_small);
  } else {
    x = std::move(trial);
  }
  return r;
}

struct IterationRecord {
  int iteration = 0;
  double action = 0;
  double trace = 0;
  double mod_dim = 0;
  double step = 0;
  double projected_gradient = 0;
  double alpha = 0;
  double beta = 0;
  ConstraintCase which = ConstraintCase::a;
};

struct MinimizeResult {
  OperatorMeasure measure;
  ELReport report;
  std::vector<IterationRecord> log;
  bool converged = false;
  double working_alpha = 0;  ///< multipliers of the final projected gradient
  double working_beta = 0;
  ConstraintCase working_case = ConstraintCase::a;
};

namespace detail {

struct Evaluation {
  double action = 0;
  std::vector<Matrix> gradient;  ///< dS/dM_j = 4 M_j Qhat(p_j) S
  std::vector<Matrix> qhat;
};

inline Evaluation evaluate(const Factors& x, const MinimizeConfig& cfg, const PositionGrid& grid) {
  const OperatorMeasure nu = assemble(x, cfg.box, cfg.tol);
  const GradientField field(nu, grid, cfg.gradient_options());
  Evaluation e;
  e.action = field.action();
  for (size_t j = 0; j < x.m.size(); ++j) {
    Matrix q = field.q_hat(x.momenta[j]).matrix();
    q = x.space.apply_left(hermitian_part(x.space.apply_left(q)));  // drop the non-symmetric rounding part
    e.gradient.push_back(4.0 * x.m[j] * x.space.apply_right(q));
    e.qhat.push_back(std::move(q));
  }
  return e;
}

inline double inner(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j) s += a[j].cwiseProduct(b[j].conjugate()).sum().real();
  return s;
}

struct Projection {
  std::vector<Matrix> direction;
  double alpha = 0;
  double beta = 0;
  ConstraintCase which = ConstraintCase::a;
};

/**
 * \brief Removes the normal components of the constraint gradients 2 M S (trace) and 2 M (modified dimension).
 *
 * The modified dimension constraint is kept only while active and while its multiplier has the sign of an
 * upper bound; the returned alpha, beta are half the least-squares multipliers.
 */
inline Projection project(const Factors& x, const std::vector<Matrix>& g, bool dim_active) {
  std::vector<Matrix> n1, n2;
  for (const Matrix& m : x.m) {
    n1.push_back(2.0 * x.space.apply_right(m));
    n2.push_back(2.0 * m);
  }
  Projection out;
  auto subtract = [&](double l1, double l2) {
    out.direction.clear();
    for (size_t j = 0; j < g.size(); ++j) out.direction.push_back(g[j] - l1 * n1[j] - l2 * n2[j]);
  };
  if (dim_active) {
    Eigen::Matrix2d gram;
    gram << inner(n1, n1), inner(n1, n2), inner(n2, n1), inner(n2, n2);
    const Eigen::Vector2d rhs(inner(n1, g), inner(n2, g));
    const Eigen::Vector2d l = gram.fullPivLu().solve(rhs);
    if (l(1) <= 0.0) {
      subtract(l(0), l(1));
      out.alpha = 0.5 * l(0);
      out.beta = 0.5 * l(1);
      out.which = ConstraintCase::b;
      return out;
    }
  }
  const double l1 = inner(n1, g) / inner(n1, n1);
  subtract(l1, 0.0);
  out.alpha = 0.5 * l1;
  return out;
}

inline double norm(const std::vector<Matrix>& a) { return std::sqrt(inner(a, a)); }

}  // namespace detail

/** \brief Seeded initial factors at every box grid point, scaled to Tr = c and Tr(S.) = (c+f)/2. */
inline Factors initial_factors(const MinimizeConfig& cfg) {
  Rng rng(cfg.seed);
  const SignatureSpace space(cfg.spin_dimension);
  Factors x{space, cfg.box.grid_points(), {}};
  for (size_t j = 0; j < x.momenta.size(); ++j) x.m.push_back(random_matrix(space.dimension(), space.dimension(), rng));
  restore_constraints(x, ConstraintCase::b, cfg.c, 0.5 * (cfg.c + cfg.f), false);
  return x;
}

/**
 * \brief Projected gradient descent on the factors with Barzilai-Borwein trial steps and Armijo backtracking.
 *
 * Every trial point is made feasible by block scaling and accepted only if the action decreases.
 * The final measure is checked with verify_el on the box grid.
 */
inline MinimizeResult minimize_action(const MinimizeConfig& cfg, std::optional<Factors> start = std::nullopt) {
  cfg.validate();
  const PositionGrid grid = cfg.position_grid();
  Factors x = start ? *start : initial_factors(cfg);
  restore_feasible(x, cfg.c, cfg.f, false);

  std::vector<IterationRecord> log;
  detail::Evaluation e = detail::evaluate(x, cfg, grid);
  double step = cfg.initial_step;
  std::vector<Matrix> prev_x, prev_d;
  bool converged = false;
  detail::Projection proj;

  for (int it = 0;; ++it) {
    const BlockTraces t = block_traces(x);
    const double mod_dim = t.plus - t.minus;
    const bool dim_active = mod_dim >= cfg.f * (1.0 - cfg.tol.constraint);
    proj = detail::project(x, e.gradient, dim_active);
    const double gnorm = detail::norm(proj.direction);
    const double scale = std::max(detail::norm(e.gradient), std::numeric_limits<double>::min());
    log.push_back({it, e.action, t.plus + t.minus, mod_dim, step, gnorm, proj.alpha, proj.beta, proj.which});
    if (gnorm <= cfg.gradient_tolerance * scale || gnorm == 0.0) {
      converged = true;
      break;
    }
    if (it >= cfg.max_iterations) break;

    if (!prev_x.empty()) {
      // Barzilai-Borwein step from the last displacement and direction change.
      std::vector<Matrix> sx, sy;
      for (size_t j = 0; j < x.m.size(); ++j) {
        sx.push_back(x.m[j] - prev_x[j]);
        sy.push_back(proj.direction[j] - prev_d[j]);
      }
      const double sy_inner = detail::inner(sx, sy);
      if (sy_inner > 0.0) step = detail::inner(sx, sx) / sy_inner;
    }

    bool accepted = false;
    const double slope = gnorm * gnorm;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, step *= cfg.backtrack) {
      Factors trial = x;
      for (size_t j = 0; j < x.m.size(); ++j) trial.m[j] -= step * proj.direction[j];
      try {
        restore_feasible(trial, cfg.c, cfg.f);
      } catch (const RestorationError&) {
        continue;
      }
      const double value = action(assemble(trial, cfg.box, cfg.tol), grid, cfg.smoothing);
      const double resolvable = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(e.action);
      if (value <= e.action - std::max(cfg.armijo * step * slope, resolvable)) {
        prev_x = x.m;
        prev_d = proj.direction;
        x = std::move(trial);
        e = detail::evaluate(x, cfg, grid);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No sufficient decrease resolvable in double precision.
      converged = gnorm <= cfg.stall_tolerance * scale;
      break;
    }
  }

  OperatorMeasure nu = assemble(x, cfg.box, cfg.tol);
  const GradientField field(nu, grid, cfg.gradient_options());
  ELReport report = verify_el(nu, field, cfg.c, cfg.f, cfg.box.grid_points(), cfg.tol);
  MinimizeResult result{std::move(nu), std::move(report), std::move(log), converged, proj.alpha, proj.beta, proj.which};
  return result;
}

/** \brief CSV rows iteration,action,trace,mod_dim,step,projected_gradient,alpha,beta,case. */
inline void write_iteration_csv(std::ostream& out, const std::vector<IterationRecord>& log) {
  out.precision(17);
  out << "iteration,action,trace,mod_dim,step,projected_gradient,alpha,beta,case\n";
  for (const auto& r : log)
    out << r.iteration << ',' << r.action << ',' << r.trace << ',' << r.mod_dim << ',' << r.step << ','
        << r.projected_gradient << ',' << r.alpha << ',' << r.beta << ',' << to_string(r.which) << '\n';
}

}  // namespace hcap
