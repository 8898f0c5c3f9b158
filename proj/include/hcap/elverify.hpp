#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hcap/action.hpp"
#include "hcap/core.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"

namespace hcap {

using QhatEvaluator = std::function<KreinOperator(const Momentum&)>;

inline QhatEvaluator qhat_evaluator(const GradientField& field) {
  return [&field](const Momentum& p) { return field.q_hat(p); };
}

struct PushforwardAtom {
  Momentum p;        ///< preimage momentum
  KreinOperator q;   ///< Qhat(p)
  KreinOperator a;   ///< weight carried to q
};

/** \brief The measure mu = Qhat_* nu on symmetric operators. */
struct PushforwardMeasure {
  std::vector<PushforwardAtom> atoms;

  [[nodiscard]] KreinOperator total(const SignatureSpace& space) const {
    KreinOperator sum = KreinOperator::zero(space);
    for (const auto& atom : atoms) sum += atom.a;
    return sum;
  }
  /** \brief sum Tr(q A). */
  [[nodiscard]] double pairing() const {
    double sum = 0.0;
    for (const auto& atom : atoms) sum += (atom.q.matrix() * atom.a.matrix()).trace().real();
    return sum;
  }
  /** \brief sum Tr(1/2 {q,S} A). */
  [[nodiscard]] double anticommutator_pairing() const {
    double sum = 0.0;
    for (const auto& atom : atoms) {
      const SignatureSpace& s = atom.q.space();
      const Matrix anti = 0.5 * (s.apply_right(atom.q.matrix()) + s.apply_left(atom.q.matrix()));
      sum += (anti * atom.a.matrix()).trace().real();
    }
    return sum;
  }
};

inline PushforwardMeasure pushforward(const OperatorMeasure& nu, const QhatEvaluator& qhat) {
  PushforwardMeasure mu;
  for (const Atom& atom : nu.atoms()) mu.atoms.push_back({atom.p, qhat(atom.p), atom.a});
  return mu;
}

/** \brief (a): the dimension constraint is inactive; (b): Tr(S mu) = f. */
enum class ConstraintCase { a, b };

inline const char* to_string(ConstraintCase c) { return c == ConstraintCase::a ? "a" : "b"; }

inline void validate_constraint_targets(double c, double f) {
  if (!(0.0 < c && c < f)) throw InvalidInput("constraint targets must satisfy 0 < c < f");
}

struct Kappa {
  double kappa1 = 0;
  double kappa2 = 0;
};

/**
 * \brief Block-scaling rates that keep the active constraints fixed to first order when adding A.
 *
 * The total is conjugated by diag((1 + k1 t) 1, (1 + k2 t) 1) while t A is added. Case b assumes Tr(S total) = f.
 */
inline Kappa kappa_coefficients(ConstraintCase which, const KreinOperator& a, double c, double f) {
  validate_constraint_targets(c, f);
  const double tr = a.trace();
  if (which == ConstraintCase::a) {
    const double k = -tr / (2.0 * c);
    return {k, k};
  }
  const double str = a.signed_trace();
  return {-(str + tr) / (2.0 * (f + c)), (tr - str) / (2.0 * (f - c))};
}

struct LagrangeParameters {
  double alpha = 0;
  double beta = 0;
  ConstraintCase which = ConstraintCase::a;
};

/** \brief Multipliers from the push-forward measure; the case is decided by Tr(S mu) against f. */
inline LagrangeParameters lagrange_parameters(const PushforwardMeasure& mu, const SignatureSpace& space, double c,
                                              double f, double relative_band = Tolerances{}.constraint) {
  validate_constraint_targets(c, f);
  const double signed_total = mu.total(space).signed_trace();
  const double band = relative_band * f;
  if (signed_total > f + band) throw InfeasibleError("Tr(S mu) exceeds f");
  const double t1 = mu.pairing();
  if (signed_total < f - band) return {t1 / c, 0.0, ConstraintCase::a};
  const double t2 = mu.anticommutator_pairing();
  const double denom = f * f - c * c;
  return {(f * t2 - c * t1) / denom, (f * t1 - c * t2) / denom, ConstraintCase::b};
}

/**
 * \brief Support gap of a symmetric operator B.
 *
 * The largest g such that B - t is positive for every |t| <= g. For positive B this is the smallest
 * modulus of its (real) spectrum, each spectral point then having a definite eigenspace of the matching sign.
 * Non-positive B, or positive B with a kernel, give 0.
 */
inline double support_gap(const KreinOperator& b, double tol = Tolerances{}.psd) {
  const Matrix h = hermitian_part(b.hermitian_form());
  const double scale = spectral_norm(h);
  if (scale == 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> hes(h, Eigen::EigenvaluesOnly);
  if (hes.eigenvalues()(0) < -tol * scale || !is_symmetric(b, tol)) return 0.0;
  const Matrix m = detail::hermitian_sqrt(h);
  const Matrix k = hermitian_part(m * b.space().apply_left(m.adjoint()));
  Eigen::SelfAdjointEigenSolver<Matrix> kes(k, Eigen::EigenvaluesOnly);
  return kes.eigenvalues().cwiseAbs().minCoeff();
}

inline KreinOperator shifted(const KreinOperator& q, double alpha, double beta) {
  const SignatureSpace& s = q.space();
  const Eigen::Index dim = s.dimension();
  return {s, q.matrix() - alpha * Matrix::Identity(dim, dim) - beta * s.signature()};
}

struct ProbeValue {
  Momentum p;
  double psd_margin = 0;  ///< lowest eigenvalue of S (Qhat - alpha - beta S)
  double gap = 0;         ///< support gap g(p)
};

struct SupportResidual {
  size_t atom = 0;
  Momentum p;
  double left = 0;      ///< ||(Qhat - alpha - beta S) A||
  double right = 0;     ///< ||A (Qhat - alpha - beta S)||
  double relative = 0;  ///< max(left, right) / (qhat_scale * max_j ||A_j||)
  double gap = 0;
};

/** \brief First-order optimality report for a measure and a Qhat field. */
struct ELReport {
  static constexpr int version = 1;
  double alpha = 0;
  double beta = 0;
  ConstraintCase which = ConstraintCase::a;
  double c = 0;
  double f = 0;
  ConstraintValues constraints;
  double action = 0;
  double tail_ratio = 0;
  double qhat_scale = 0;  ///< max ||Qhat|| over probes and support
  std::vector<ProbeValue> probes;
  std::vector<SupportResidual> residuals;

  [[nodiscard]] double min_margin() const {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& p : probes) out = std::min(out, p.psd_margin);
    return out;
  }
  [[nodiscard]] double min_relative_margin() const {
    return qhat_scale > 0.0 ? min_margin() / qhat_scale : min_margin();
  }
  [[nodiscard]] double max_relative_residual() const {
    double out = 0.0;
    for (const auto& r : residuals) out = std::max(out, r.relative);
    return out;
  }
  [[nodiscard]] double min_gap() const {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& p : probes) out = std::min(out, p.gap);
    for (const auto& r : residuals) out = std::min(out, r.gap);
    return out;
  }
  [[nodiscard]] double max_support_gap() const {
    double out = 0.0;
    for (const auto& r : residuals) out = std::max(out, r.gap);
    return out;
  }
};

/**
 * \brief Evaluates both parts of the Euler-Lagrange conditions.
 *
 * Margins are recorded at every probe; the annihilation products at every atom whose norm exceeds
 * zero_tol times the largest atom norm.
 */
inline ELReport el_residuals(const OperatorMeasure& nu, const QhatEvaluator& qhat, double alpha, double beta,
                             const std::vector<Momentum>& probes, const Tolerances& tol = {}) {
  ELReport report;
  report.alpha = alpha;
  report.beta = beta;
  double atom_scale = 0.0;
  for (const Atom& atom : nu.atoms()) atom_scale = std::max(atom_scale, atom.a.norm());

  for (const Momentum& p : probes) {
    const KreinOperator q = qhat(p);
    report.qhat_scale = std::max(report.qhat_scale, q.norm());
    const KreinOperator b = shifted(q, alpha, beta);
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(b.hermitian_form()), Eigen::EigenvaluesOnly);
    report.probes.push_back({p, es.eigenvalues()(0), support_gap(b, tol.psd)});
  }
  std::vector<std::pair<size_t, KreinOperator>> shifted_at_support;
  for (size_t j = 0; j < nu.size(); ++j) {
    const Atom& atom = nu.atoms()[j];
    if (atom.a.norm() <= tol.zero * atom_scale) continue;
    const KreinOperator q = qhat(atom.p);
    report.qhat_scale = std::max(report.qhat_scale, q.norm());
    shifted_at_support.emplace_back(j, shifted(q, alpha, beta));
  }
  const double denom = std::max(report.qhat_scale * atom_scale, std::numeric_limits<double>::min());
  for (const auto& [j, b] : shifted_at_support) {
    const Atom& atom = nu.atoms()[j];
    SupportResidual r;
    r.atom = j;
    r.p = atom.p;
    r.left = spectral_norm(b.matrix() * atom.a.matrix());
    r.right = spectral_norm(atom.a.matrix() * b.matrix());
    r.relative = std::max(r.left, r.right) / denom;
    r.gap = support_gap(b, tol.psd);
    report.residuals.push_back(r);
  }
  return report;
}

/**
 * \brief Full report for a supplied Qhat: multipliers from the push-forward, residuals on the probes, constraint
 * values. Action and tail ratio are left at zero.
 */
inline ELReport verify_el(const OperatorMeasure& nu, const QhatEvaluator& qhat, double c, double f,
                          const std::vector<Momentum>& probes, const Tolerances& tol = {}) {
  const LagrangeParameters lp = lagrange_parameters(pushforward(nu, qhat), nu.space(), c, f, tol.constraint);
  ELReport report = el_residuals(nu, qhat, lp.alpha, lp.beta, probes, tol);
  report.which = lp.which;
  report.c = c;
  report.f = f;
  report.constraints = constraint_values(nu);
  return report;
}

/** \brief Full report with Qhat taken from the action's own gradient field. */
inline ELReport verify_el(const OperatorMeasure& nu, const GradientField& field, double c, double f,
                          const std::vector<Momentum>& probes, const Tolerances& tol = {}) {
  ELReport report = verify_el(nu, qhat_evaluator(field), c, f, probes, tol);
  report.action = field.action();
  report.tail_ratio = field.tail_ratio();
  return report;
}

/** \brief beta <= tol, the sign condition on the dimension multiplier. */
inline bool beta_sign_check(const ELReport& report, double tol = 1e-12) { return report.beta <= tol; }

/** \brief CSV rows p0,p1,p2,p3,g,psd_margin. */
inline void write_probe_csv(std::ostream& out, const ELReport& report) {
  out.precision(17);
  out << "p0,p1,p2,p3,g,psd_margin\n";
  for (const auto& pv : report.probes)
    out << pv.p(0) << ',' << pv.p(1) << ',' << pv.p(2) << ',' << pv.p(3) << ',' << pv.gap << ',' << pv.psd_margin
        << '\n';
}

}  // namespace hcap
