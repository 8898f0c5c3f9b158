#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hcap {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Momentum = Eigen::Vector4d;
using Position = Eigen::Vector4d;

/** \brief Default numerical tolerances. Relative ones are scaled by an operator norm at the call site. */
struct Tolerances {
  double psd = 1e-10;
  double herm = 1e-10;
  double zero = 1e-8;
  double gap = 1e-7;
  double recon = 1e-9;
  double constraint = 1e-8;
  double el = 1e-6;
};

enum class ErrorKind { validation, numerical };

/** \brief Base of all library errors; the kind decides the CLI exit code. */
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/** \brief Raised when a perturbation parameter is unusable; carries a value worth retrying with. */
class RetryableEpsilon : public NumericalFailure {
 public:
  RetryableEpsilon(const std::string& what, double suggested)
      : NumericalFailure(what), suggested_(suggested) {}
  [[nodiscard]] double suggested_epsilon() const noexcept { return suggested_; }

 private:
  double suggested_;
};

class NonsmoothPoint : public NumericalFailure {
 public:
  NonsmoothPoint(const std::string& what, const Position& xi) : NumericalFailure(what), xi_(xi) {}
  [[nodiscard]] const Position& xi() const noexcept { return xi_; }

 private:
  Position xi_;
};

class RestorationError : public NumericalFailure {
 public:
  explicit RestorationError(const std::string& what) : NumericalFailure(what) {}
};

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace hcap
