#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace asymptex {

using Complex = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point outside the domain of an iterated logarithm or complex power.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: arity, dimension or class mismatch, violated assumption.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An internal numerical failure (singular system, non-convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Exponents are snapped to this grid so that map keys stay stable under
/// accumulated rounding in long semigroup sums.
inline constexpr double kExponentGrid = 1e-12;

inline double snap(double x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite exponent");
  const double s = std::nearbyint(x / kExponentGrid) * kExponentGrid;
  return s == 0.0 ? 0.0 : s;  // no negative zero in keys
}

inline Complex snap(Complex z) { return {snap(z.real()), snap(z.imag())}; }

/// Lexicographic order on (re, im); used as the key order of canonical maps.
struct ComplexLess {
  bool operator()(const Complex& a, const Complex& b) const {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  }
};

inline ComplexVec zero_vec(Eigen::Index n) { return ComplexVec::Zero(n); }

inline bool is_real(const ComplexMat& m, double tol = 0.0) {
  return m.size() == 0 || m.imag().cwiseAbs().maxCoeff() <= tol;
}

}  // namespace asymptex
