#pragma once

#include <string>
#include <vector>

#include <Eigen/SVD>

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"

namespace asymptex {

enum class ResonancePolicy {
  /// Minimal-degree particular solution with no component along the
  /// homogeneous (resonant) solutions; the kernel is reported separately.
  ZeroFreeConstants,
};

struct ResolventResult {
  ExpPolySum z;
  std::vector<ExpPolySum> resonant_modes;
};

namespace detail {

// Block operator of q' + M q on polynomials q = sum_{j<=degree} q_j t^j:
// row block j reads M q_j + (j+1) q_{j+1}.
inline ComplexMat stacked_operator(const ComplexMat& m, std::size_t degree) {
  const Eigen::Index n = m.rows();
  const auto blocks = static_cast<Eigen::Index>(degree + 1);
  ComplexMat s = ComplexMat::Zero(blocks * n, blocks * n);
  for (Eigen::Index j = 0; j < blocks; ++j) {
    s.block(j * n, j * n, n, n) = m;
    if (j + 1 < blocks) {
      s.block(j * n, (j + 1) * n, n, n) =
          static_cast<double>(j + 1) * ComplexMat::Identity(n, n);
    }
  }
  return s;
}

// `scale` is the size of the data m was formed from (A and nu): a 1x1 m that
// is a rounding residue is singular although its own condition number is 1.
inline bool is_singular(const ComplexMat& m, double scale, double rel = 1e-10) {
  Eigen::JacobiSVD<ComplexMat> svd(m);
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? sv(0) : 0.0;
  return top == 0.0 || sv(sv.size() - 1) <= rel * std::max(top, scale);
}

inline double shift_scale(const ComplexMat& a, Complex nu) {
  return std::max(a.cwiseAbs().maxCoeff(), std::abs(nu));
}

// Reduced row-echelon form of the rows of `b` (kernel vectors as rows), so that
// the returned basis does not depend on how the SVD mixed a degenerate kernel.
inline ComplexMat rref_rows(ComplexMat b, double tol) {
  Eigen::Index lead = 0;
  for (Eigen::Index r = 0; r < b.rows() && lead < b.cols(); ++r) {
    Eigen::Index piv = -1;
    while (lead < b.cols()) {
      Eigen::Index best = r;
      for (Eigen::Index i = r; i < b.rows(); ++i) {
        if (std::abs(b(i, lead)) > std::abs(b(best, lead))) best = i;
      }
      if (std::abs(b(best, lead)) > tol) {
        piv = best;
        break;
      }
      ++lead;
    }
    if (piv < 0) break;
    b.row(r).swap(b.row(piv));
    b.row(r) /= b(r, lead);
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      if (i != r) b.row(i) -= b(i, lead) * b.row(r);
    }
    ++lead;
  }
  return b;
}

inline VecPoly unstack(const ComplexVec& x, Eigen::Index n) {
  VecPoly p;
  for (Eigen::Index j = 0; j * n < x.size(); ++j) p.push_back(x.segment(j * n, n));
  return p;
}

}  // namespace detail

/// Basis of the polynomial solutions q(t) e^{nu t} of z' + A z = 0, i.e. the
/// generalized eigenvectors of A for eigenvalue -nu arranged along Jordan
/// chains. Empty when A + nu I is invertible.
inline std::vector<ExpPolySum> homogeneous_modes(const ComplexMat& a, Complex nu, double rel_tol = 1e-10) {
  const Eigen::Index n = a.rows();
  const ComplexMat m = a + nu * ComplexMat::Identity(n, n);
  std::vector<ExpPolySum> modes;
  if (!detail::is_singular(m, detail::shift_scale(a, nu), rel_tol)) return modes;
  const ComplexMat s = detail::stacked_operator(m, static_cast<std::size_t>(n - 1));
  Eigen::JacobiSVD<ComplexMat> svd(s, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = rel_tol * std::max(sv(0), 1.0);
  std::vector<Eigen::Index> null_cols;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cut) null_cols.push_back(i);
  }
  if (null_cols.empty()) return modes;
  ComplexMat rows(static_cast<Eigen::Index>(null_cols.size()), s.cols());
  for (std::size_t i = 0; i < null_cols.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = svd.matrixV().col(null_cols[i]).transpose();
  }
  rows = detail::rref_rows(rows, 1e-8);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    ComplexVec v = rows.row(i).transpose();
    for (auto& c : v) {
      if (std::abs(c) < 1e-12) c = 0.0;
    }
    if (v.norm() == 0.0) continue;
    auto mode = canonicalize_exp(ExpPolySum::monomial(nu, detail::unstack(v, n)));
    if (!mode.empty()) modes.push_back(std::move(mode));
  }
  return modes;
}

/// Solves z' + A z = f symbolically for an exp-poly forcing f.
///
/// Non-resonant exponents (A + nu I invertible) use
///   z_nu = e^{nu t} sum_{k=0}^{deg p} (-1)^k (A + nu I)^{-(k+1)} p^{(k)}(t).
/// Resonant exponents solve the stacked coefficient system with the polynomial
/// degree raised by r = 1, 2, ..., n until it is consistent; the minimum-norm
/// solution has no component along the homogeneous modes, which are returned
/// in `resonant_modes`.
inline ResolventResult resolvent_solve_exp(const ComplexMat& a, const ExpPolySum& f,
                                           ResonancePolicy policy = ResonancePolicy::ZeroFreeConstants) {
  (void)policy;
  if (a.rows() != a.cols()) throw ValidationError("resolvent_solve_exp: A must be square");
  if (a.rows() != f.dim()) throw ValidationError("resolvent_solve_exp: dimension mismatch");
  const Eigen::Index n = a.rows();
  ResolventResult out{ExpPolySum(n), {}};

  for (const auto& [nu, p] : f.terms()) {
    const ComplexMat m = a + nu * ComplexMat::Identity(n, n);
    if (!detail::is_singular(m, detail::shift_scale(a, nu))) {
      Eigen::PartialPivLU<ComplexMat> lu(m);
      VecPoly z(p.size(), ComplexVec::Zero(n));
      VecPoly dk = p;
      double sign = 1.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t j = 0; j < dk.size(); ++j) {
          ComplexVec v = dk[j];
          for (std::size_t r = 0; r <= k; ++r) v = lu.solve(v);
          z[j] += sign * v;
        }
        dk = poly_derivative(dk);
        sign = -sign;
      }
      out.z.add_term(nu, z);
      continue;
    }

    const std::size_t d = p.size() - 1;
    double pnorm = 0.0;
    for (const auto& c : p) pnorm += c.squaredNorm();
    pnorm = std::sqrt(pnorm);
    bool solved = false;
    for (Eigen::Index r = 1; r <= n && !solved; ++r) {
      const std::size_t degree = d + static_cast<std::size_t>(r);
      const ComplexMat s = detail::stacked_operator(m, degree);
      ComplexVec rhs = ComplexVec::Zero(s.rows());
      for (std::size_t j = 0; j < p.size(); ++j) rhs.segment(static_cast<Eigen::Index>(j) * n, n) = p[j];
      Eigen::CompleteOrthogonalDecomposition<ComplexMat> cod(s);
      cod.setThreshold(1e-10);
      const ComplexVec x = cod.solve(rhs);
      if ((s * x - rhs).norm() < 1e-10 * std::max(pnorm, 1e-300)) {
        out.z.add_term(nu, detail::unstack(x, n));
        solved = true;
      }
    }
    if (!solved) {
      throw NumericalError("resolvent_solve_exp: no consistent degree bump within " + std::to_string(n) +
                           " extra degrees at exponent (" + std::to_string(nu.real()) + ", " +
                           std::to_string(nu.imag()) + ")");
    }
    for (auto& mode : homogeneous_modes(a, nu)) out.resonant_modes.push_back(std::move(mode));
  }
  out.z = canonicalize_exp(out.z);
  return out;
}

}  // namespace asymptex
