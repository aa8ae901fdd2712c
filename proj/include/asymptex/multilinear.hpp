#pragma once

#include <span>
#include <string>
#include <vector>

#include "asymptex/core.hpp"

namespace asymptex {

/// A homogeneous m-linear map on C^n stored as sparse entries
/// out[i] += value * x_1[j_1] * ... * x_m[j_m].
class MultiLinearMap {
 public:
  struct Entry {
    int out = 0;
    std::vector<int> in;
    Complex value;
  };

  MultiLinearMap() = default;
  MultiLinearMap(int arity, int dim) : arity_(arity), dim_(dim) {
    if (arity < 2) throw ValidationError("multilinear map arity must be >= 2");
    if (dim < 1) throw ValidationError("multilinear map dimension must be >= 1");
  }

  int arity() const { return arity_; }
  int dim() const { return dim_; }
  const std::vector<Entry>& entries() const { return entries_; }

  MultiLinearMap& add(int out, std::vector<int> in, Complex value) {
    if (out < 0 || out >= dim_) throw ValidationError("multilinear entry output index out of range");
    if (static_cast<int>(in.size()) != arity_) {
      throw ValidationError("multilinear entry has " + std::to_string(in.size()) +
                            " input indices, arity is " + std::to_string(arity_));
    }
    for (int j : in) {
      if (j < 0 || j >= dim_) throw ValidationError("multilinear entry input index out of range");
    }
    entries_.push_back({out, std::move(in), value});
    return *this;
  }

  ComplexVec apply(std::span<const ComplexVec> args) const {
    check_args(args.size());
    ComplexVec r = ComplexVec::Zero(dim_);
    for (const auto& e : entries_) {
      Complex v = e.value;
      for (int l = 0; l < arity_; ++l) v *= args[static_cast<std::size_t>(l)](e.in[static_cast<std::size_t>(l)]);
      r(e.out) += v;
    }
    return r;
  }

  ComplexVec apply(std::initializer_list<ComplexVec> args) const {
    std::vector<ComplexVec> v(args);
    return apply(std::span<const ComplexVec>(v));
  }

  /// G_m(x) = G_m(x, ..., x).
  ComplexVec diagonal(const ComplexVec& x) const {
    std::vector<ComplexVec> args(static_cast<std::size_t>(arity_), x);
    return apply(std::span<const ComplexVec>(args));
  }

  /// Crude upper bound on the operator norm: sum of |entries| (finite by construction).
  double norm_bound() const {
    double s = 0.0;
    for (const auto& e : entries_) s += std::abs(e.value);
    return s;
  }

  bool has_real_entries(double tol = 0.0) const {
    for (const auto& e : entries_) {
      if (std::abs(e.value.imag()) > tol) return false;
    }
    return true;
  }

  void check_args(std::size_t count) const {
    if (static_cast<int>(count) != arity_) {
      throw ValidationError("multilinear map of arity " + std::to_string(arity_) + " applied to " +
                            std::to_string(count) + " arguments");
    }
  }

 private:
  int arity_ = 2;
  int dim_ = 1;
  std::vector<Entry> entries_;
};

/// The scalar map (x, y) -> c * x * y on C^1 and its higher-degree analogue.
inline MultiLinearMap scalar_power_map(int degree, Complex c = 1.0) {
  MultiLinearMap g(degree, 1);
  g.add(0, std::vector<int>(static_cast<std::size_t>(degree), 0), c);
  return g;
}

}  // namespace asymptex
