#pragma once

#include <span>
#include <vector>

#include "ofdmtoa/numeric.hpp"

namespace ofdmtoa {

/// Gauss-Hermite rule rescaled for expectations over a circular complex Gaussian.
///
/// `nodes()` are the physicists' Hermite roots; `weights()` are normalized so that
/// sum_i w[i] = 1, which makes sum_i w[i] f(sigma * x[i]) the expectation of f(X)
/// for X ~ N(0, sigma^2 / 2), i.e. one real dimension of CN(0, sigma^2). The tensor
/// product over (I, Q) therefore sums to 1. Exact for polynomials of degree <= 2N-1.
class GaussHermiteRule {
 public:
  explicit GaussHermiteRule(int order);

  int order() const { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  /// E[f(v)] for v ~ CN(mean, sigma2) using the 2-D tensor rule.
  template <class F>
  double expect(cdouble mean, double sigma2, F&& f) const {
    const double s = std::sqrt(sigma2);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      double row = 0.0;
      for (std::size_t q = 0; q < nodes_.size(); ++q)
        row += weights_[q] * f(mean + cdouble{s * nodes_[i], s * nodes_[q]});
      acc += weights_[i] * row;
    }
    return acc;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace ofdmtoa
