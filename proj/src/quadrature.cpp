#include "ofdmtoa/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

namespace {

// Orthonormal Hermite recurrence at x. Returns (p_N(x), p_{N-1}(x)).
std::pair<double, double> orthonormal_hermite(int n, double x) {
  double p1 = 1.0 / std::pow(kPi, 0.25);
  double p2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = x * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
  }
  return {p1, p2};
}

}  // namespace

GaussHermiteRule::GaussHermiteRule(int order) {
  if (order < 1 || order > 200) throw ParameterError("Gauss-Hermite order must be in [1, 200]");
  const int n = order;
  nodes_.resize(n);
  weights_.resize(n);
  if (n == 1) {
    nodes_[0] = 0.0;
    weights_[0] = 1.0;
    return;
  }

  // Golub-Welsch for starting values, then Newton on the orthonormal recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);

  for (int i = 0; i < n; ++i) {
    double x = eig.eigenvalues()(i);
    double deriv = 0.0;
    for (int it = 0; it < 8; ++it) {
      const auto [p, pm1] = orthonormal_hermite(n, x);
      deriv = std::sqrt(2.0 * n) * pm1;
      const double dx = p / deriv;
      x -= dx;
      if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    const auto [p, pm1] = orthonormal_hermite(n, x);
    deriv = std::sqrt(2.0 * n) * pm1;
    nodes_[i] = x;
    weights_[i] = 2.0 / (deriv * deriv) / std::sqrt(kPi);
  }
  // Exact symmetry about zero.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (nodes_[n - 1 - i] - nodes_[i]);
    const double w = 0.5 * (weights_[n - 1 - i] + weights_[i]);
    nodes_[i] = -x;
    nodes_[n - 1 - i] = x;
    weights_[i] = weights_[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes_[n / 2] = 0.0;

  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
}

}  // namespace ofdmtoa
