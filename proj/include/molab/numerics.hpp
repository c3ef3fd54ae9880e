#pragma once

// Small numerical building blocks shared by the solvers.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace molab {

/// Not-a-knot cubic spline through (x_i, y_i), x strictly ascending.
/// Evaluation outside [x_0, x_{n-1}] extends the end polynomials.
class CubicSpline {
public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  bool empty() const { return x_.empty(); }
  const std::vector<double> &knots() const { return x_; }
  const std::vector<double> &values() const { return y_; }

private:
  std::size_t interval(double x) const;

  std::vector<double> x_, y_, m_; // m_ = second derivatives at knots
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule &gauss_legendre(int order);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  int panels = 0;
};

/// Adaptive Gauss-Legendre panels: a panel is accepted when the 20-point rule
/// on it agrees with the sum over its two halves to rel_tol * |total| + abs_tol.
QuadratureResult integrate_adaptive(const std::function<double(double)> &f, double a, double b,
                                    double rel_tol = 1e-9, double abs_tol = 1e-14, int max_depth = 30);

struct BandedEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors; // columns
};

/// Lowest `count` eigenpairs of a symmetric band matrix stored in LAPACK upper
/// band layout: band(kd + i - j, j) = A(i, j) for max(0, j - kd) <= i <= j.
BandedEigen lowest_band_eigenpairs(const Eigen::MatrixXd &band, int count, bool vectors);

/// Central finite-difference weights of the given order for the first and
/// second derivative on a uniform grid, stencil offsets -p..p.
std::vector<double> central_first_derivative_weights(int half_width);
std::vector<double> central_second_derivative_weights(int half_width);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(std::span<const double> x, std::span<const double> y);

/// Golden-section/parabolic (Brent) minimisation on [a, b].
struct Minimum {
  double x = 0.0;
  double f = 0.0;
};
Minimum brent_minimize(const std::function<double(double)> &f, double a, double b, double tol = 1e-10);

/// Bisection root on [a, b] with f(a) f(b) <= 0.
double bisect_root(const std::function<double(double)> &f, double a, double b, double tol = 1e-13, int max_iter = 200);

} // namespace molab
