#pragma once

// Cartesian Gaussian one-electron integrals (McMurchie-Davidson).

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace molab {

struct CartesianTerm {
  std::array<int, 3> powers{0, 0, 0};
  double coefficient = 1.0;
};

/// sum_k c_k (x-A)^i (y-A)^j (z-A)^k exp(-alpha |r-A|^2), normalised to 1.
struct GaussianFunction {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double exponent = 1.0;
  std::vector<CartesianTerm> terms;
};

enum class ShellKind { S, P, D };

/// Sigma-type function on `center` oriented along unit vector `axis`:
/// S = 1, P = axis.(r-A), D = (axis.(r-A))^2. Normalised.
GaussianFunction make_sigma_function(const Eigen::Vector3d &center, double exponent, ShellKind kind,
                                     const Eigen::Vector3d &axis);

/// f(2C - r) expressed as a function of the same family.
GaussianFunction inverted_through(const GaussianFunction &f, const Eigen::Vector3d &point);

/// Boys function F_m(T) for m = 0..m_max.
void boys_function(int m_max, double T, std::span<double> out);

double overlap_integral(const GaussianFunction &a, const GaussianFunction &b);
/// <a| -1/2 nabla^2 |b>
double kinetic_integral(const GaussianFunction &a, const GaussianFunction &b);
/// <a| 1/|r - C| |b>
double coulomb_integral(const GaussianFunction &a, const GaussianFunction &b, const Eigen::Vector3d &point);

Eigen::MatrixXd overlap_matrix(std::span<const GaussianFunction> bra, std::span<const GaussianFunction> ket);

} // namespace molab
