#pragma once

// Nuclear motion on a fixed potential curve and the kappa-expansion of the
// vibration-rotation levels.

#include "molab/clamped_nuclei.hpp"
#include "molab/numerics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace molab {

/// Smooth total energy E_k(r) from a sampled curve: spline of the electronic
/// energy plus Z1 Z2 / r, with an r^-4 tail to the atomic limit beyond the last sample.
class CurveInterpolant {
public:
  CurveInterpolant() = default;
  CurveInterpolant(const PotentialCurve &curve, std::size_t state = 0);

  double operator()(double r) const;
  double derivative(double r) const;
  double r_front() const { return r_front_; }
  double r_back() const { return r_back_; }
  double asymptote() const { return asymptote_; }

private:
  CubicSpline spline_; // electronic energy
  double zz_ = 1.0;
  double r_front_ = 0.0, r_back_ = 0.0;
  double asymptote_ = -0.5;
  double tail_ = 0.0; // E(r_back) - asymptote
};

struct CurveMinimum {
  double r_min = 0.0;
  double V0 = 0.0;
};
/// Brent refinement of the ground-curve minimum on the interpolant.
CurveMinimum refine_minimum(const PotentialCurve &curve, std::size_t state = 0);

struct VibRotLevel {
  int v = 0;
  int J = 0;
  double energy = 0.0;
  bool norm_converged = false;
};

/// Uniform grid of `points` interior nodes strictly between r_lo and r_hi,
/// where the wavefunction vanishes.
struct RadialGrid {
  double r_lo = 0.1;
  double r_hi = 30.0;
  int points = 4000;
  int half_width = 4;            // 8th-order central differences
  double numerov_tolerance = 1e-7;
  bool numerov_check = true;

  double step() const { return (r_hi - r_lo) / (points + 1); }
  double node(int i) const { return r_lo + (i + 1) * step(); }
};

struct RadialSolution {
  std::vector<VibRotLevel> levels;
  std::vector<double> numerov_energies;
  double max_numerov_deviation = 0.0;
  double dissociation = 0.0;
  Eigen::MatrixXd wavefunctions; // columns, unit norm in the grid sum h * sum u^2 = 1
  std::vector<std::string> diagnostics;
};

/// Lowest bound levels of -1/(2 mu) d^2/dr^2 + V(r) + J(J+1)/(2 mu r^2).
/// Throws SolverError when Numerov shooting disagrees with the grid by more than the tolerance.
RadialSolution solve_radial(const std::function<double(double)> &potential, double mu, int J, int n_levels,
                            const RadialGrid &grid = {}, bool vectors = false);
RadialSolution solve_radial(const PotentialCurve &curve, double mu, int J, int n_levels,
                            const RadialGrid &grid = {}, bool vectors = false);

/// Numerov shooting eigenvalue near `guess` on the same grid.
double numerov_eigenvalue(const std::function<double(double)> &veff, double mu, const RadialGrid &grid,
                          double guess, double bracket);

/// Symmetric band (LAPACK upper layout) of -1/(2 mu) d^2/dr^2 on the grid with
/// odd reflection at both walls.
Eigen::MatrixXd radial_kinetic_band(double mu, const RadialGrid &grid);

/// Nuclear reduced mass m1 m2 / (m1 + m2) of a diatomic.
double nuclear_reduced_mass(const MolecularSystem &system);

struct KappaExpansion {
  double V0 = 0.0;
  double r_min = 0.0;
  double k = 0.0;
  double omega = 0.0;
  double B = 0.0;
  double kappa = 0.0;
  double mu = 0.0;
  double harmonic_term = 0.0;   // omega / 2, the v = 0 zero-point energy
  double rotational_unit = 0.0; // B, multiplies J(J+1)
  double predicted_spacing = 0.0;
  double actual_spacing = 0.0;
  /// V0 + omega (v + 1/2) + B J (J + 1)
  double level(int v, int J) const { return V0 + omega * (v + 0.5) + B * J * (J + 1); }
  std::string json() const;
};

/// Harmonic/rigid-rotor expansion about rMin; k from a 5-point stencil on the
/// interpolated curve. Throws SolverError "not a minimum" for k <= 0.
KappaExpansion kappa_expansion(const PotentialCurve &curve, const MolecularSystem &system,
                               const RadialGrid &grid = {});

std::string levels_csv(const std::vector<VibRotLevel> &levels);

} // namespace molab
