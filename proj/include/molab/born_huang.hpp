#pragma once

// Born expansion over clamped-nuclei states: numerical derivative couplings,
// coupled radial equations and the adiabatic (diagonal) approximation.

#include "molab/clamped_nuclei.hpp"
#include "molab/nuclear_motion.hpp"

#include <optional>
#include <string>
#include <vector>

namespace molab {

/// Electron origin at the centre of nuclear mass; nucleus 1 at -w2 t, nucleus 2 at +w1 t.
struct DiatomicFrame {
  double w1 = 0.5, w2 = 0.5;
  double Z1 = 1.0, Z2 = 1.0;
  static DiatomicFrame of(const MolecularSystem &system);
  Eigen::Vector3d nucleus1(const Eigen::Vector3d &t) const { return -w2 * t; }
  Eigen::Vector3d nucleus2(const Eigen::Vector3d &t) const { return w1 * t; }
};

struct CouplingMatrix {
  std::vector<double> r;
  int channels = 0;
  std::vector<Eigen::MatrixXd> F; // <phi_m | d/dr phi_n>
  std::vector<Eigen::MatrixXd> G; // <phi_m | d^2/dr^2 phi_n>
  std::vector<std::vector<double>> energies; // [channel][point], total energy
  std::vector<std::string> labels;
  double Z1 = 1.0, Z2 = 1.0;
  double effective_mass = 1.0;
  double min_neighbour_overlap = 1.0;

  /// Channel energies packaged as a potential curve.
  PotentialCurve curves() const;
  /// r, F_01, ..., G_00, G_01, ... (upper triangle of F, all of G)
  std::string csv() const;
};

struct CouplingOptions {
  double step = 1e-3;
  std::optional<Parity> manifold; // restrict channels to one parity (homonuclear)
  BasisConfig basis;
  double effective_mass = 1.0;
  double phase_tolerance = 0.9;
};

/// F and G on the grid by Richardson-extrapolated central differences of
/// overlaps between neighbouring geometries. Channels follow states by maximum
/// overlap along the grid, with signs locked. Throws SolverError when a state
/// cannot be followed (|overlap| < phase_tolerance).
CouplingMatrix coupling_matrix(const MolecularSystem &system, const std::vector<double> &r_grid, int n_channels,
                               const CouplingOptions &options = {});

struct ChannelSolution {
  std::vector<double> energies;
  std::vector<Eigen::MatrixXd> amplitudes;          // per level: points x channels
  std::vector<std::vector<double>> channel_weights; // per level
  int channel_count = 0;
  RadialGrid grid;
  double hermiticity_residual = 0.0;
};

struct CoupledOptions {
  bool couplings = true; // false: drop F and G entirely
  bool vectors = false;
};

/// Grid diagonalisation of
///   -1/(2 mu) [d^2 + F d + d F + (G + G^T)/2] + E_n(r)
/// over the first `channel_count` channels, interleaved by grid point.
ChannelSolution solve_coupled(const PotentialCurve &curves, const CouplingMatrix &couplings, double mu,
                              int channel_count, int n_levels, const RadialGrid &grid,
                              const CoupledOptions &options = {});

/// Diagonal Born-Oppenheimer correction of one state: Q_rr = <d_r phi|d_r phi>
/// and, optionally, the perpendicular term Q_perp = <d_y phi|d_y phi> that the
/// two rotational directions of t contribute for J = 0.
struct DiagonalCorrection {
  std::vector<double> r;
  std::vector<double> radial;
  std::vector<double> perpendicular;
  double effective_mass = 1.0;
  /// Q_rr + 2 Q_perp on the grid (Q_perp omitted when not computed).
  std::vector<double> total() const;
};

DiagonalCorrection diagonal_correction(const MolecularSystem &system, const std::vector<double> &r_grid,
                                       bool perpendicular, const CouplingOptions &options = {});

/// Single channel on E_0(r) + correction(r) / (2 mu). A null correction
/// reproduces solve_radial.
ChannelSolution adiabatic_solve(const PotentialCurve &curve, const DiagonalCorrection *correction, double mu,
                                int n_levels, const RadialGrid &grid = {});

/// Full adiabatic ground level of a one-electron diatomic: electron reduced
/// mass in the clamped energies, radial and perpendicular diagonal corrections.
/// A variational upper bound to the exact J = 0 ground energy.
struct AdiabaticBound {
  double energy = 0.0;
  double bo_energy = 0.0; // same grid, unit electron mass, no correction
  PotentialCurve curve;   // with the reduced electron mass
  DiagonalCorrection correction;
};
AdiabaticBound adiabatic_ground_level(const MolecularSystem &system, const std::vector<double> &r_grid,
                                      const RadialGrid &grid, const BasisConfig &basis = {});

} // namespace molab
