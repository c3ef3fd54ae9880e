#pragma once

// Clamped-nuclei one-electron problem: discrete electronic energies E_k(r)
// of a two-centre Coulomb field and the resulting potential curves.

#include "molab/gaussian.hpp"
#include "molab/system_model.hpp"

#include <memory>
#include <string>
#include <vector>

namespace molab {

enum class Parity { None, Gerade, Ungerade };
const char *parity_name(Parity p);

/// Even-tempered sigma-type Gaussian set on both nuclei and the bond midpoint.
/// Exponents are for unit electron mass and are scaled by m_eff^2.
struct BasisConfig {
  int exponents = 16;
  double ratio = 2.2;
  double smallest = 0.02;
  bool p_shell = true;
  bool d_shell = false;
  bool midpoint = true;
  // Midpoint shells take this many exponents from the diffuse end.
  int midpoint_exponents = 12;
  double overlap_threshold = 1e-10;
};

using Basis = std::vector<GaussianFunction>;

struct ElectronicState {
  double r = 0.0;
  int index = 0;
  double energy_electronic = 0.0;
  double energy_total = 0.0;
  Parity symmetry = Parity::None;
  Eigen::VectorXd coefficients;
  std::shared_ptr<const Basis> basis;
};

struct ElectronicSolution {
  std::vector<ElectronicState> states;
  std::vector<std::string> warnings;
  double condition = 0.0; // largest/smallest retained overlap eigenvalue
  int dropped = 0;        // functions removed by canonical orthogonalisation
};

/// One electron of mass m_eff in the field of Z1 at `a` and Z2 at `b`.
/// The basis is oriented along b - a; parity is taken through the midpoint.
ElectronicSolution solve_geometry(const Eigen::Vector3d &a, const Eigen::Vector3d &b, double Z1, double Z2,
                                  double effective_mass, int n_states, const BasisConfig &config = {});

/// Nuclei at -r/2 and +r/2 on the z axis.
ElectronicSolution solve_two_center(double r, double Z1, double Z2, double effective_mass, int n_states,
                                    const BasisConfig &config = {});

/// Clamped descriptor over one electron coordinate: every Coulomb term either
/// couples the electron to a fixed point or is a constant.
ElectronicSolution solve_clamped(const OperatorDescriptor &descriptor, int n_states, const BasisConfig &config = {});

/// <a|b> between states possibly living in different bases.
double state_overlap(const ElectronicState &a, const ElectronicState &b);

struct PotentialCurve {
  std::vector<double> r;
  std::vector<std::vector<double>> energies; // [state][point], total energy; NaN if not bound
  std::vector<std::vector<Parity>> symmetry; // [state][point]
  std::vector<double> threshold;             // Lambda(r) = Z1 Z2 / r
  std::vector<std::string> labels;
  double V0 = 0.0;
  double r_min = 0.0;
  bool has_minimum = false;
  double Z1 = 1.0, Z2 = 1.0;
  double effective_mass = 1.0;
  BasisConfig basis;
  std::vector<std::string> warnings;

  std::size_t state_count() const { return energies.size(); }
  /// Electronic (no nuclear repulsion) energies of state k.
  std::vector<double> electronic(std::size_t k) const;
  std::string csv() const;
  std::string sidecar_json() const;
};

/// Scan r over the grid for a diatomic one-electron system. V0 and rMin come
/// from a parabola through the lowest ground-curve sample and its neighbours.
PotentialCurve potential_curve(const MolecularSystem &system, const std::vector<double> &r_grid, int n_states,
                               const BasisConfig &config = {}, double effective_mass = 1.0);

/// Locate an interior minimum of `energies` on `r`. Returns false at an endpoint.
bool parabolic_minimum(const std::vector<double> &r, const std::vector<double> &energies, double &r_min, double &v0);

/// Exact one-electron scaling E(mu; r/mu) = mu E(1; r), mu = (1 + 1/M)^-1.
/// Throws for more than one electron.
ElectronicState finite_mass_rescale(const ElectronicState &state, const MolecularSystem &system);
PotentialCurve finite_mass_rescale(const PotentialCurve &curve, const MolecularSystem &system);

/// Electron reduced-mass factor (1 + 1/M)^-1, 1 when any nucleus is clamped.
double electron_mass_factor(const MolecularSystem &system);

} // namespace molab
