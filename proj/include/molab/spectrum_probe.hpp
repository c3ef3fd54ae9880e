#pragma once

// Numerical experiments on the electronic Hamiltonian H_elec, which commutes
// with the internuclear vector t: fibre expectation values, wave packets in t,
// spectrum coverage and relative-boundedness ratios.

#include "molab/born_huang.hpp"
#include "molab/clamped_nuclei.hpp"
#include "molab/system_model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace molab {

/// Radial density of |chi_sigma(t)|^2 for a normalised 3D Gaussian of
/// standard deviation sigma per component centred at b z-hat.
double packet_density(double r, double b, double sigma);
/// d/dsigma of packet_density.
double packet_density_dsigma(double r, double b, double sigma);

struct WeylProbe {
  double b = 0.0;
  int state = 0;
  std::vector<double> sigmas; // descending
  std::vector<double> means;
  std::vector<double> variances;
  double fitted_variance_exponent = 0.0;
  double extrapolated_mean = 0.0; // Richardson in sigma^2 from the two narrowest packets
  double fibre_energy = 0.0;      // E_k(b)

  std::string csv() const; // sigma,mean,variance
  std::string json() const;
};

/// Mean and variance of the fibre energy E_k(|t|) in the packet chi_sigma.
/// Throws InvalidInput if a packet's support leaves the curve's sampled range.
WeylProbe weyl_moments(const PotentialCurve &curve, double b, int state, const std::vector<double> &sigmas);

/// Same moments for an arbitrary fibre energy; `lo`, `hi` bound its domain.
WeylProbe weyl_moments(const std::function<double(double)> &fibre, double lo, double hi, double b,
                       const std::vector<double> &sigmas);

enum class ProbeMode { HElec, FullInternal };
const char *probe_mode_name(ProbeMode m);

struct CollapseTrace {
  ProbeMode mode = ProbeMode::HElec;
  double b = 0.0;
  std::vector<double> sigmas; // ascending
  std::vector<double> energies;
  std::vector<double> gradients; // dE/dsigma
  std::vector<int> gradient_signs;
  bool interior_minimum_found = false;
  double sigma_star = 0.0;
  double energy_star = 0.0;
  double nuclear_inverse_mass = 0.0; // K of the nuclear coordinate

  std::string csv() const; // sigma,energy,dE_dsigma
  std::string json() const;
};

/// <H> over the product family phi_0(t_e; t) chi_sigma(t). The descriptor is the
/// internal one of a one-electron diatomic: H_ELEC mode requires a vanishing
/// nuclear kinetic coefficient, FULL_INTERNAL a positive one and then adds the
/// packet's kinetic energy 3K/(8 sigma^2) and, if given, the diagonal
/// correction K Q(r)/2. The ground fibre energies come from `curve`.
CollapseTrace collapse_probe(const OperatorDescriptor &descriptor, const PotentialCurve &curve, double b,
                             const std::vector<double> &sigmas, ProbeMode mode,
                             const DiagonalCorrection *correction = nullptr);

/// All r with E_0(r) = E on the two monotone branches of the ground curve.
/// Branches are followed past the sampled range through the interpolant's tails.
std::vector<double> spectrum_cover(const PotentialCurve &curve, double E);

/// Product of normalised 3D Gaussians, one per descriptor coordinate, with
/// per-component standard deviation widths(i) about centers.row(i). The
/// coordinate `shrinking` takes each value of `shrink_widths` in turn.
struct TrialFamily {
  Eigen::MatrixXd centers; // n x 3
  Eigen::VectorXd widths;
  int shrinking = 0;
  std::vector<double> shrink_widths; // descending
};

struct KatoRow {
  double width = 0.0;
  double potential_norm = 0.0; // ||V f||
  double kinetic_norm = 0.0;   // ||T0 f||
  double ratio = 0.0;          // ||V f|| / (||T0 f|| + ||f||)
};

struct KatoTable {
  std::vector<KatoRow> rows;
  /// ratio(last) / ratio(width ten times the last): the final decade.
  double tail_growth = 0.0;
  bool bounded = false;   // tail_growth < 2
  bool divergent = false; // tail_growth > 5 with the ratio rising monotonically
  std::string csv() const; // width,potential_norm,kinetic_norm,ratio
  std::string json() const;
};

KatoTable kato_ratio_probe(const OperatorDescriptor &descriptor, const TrialFamily &family);

/// E[1/(|u||v|)] for jointly Gaussian 3-vectors with means mu, mv and
/// isotropic (co)variances cuu, cuv, cvv per Cartesian component.
double inverse_distance_moment(const Eigen::Vector3d &mu, const Eigen::Vector3d &mv, double cuu, double cuv,
                               double cvv);

/// Clamped descriptor selected from the internal Hamiltonian at t = b z-hat:
/// one electron coordinate, fixed nuclei, nuclear repulsion as a constant.
/// With hughes_eckart the electron keeps its 1 + 1/M kinetic coefficient.
OperatorDescriptor bo_select(const MolecularSystem &system, double b, bool hughes_eckart = false);

} // namespace molab
