#pragma once

// Full internal three-particle problem (two nuclei, one electron) and its
// two-particle reductions, solved variationally with explicitly correlated
// Gaussians. J = 0 only.

#include "molab/system_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace molab {

/// Internal Hamiltonian over (t, t_e) with nucleus g at -alpha_g t.
struct ThreeBodyHamiltonian {
  OperatorDescriptor descriptor;
  double alpha1 = 0.5;
  double alpha2 = -0.5;
  bool homonuclear = false;
};

/// Requires two nuclei and one electron. Masses may be the infinite sentinel;
/// the descriptor is then flagged non_self_adjoint_risk.
ThreeBodyHamiltonian build_internal_hamiltonian(const MolecularSystem &system);

/// One primitive: |t|^(2 power) exp(-sum_k a_k r_k^2), r_k the interparticle
/// distance of the k-th Coulomb term of the descriptor (same order).
struct EcgTerm {
  std::vector<double> exponents;
  int power = 0;
};

struct CorrelatedGaussianBasis {
  std::vector<EcgTerm> terms;
  std::vector<std::string> pair_labels;
  std::uint64_t seed = 0;
  bool symmetrized = false;

  std::size_t size() const { return terms.size(); }
  std::string json() const;
  static CorrelatedGaussianBasis from_json(const std::string &text);
};

struct VariationalConfig {
  int terms = 200;
  int candidates = 64;
  std::uint64_t seed = 42;
  // log-uniform sampling ranges: electron-particle pairs, heavy pair
  double electronic_lo = 1e-3, electronic_hi = 1e3;
  double pair_lo = 1e-1, pair_hi = 1e5;
  // the heavy-pair prefactor power is chosen so the term peaks at a
  // separation drawn uniformly from [peak_lo, peak_hi]
  double peak_lo = 1.0, peak_hi = 3.5;
  int max_power = 250;
  int states = 1;          // objective: sum of the lowest `states` energies
  int refine_sweeps = 2;
  int refine_candidates = 12;
  double refine_spread = 0.3; // log-normal width of exponent perturbations
  double dependency_threshold = 1e-7;
  bool probe_mode = false;
  int threads = 1;
};

struct VariationalResult {
  double energy = 0.0;
  std::vector<double> energies;       // lowest `states`
  Eigen::VectorXd coefficients;       // ground state over normalised (symmetrised) terms
  CorrelatedGaussianBasis basis;
  double kinetic = 0.0;               // <T>
  double potential = 0.0;             // <V>
  double virial = 0.0;                // <V>/<T>
  std::vector<double> history;        // objective after every growth step, then every refinement sweep
  std::vector<double> virial_history; // ratio after every growth step
  double threshold = 0.0;             // lowest two-body breakup
  bool bound = false;
  double condition = 0.0;             // overlap condition number of the final basis
  std::vector<std::string> diagnostics;

  std::string json() const;
};

/// Stochastic growth of a correlated Gaussian basis (best of `candidates`
/// random terms per step) followed by coordinate-descent refinement. Nuclear
/// exchange symmetry is imposed when the descriptor has it. Deterministic for a
/// fixed seed and config, independent of `threads`.
/// Throws NonSelfAdjointRisk for a zero kinetic coefficient unless probe_mode.
VariationalResult solve_variational(const OperatorDescriptor &descriptor, const VariationalConfig &config = {});

/// Energies and <V>/<T> of a fixed basis.
VariationalResult evaluate_basis(const OperatorDescriptor &descriptor, const CorrelatedGaussianBasis &basis,
                                 int states = 1);

double virial_ratio(const VariationalResult &result);

/// Lowest two-body breakup energy: min over attractive pairs of
/// -q^2 / (2 w^T K w), and 0.
double breakup_threshold(const OperatorDescriptor &descriptor);

enum class ScanMode { Atomic, Molecular };

struct ScanPoint {
  double lambda = 1.0; // infinite allowed
  double E0 = 0.0;
  double E1 = 0.0;
  double spacing = 0.0;
  double limit = 0.0;  // atomic: mu-scaled two-body value
  std::string status;  // OK, NON_SELF_ADJOINT_RISK, FAILED: ...
};

struct ScanReport {
  ScanMode mode = ScanMode::Molecular;
  std::vector<ScanPoint> points;
  double spacing_exponent = 0.0; // molecular: log-log slope of E1 - E0 against lambda
  double max_limit_deviation = 0.0; // atomic: max |E0 - limit| over finite lambda
  std::string csv() const;
  std::string json() const;
};

/// Atomic: a one-nucleus, one-electron system whose nuclear mass is multiplied
/// by lambda; E0 must approach the two-body value -mu Z^2 / 2.
/// Molecular: both nuclear masses scale by lambda; the lowest two J = 0 levels
/// give the vibrational spacing. lambda = infinity reports NON_SELF_ADJOINT_RISK.
ScanReport mass_scan(const MolecularSystem &system, const std::vector<double> &lambdas, ScanMode mode,
                     const VariationalConfig &config = {});

} // namespace molab
