#pragma once

// Particles, internal coordinates and the symbolic operator representation
// every Hamiltonian in the library is assembled from. Hartree atomic units
// throughout (hbar = m_e = e = 4 pi eps0 = 1).

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace molab {

/// Sentinel for a nucleus clamped in space. Only legal in limits taken after
/// the transformation to internal coordinates.
inline constexpr double kInfiniteMass = std::numeric_limits<double>::infinity();

/// Proton mass in electron masses.
inline constexpr double kProtonMass = 1836.15267343;

inline bool is_infinite_mass(double m) { return m == kInfiniteMass; }

/// 1/m with 1/infinity = 0.
inline double inverse_mass(double m) { return is_infinite_mass(m) ? 0.0 : 1.0 / m; }

struct Particle {
  std::string label;
  double mass = 1.0;   // electron masses
  double charge = 0.0; // units of e, electrons are -1
};

class MolecularSystem {
public:
  MolecularSystem() = default;

  const std::vector<Particle> &nuclei() const { return nuclei_; }
  const Particle &nucleus(std::size_t g) const { return nuclei_.at(g); }
  std::size_t nuclear_count() const { return nuclei_.size(); }
  int electron_count() const { return electron_count_; }
  std::size_t particle_count() const { return nuclei_.size() + static_cast<std::size_t>(electron_count_); }

  /// M0 in kappa = (m/M0)^(1/4). Mean of the finite nuclear masses unless set.
  double reference_mass() const { return reference_mass_; }
  /// Sum of nuclear masses (infinite if any nucleus is clamped).
  double total_nuclear_mass() const;
  /// Nuclear plus electron masses.
  double total_mass() const;

  bool any_infinite_mass() const;
  bool all_infinite_mass() const;
  bool homonuclear() const;

  /// Copy with nucleus g's mass replaced.
  MolecularSystem with_nuclear_mass(std::size_t g, double mass) const;
  /// Copy with nuclei g and h exchanged.
  MolecularSystem with_swapped_nuclei(std::size_t g, std::size_t h) const;

  friend MolecularSystem build_system(const std::vector<std::pair<double, double>> &,
                                      int, std::optional<double>);

private:
  std::vector<Particle> nuclei_;
  int electron_count_ = 0;
  double reference_mass_ = 1.0;
};

/// Validates (mass, charge) pairs for the nuclei and the electron count.
/// Throws InvalidInput on non-positive mass, negative nuclear charge or no nuclei.
MolecularSystem build_system(const std::vector<std::pair<double, double>> &nuclei,
                             int electron_count,
                             std::optional<double> reference_mass = std::nullopt);

struct Kappa {
  double value = 0.0;
  bool infinite_reference = false; // M0 infinite, value is exactly 0
};

/// kappa = (1/M0)^(1/4) in units where the electron mass is 1.
Kappa kappa(const MolecularSystem &system);

// ---------------------------------------------------------------------------
// Operator descriptors

/// A position written as sum_i row(i) * x_i + offset, x_i the descriptor's
/// coordinate vectors. Clamped positions live entirely in the offset.
struct CoulombPoint {
  Eigen::VectorXd row;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// prefactor / |a - b|
struct CoulombTerm {
  double prefactor = 0.0;
  CoulombPoint a;
  CoulombPoint b;
  std::string label;

  Eigen::VectorXd difference_row() const { return a.row - b.row; }
  Eigen::Vector3d difference_offset() const { return a.offset - b.offset; }
};

struct DescriptorFlags {
  /// Some coordinate enters a Coulomb term but carries no kinetic energy.
  bool non_self_adjoint_risk = false;
};

/// -1/2 sum_ij K_ij grad_i . grad_j + sum_k q_k/|a_k - b_k| + constant.
struct OperatorDescriptor {
  int coordinate_count = 0;
  Eigen::MatrixXd kinetic;
  std::vector<CoulombTerm> coulomb;
  double constant_shift = 0.0;
  std::vector<std::string> coordinate_labels;
  DescriptorFlags flags;

  /// Throws InvalidInput if K is not symmetric PSD or a term has coincident points.
  void validate() const;
  /// Recomputes flags.non_self_adjoint_risk from the kinetic form and Coulomb terms.
  void update_flags();
};

enum class NuclearCoordinates { DifferencesToFirst, Jacobi };
enum class FrameTag { CenterOfNuclearMass };

/// Map from lab coordinates to internal ones (centre-of-mass row excluded).
struct InternalFrameMap {
  FrameTag frame = FrameTag::CenterOfNuclearMass;
  NuclearCoordinates nuclear_choice = NuclearCoordinates::DifferencesToFirst;
  /// (n-1) x n; rows are nuclear internal coordinates then electrons.
  Eigen::MatrixXd transform;
  /// (A-1) x (A-1) nuclear block of the internal kinetic form.
  Eigen::MatrixXd inverse_mass;
  /// A x (A-1): nucleus g relative to the centre of nuclear mass, in t^n.
  Eigen::MatrixXd nuclear_positions;
  int nuclear_coordinates = 0;
  int electron_coordinates = 0;
};

/// Lab-frame Coulomb Hamiltonian over n = A + N particle coordinates, nuclei first.
/// Throws InvalidInput if any mass is infinite.
OperatorDescriptor lab_hamiltonian(const MolecularSystem &system);

/// Weights w_g with X_cnm = sum_g w_g x_g; limit rule shares weight equally among
/// clamped nuclei when any mass is infinite.
Eigen::VectorXd nuclear_mass_weights(const MolecularSystem &system);

/// Rows defining t^n over the A nuclear positions.
Eigen::MatrixXd nuclear_coordinate_rows(const MolecularSystem &system, NuclearCoordinates choice);

/// (A-1) x (A-1) inverse mass matrix V diag(1/m) V^T. Throws for A < 2.
Eigen::MatrixXd inverse_mass_matrix(const MolecularSystem &system, NuclearCoordinates choice);

struct SeparatedHamiltonian {
  OperatorDescriptor center_of_mass;
  OperatorDescriptor internal;
  InternalFrameMap map;
};

/// Exact congruence transform of a lab descriptor into centre-of-mass and
/// internal (centre-of-nuclear-mass frame) parts.
SeparatedHamiltonian separate_center_of_mass(const OperatorDescriptor &lab,
                                             const MolecularSystem &system,
                                             NuclearCoordinates choice = NuclearCoordinates::DifferencesToFirst);

/// Internal Hamiltonian built directly in the centre-of-nuclear-mass frame.
/// Accepts the infinite-mass sentinel (kinetic coefficients take their limits).
SeparatedHamiltonian internal_hamiltonian(const MolecularSystem &system,
                                          NuclearCoordinates choice = NuclearCoordinates::DifferencesToFirst);

/// Full n x n transform: centre-of-mass row followed by map.transform.
Eigen::MatrixXd full_transform(const MolecularSystem &system, const InternalFrameMap &map);

/// Max elementwise |V diag(1/m) V^T - (T_CM (+) K_internal)|.
double congruence_residual(const OperatorDescriptor &lab, const SeparatedHamiltonian &sep,
                           const MolecularSystem &system);

} // namespace molab
