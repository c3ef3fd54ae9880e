#include "molab/system_model.hpp"

#include "molab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace molab {

double MolecularSystem::total_nuclear_mass() const {
  double m = 0.0;
  for (const auto &n : nuclei_) m += n.mass;
  return m;
}

double MolecularSystem::total_mass() const { return total_nuclear_mass() + electron_count_; }

bool MolecularSystem::any_infinite_mass() const {
  return std::any_of(nuclei_.begin(), nuclei_.end(), [](const Particle &p) { return is_infinite_mass(p.mass); });
}

bool MolecularSystem::all_infinite_mass() const {
  return std::all_of(nuclei_.begin(), nuclei_.end(), [](const Particle &p) { return is_infinite_mass(p.mass); });
}

bool MolecularSystem::homonuclear() const {
  if (nuclei_.size() != 2) return false;
  return nuclei_[0].mass == nuclei_[1].mass && nuclei_[0].charge == nuclei_[1].charge;
}

MolecularSystem MolecularSystem::with_nuclear_mass(std::size_t g, double mass) const {
  std::vector<std::pair<double, double>> spec;
  for (std::size_t i = 0; i < nuclei_.size(); ++i)
    spec.emplace_back(i == g ? mass : nuclei_[i].mass, nuclei_[i].charge);
  return build_system(spec, electron_count_);
}

MolecularSystem MolecularSystem::with_swapped_nuclei(std::size_t g, std::size_t h) const {
  MolecularSystem out = *this;
  std::swap(out.nuclei_.at(g), out.nuclei_.at(h));
  for (std::size_t i = 0; i < out.nuclei_.size(); ++i) out.nuclei_[i].label = "n" + std::to_string(i + 1);
  return out;
}

MolecularSystem build_system(const std::vector<std::pair<double, double>> &nuclei, int electron_count,
                             std::optional<double> reference_mass) {
  if (nuclei.empty()) throw InvalidInput("zero nuclei: at least one nucleus is required");
  if (electron_count < 0) throw InvalidInput("negative electron count");
  MolecularSystem sys;
  double finite_sum = 0.0;
  int finite_count = 0;
  for (std::size_t g = 0; g < nuclei.size(); ++g) {
    const auto [mass, charge] = nuclei[g];
    if (!(mass > 0.0)) throw InvalidInput("non-positive mass for nucleus " + std::to_string(g + 1));
    if (!std::isfinite(charge)) throw InvalidInput("non-finite charge for nucleus " + std::to_string(g + 1));
    if (charge < 0.0) throw InvalidInput("negative nuclear charge for nucleus " + std::to_string(g + 1));
    if (charge == 0.0) throw InvalidInput("nuclear charge must be positive for nucleus " + std::to_string(g + 1));
    if (!is_infinite_mass(mass)) {
      finite_sum += mass;
      ++finite_count;
    }
    sys.nuclei_.push_back({"n" + std::to_string(g + 1), mass, charge});
  }
  sys.electron_count_ = electron_count;
  if (reference_mass) {
    if (!(*reference_mass > 0.0)) throw InvalidInput("non-positive reference mass");
    sys.reference_mass_ = *reference_mass;
  } else {
    sys.reference_mass_ = finite_count > 0 ? finite_sum / finite_count : kInfiniteMass;
  }
  return sys;
}

Kappa kappa(const MolecularSystem &system) {
  const double m0 = system.reference_mass();
  if (is_infinite_mass(m0)) return {0.0, true};
  return {std::pow(1.0 / m0, 0.25), false};
}

// ---------------------------------------------------------------------------

void OperatorDescriptor::validate() const {
  const int n = coordinate_count;
  if (kinetic.rows() != n || kinetic.cols() != n) throw InvalidInput("kinetic form has wrong shape");
  const double scale = std::max(1.0, kinetic.cwiseAbs().maxCoeff());
  if ((kinetic - kinetic.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidInput("kinetic form is not symmetric");
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kinetic, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale) throw InvalidInput("kinetic form is not positive semidefinite");
  }
  for (const auto &t : coulomb) {
    if (t.a.row.size() != n || t.b.row.size() != n) throw InvalidInput("Coulomb point has wrong length");
    if (t.difference_row().cwiseAbs().maxCoeff() < 1e-15 && t.difference_offset().norm() < 1e-15)
      throw InvalidInput("Coulomb term '" + t.label + "' references coincident points");
  }
}

void OperatorDescriptor::update_flags() {
  flags.non_self_adjoint_risk = false;
  for (const auto &t : coulomb) {
    const Eigen::VectorXd d = t.difference_row();
    if (d.cwiseAbs().maxCoeff() < 1e-15) continue; // constant separation
    const double stiffness = d.dot(kinetic * d);
    if (stiffness <= 1e-14 * d.squaredNorm()) flags.non_self_adjoint_risk = true;
  }
}

namespace {

CoulombPoint unit_point(int n, int i) {
  CoulombPoint p;
  p.row = Eigen::VectorXd::Zero(n);
  p.row(i) = 1.0;
  return p;
}

void require_finite_masses(const MolecularSystem &system, const char *what) {
  if (system.any_infinite_mass())
    throw InvalidInput(std::string("infinite mass in ") + what + ": transform to internal coordinates first, then take limits");
}

} // namespace

OperatorDescriptor lab_hamiltonian(const MolecularSystem &system) {
  require_finite_masses(system, "lab frame");
  const int A = static_cast<int>(system.nuclear_count());
  const int N = system.electron_count();
  const int n = A + N;
  OperatorDescriptor d;
  d.coordinate_count = n;
  d.kinetic = Eigen::MatrixXd::Zero(n, n);
  for (int g = 0; g < A; ++g) {
    d.kinetic(g, g) = 1.0 / system.nucleus(g).mass;
    d.coordinate_labels.push_back("x_" + system.nucleus(g).label);
  }
  for (int i = 0; i < N; ++i) {
    d.kinetic(A + i, A + i) = 1.0;
    d.coordinate_labels.push_back("x_e" + std::to_string(i + 1));
  }
  for (int g = 0; g < A; ++g)
    for (int h = g + 1; h < A; ++h)
      d.coulomb.push_back({system.nucleus(g).charge * system.nucleus(h).charge, unit_point(n, g), unit_point(n, h),
                           "nn" + std::to_string(g + 1) + std::to_string(h + 1)});
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      d.coulomb.push_back({1.0, unit_point(n, A + i), unit_point(n, A + j),
                           "ee" + std::to_string(i + 1) + std::to_string(j + 1)});
  for (int i = 0; i < N; ++i)
    for (int g = 0; g < A; ++g)
      d.coulomb.push_back({-system.nucleus(g).charge, unit_point(n, A + i), unit_point(n, g),
                           "en" + std::to_string(i + 1) + std::to_string(g + 1)});
  d.update_flags();
  return d;
}

Eigen::VectorXd nuclear_mass_weights(const MolecularSystem &system) {
  const auto A = static_cast<Eigen::Index>(system.nuclear_count());
  Eigen::VectorXd w(A);
  if (system.any_infinite_mass()) {
    int clamped = 0;
    for (Eigen::Index g = 0; g < A; ++g) clamped += is_infinite_mass(system.nucleus(g).mass) ? 1 : 0;
    for (Eigen::Index g = 0; g < A; ++g) w(g) = is_infinite_mass(system.nucleus(g).mass) ? 1.0 / clamped : 0.0;
    return w;
  }
  const double M = system.total_nuclear_mass();
  for (Eigen::Index g = 0; g < A; ++g) w(g) = system.nucleus(g).mass / M;
  return w;
}

namespace {

// Weights of nuclei 0..k-1 in their partial centre of mass (limit rule for clamped nuclei).
Eigen::VectorXd partial_weights(const MolecularSystem &system, int k) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  int clamped = 0;
  double sum = 0.0;
  for (int g = 0; g < k; ++g) {
    const double m = system.nucleus(g).mass;
    if (is_infinite_mass(m)) ++clamped;
    else sum += m;
  }
  for (int g = 0; g < k; ++g) {
    const double m = system.nucleus(g).mass;
    if (clamped > 0) w(g) = is_infinite_mass(m) ? 1.0 / clamped : 0.0;
    else w(g) = m / sum;
  }
  return w;
}

} // namespace

Eigen::MatrixXd nuclear_coordinate_rows(const MolecularSystem &system, NuclearCoordinates choice) {
  const int A = static_cast<int>(system.nuclear_count());
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(std::max(A - 1, 0), A);
  for (int k = 1; k < A; ++k) {
    V(k - 1, k) = 1.0;
    if (choice == NuclearCoordinates::DifferencesToFirst) {
      V(k - 1, 0) -= 1.0;
    } else {
      const Eigen::VectorXd w = partial_weights(system, k);
      for (int g = 0; g < k; ++g) V(k - 1, g) -= w(g);
    }
  }
  return V;
}

Eigen::MatrixXd inverse_mass_matrix(const MolecularSystem &system, NuclearCoordinates choice) {
  const int A = static_cast<int>(system.nuclear_count());
  if (A < 2) throw InvalidInput("inverse mass matrix needs at least two nuclei");
  const Eigen::MatrixXd V = nuclear_coordinate_rows(system, choice);
  Eigen::VectorXd inv(A);
  for (int g = 0; g < A; ++g) inv(g) = inverse_mass(system.nucleus(g).mass);
  Eigen::MatrixXd mu = V * inv.asDiagonal() * V.transpose();
  return 0.5 * (mu + mu.transpose());
}

namespace {

InternalFrameMap make_map(const MolecularSystem &system, NuclearCoordinates choice) {
  const int A = static_cast<int>(system.nuclear_count());
  const int N = system.electron_count();
  const int n = A + N;
  InternalFrameMap map;
  map.nuclear_choice = choice;
  map.nuclear_coordinates = A - 1;
  map.electron_coordinates = N;
  map.transform = Eigen::MatrixXd::Zero(n - 1, n);
  const Eigen::MatrixXd Vn = nuclear_coordinate_rows(system, choice);
  const Eigen::VectorXd w = nuclear_mass_weights(system);
  map.transform.topLeftCorner(A - 1, A) = Vn;
  for (int i = 0; i < N; ++i) {
    map.transform(A - 1 + i, A + i) = 1.0;
    map.transform.row(A - 1 + i).head(A) = -w.transpose();
  }
  map.inverse_mass = A >= 2 ? inverse_mass_matrix(system, choice) : Eigen::MatrixXd(0, 0);

  Eigen::MatrixXd B(A, A);
  B.row(0) = w.transpose();
  if (A > 1) B.bottomRows(A - 1) = Vn;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  if (lu.rank() < A) throw InvalidInput("rank-deficient nuclear coordinate transform");
  const Eigen::MatrixXd Binv = lu.inverse();
  map.nuclear_positions = Binv.rightCols(A - 1);
  return map;
}

std::vector<std::string> internal_labels(const MolecularSystem &system) {
  std::vector<std::string> labels;
  for (std::size_t k = 1; k < system.nuclear_count(); ++k) labels.push_back("t_n" + std::to_string(k));
  for (int i = 0; i < system.electron_count(); ++i) labels.push_back("t_e" + std::to_string(i + 1));
  return labels;
}

// Explicit internal kinetic form: nuclear block mu^-1, electronic block with
// 1/mu = 1 + 1/M on the diagonal and the Hughes-Eckart 1/M off the diagonal.
Eigen::MatrixXd internal_kinetic(const MolecularSystem &system, const InternalFrameMap &map) {
  const int nn = map.nuclear_coordinates;
  const int ne = map.electron_coordinates;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nn + ne, nn + ne);
  if (nn > 0) K.topLeftCorner(nn, nn) = map.inverse_mass;
  const double invM = inverse_mass(system.total_nuclear_mass());
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < ne; ++j) K(nn + i, nn + j) = (i == j ? 1.0 : 0.0) + invM;
  return K;
}

} // namespace

SeparatedHamiltonian internal_hamiltonian(const MolecularSystem &system, NuclearCoordinates choice) {
  const int A = static_cast<int>(system.nuclear_count());
  const int N = system.electron_count();
  SeparatedHamiltonian out;
  out.map = make_map(system, choice);
  const int n_int = A - 1 + N;

  out.center_of_mass.coordinate_count = 1;
  out.center_of_mass.kinetic = Eigen::MatrixXd::Constant(1, 1, inverse_mass(system.total_mass()));
  out.center_of_mass.coordinate_labels = {"R_cm"};

  OperatorDescriptor &d = out.internal;
  d.coordinate_count = n_int;
  d.kinetic = internal_kinetic(system, out.map);
  d.coordinate_labels = internal_labels(system);

  auto nucleus_point = [&](int g) {
    CoulombPoint p;
    p.row = Eigen::VectorXd::Zero(n_int);
    if (A > 1) p.row.head(A - 1) = out.map.nuclear_positions.row(g).transpose();
    return p;
  };
  auto electron_point = [&](int i) {
    CoulombPoint p;
    p.row = Eigen::VectorXd::Zero(n_int);
    p.row(A - 1 + i) = 1.0;
    return p;
  };
  for (int g = 0; g < A; ++g)
    for (int h = g + 1; h < A; ++h)
      d.coulomb.push_back({system.nucleus(g).charge * system.nucleus(h).charge, nucleus_point(g), nucleus_point(h),
                           "nn" + std::to_string(g + 1) + std::to_string(h + 1)});
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      d.coulomb.push_back({1.0, electron_point(i), electron_point(j), "ee" + std::to_string(i + 1) + std::to_string(j + 1)});
  for (int i = 0; i < N; ++i)
    for (int g = 0; g < A; ++g)
      d.coulomb.push_back({-system.nucleus(g).charge, electron_point(i), nucleus_point(g),
                           "en" + std::to_string(i + 1) + std::to_string(g + 1)});
  d.update_flags();
  return out;
}

Eigen::MatrixXd full_transform(const MolecularSystem &system, const InternalFrameMap &map) {
  const auto n = static_cast<Eigen::Index>(system.particle_count());
  Eigen::MatrixXd V(n, n);
  const double MT = system.total_mass();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = i < static_cast<Eigen::Index>(system.nuclear_count()) ? system.nucleus(i).mass : 1.0;
    V(0, i) = m / MT;
  }
  V.bottomRows(n - 1) = map.transform;
  return V;
}

SeparatedHamiltonian separate_center_of_mass(const OperatorDescriptor &lab, const MolecularSystem &system,
                                             NuclearCoordinates choice) {
  require_finite_masses(system, "centre-of-mass separation");
  const auto n = static_cast<Eigen::Index>(system.particle_count());
  if (lab.coordinate_count != n) throw InvalidInput("lab descriptor does not match system");

  SeparatedHamiltonian out;
  out.map = make_map(system, choice);
  const Eigen::MatrixXd V = full_transform(system, out.map);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  if (lu.rank() < n) throw InvalidInput("rank-deficient coordinate transform");
  const Eigen::MatrixXd Vinv = lu.inverse();

  out.center_of_mass.coordinate_count = 1;
  out.center_of_mass.kinetic = Eigen::MatrixXd::Constant(1, 1, 1.0 / system.total_mass());
  out.center_of_mass.coordinate_labels = {"R_cm"};

  OperatorDescriptor &d = out.internal;
  d.coordinate_count = static_cast<int>(n - 1);
  d.kinetic = internal_kinetic(system, out.map);
  d.coordinate_labels = internal_labels(system);
  d.constant_shift = lab.constant_shift;
  // Each lab position x = R_cm + sum_k c_k t_k; Coulomb terms only see differences,
  // so the R_cm coefficient drops out.
  auto to_internal = [&](const CoulombPoint &p) {
    CoulombPoint q;
    const Eigen::RowVectorXd c = p.row.transpose() * Vinv;
    q.row = c.tail(n - 1).transpose();
    q.offset = p.offset;
    return q;
  };
  for (const auto &t : lab.coulomb) d.coulomb.push_back({t.prefactor, to_internal(t.a), to_internal(t.b), t.label});
  d.update_flags();
  return out;
}

double congruence_residual(const OperatorDescriptor &lab, const SeparatedHamiltonian &sep, const MolecularSystem &system) {
  const Eigen::MatrixXd V = full_transform(system, sep.map);
  const Eigen::MatrixXd transformed = V * lab.kinetic * V.transpose();
  const auto n = transformed.rows();
  Eigen::MatrixXd assembled = Eigen::MatrixXd::Zero(n, n);
  assembled(0, 0) = sep.center_of_mass.kinetic(0, 0);
  assembled.bottomRightCorner(n - 1, n - 1) = sep.internal.kinetic;
  return (transformed - assembled).cwiseAbs().maxCoeff();
}

} // namespace molab
