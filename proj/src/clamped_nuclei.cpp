#include "molab/clamped_nuclei.hpp"

#include "molab/error.hpp"
#include "molab/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace molab {

const char *parity_name(Parity p) {
  switch (p) {
  case Parity::Gerade: return "g";
  case Parity::Ungerade: return "u";
  default: return "none";
  }
}

namespace {

std::shared_ptr<Basis> build_basis(const Eigen::Vector3d &a, const Eigen::Vector3d &b, double mass,
                                   const BasisConfig &cfg) {
  if (cfg.exponents < 1 || !(cfg.ratio > 1.0) || !(cfg.smallest > 0.0))
    throw InvalidInput("basis needs exponents >= 1, ratio > 1, smallest > 0");
  Eigen::Vector3d axis = b - a;
  if (axis.norm() < 1e-14) axis = Eigen::Vector3d::UnitZ();
  axis.normalize();
  const double scale = mass * mass;
  auto basis = std::make_shared<Basis>();
  auto shells = [&](const Eigen::Vector3d &c, int count) {
    for (int k = 0; k < count; ++k) {
      const double e = cfg.smallest * std::pow(cfg.ratio, k) * scale;
      basis->push_back(make_sigma_function(c, e, ShellKind::S, axis));
      if (cfg.p_shell) basis->push_back(make_sigma_function(c, e, ShellKind::P, axis));
      if (cfg.d_shell) basis->push_back(make_sigma_function(c, e, ShellKind::D, axis));
    }
  };
  shells(a, cfg.exponents);
  if ((b - a).norm() > 0.0) shells(b, cfg.exponents);
  if (cfg.midpoint && (b - a).norm() > 0.0) shells(0.5 * (a + b), std::min(cfg.midpoint_exponents, cfg.exponents));
  return basis;
}

struct Nucleus {
  Eigen::Vector3d position;
  double charge;
};

ElectronicSolution solve_in_basis(std::shared_ptr<const Basis> basis, const std::vector<Nucleus> &nuclei,
                                  double mass, int n_states, double threshold, double constant,
                                  const Eigen::Vector3d *parity_center, double r) {
  if (n_states < 1) throw InvalidInput("nStates must be >= 1");
  if (!(mass > 0.0)) throw InvalidInput("effective electron mass must be positive");
  const auto &B = *basis;
  const Eigen::Index n = static_cast<Eigen::Index>(B.size());
  Eigen::MatrixXd S(n, n), H(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double h = kinetic_integral(B[i], B[j]) / mass;
      for (const auto &nuc : nuclei) h -= nuc.charge * coulomb_integral(B[i], B[j], nuc.position);
      S(i, j) = S(j, i) = overlap_integral(B[i], B[j]);
      H(i, j) = H(j, i) = h;
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> se(S);
  const Eigen::VectorXd &s = se.eigenvalues();
  const double smax = s(n - 1);
  if (!(smax > 0.0)) throw SolverError("basis overlap matrix is not positive");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < n; ++k)
    if (s(k) > threshold * smax) keep.push_back(k);
  if (keep.empty() || static_cast<int>(keep.size()) < n_states) {
    std::ostringstream msg;
    msg << "basis overlap numerically singular: " << keep.size() << " of " << n
        << " functions survive canonical orthogonalisation, condition " << smax / std::max(s(0), 1e-300);
    throw SolverError(msg.str());
  }
  Eigen::MatrixXd X(n, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) X.col(k) = se.eigenvectors().col(keep[k]) / std::sqrt(s(keep[k]));
  Eigen::MatrixXd Hp = X.transpose() * H * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> he(0.5 * (Hp + Hp.transpose()));

  ElectronicSolution sol;
  sol.condition = smax / s(keep.front());
  sol.dropped = static_cast<int>(n - keep.size());

  Eigen::MatrixXd SP;
  if (parity_center) {
    SP.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const GaussianFunction inv = inverted_through(B[i], *parity_center);
      for (Eigen::Index j = 0; j < n; ++j) SP(j, i) = overlap_integral(B[j], inv);
    }
  }

  for (int k = 0; k < n_states; ++k) {
    const double e = he.eigenvalues()(k);
    if (!(e < 0.0)) {
      std::ostringstream msg;
      msg << "state " << k << " at r=" << r << " lies at or above the threshold; list truncated to " << k;
      sol.warnings.push_back(msg.str());
      break;
    }
    ElectronicState st;
    st.r = r;
    st.index = k;
    st.energy_electronic = e;
    st.energy_total = e + constant;
    st.coefficients = X * he.eigenvectors().col(k);
    Eigen::Index imax = 0;
    st.coefficients.cwiseAbs().maxCoeff(&imax);
    if (st.coefficients(imax) < 0.0) st.coefficients = -st.coefficients;
    if (parity_center) {
      const double p = st.coefficients.dot(SP * st.coefficients);
      st.symmetry = p > 0.5 ? Parity::Gerade : (p < -0.5 ? Parity::Ungerade : Parity::None);
    }
    st.basis = basis;
    sol.states.push_back(std::move(st));
  }
  // energy ties broken by parity label, g first
  std::stable_sort(sol.states.begin(), sol.states.end(), [](const ElectronicState &x, const ElectronicState &y) {
    if (std::abs(x.energy_electronic - y.energy_electronic) > 1e-10) return x.energy_electronic < y.energy_electronic;
    return static_cast<int>(x.symmetry) < static_cast<int>(y.symmetry);
  });
  for (std::size_t k = 0; k < sol.states.size(); ++k) sol.states[k].index = static_cast<int>(k);
  return sol;
}

} // namespace

ElectronicSolution solve_geometry(const Eigen::Vector3d &a, const Eigen::Vector3d &b, double Z1, double Z2,
                                  double effective_mass, int n_states, const BasisConfig &config) {
  const double r = (b - a).norm();
  if (!(r > 0.0)) throw InvalidInput("internuclear distance must be positive");
  if (!(effective_mass > 0.0)) throw InvalidInput("effective electron mass must be positive");
  auto basis = build_basis(a, b, effective_mass, config);
  const Eigen::Vector3d mid = 0.5 * (a + b);
  const bool homo = Z1 == Z2;
  return solve_in_basis(basis, {{a, Z1}, {b, Z2}}, effective_mass, n_states, config.overlap_threshold, Z1 * Z2 / r,
                        homo ? &mid : nullptr, r);
}

ElectronicSolution solve_two_center(double r, double Z1, double Z2, double effective_mass, int n_states,
                                    const BasisConfig &config) {
  if (!(r > 0.0)) throw InvalidInput("internuclear distance must be positive");
  return solve_geometry(Eigen::Vector3d(0, 0, -0.5 * r), Eigen::Vector3d(0, 0, 0.5 * r), Z1, Z2, effective_mass,
                        n_states, config);
}

ElectronicSolution solve_clamped(const OperatorDescriptor &d, int n_states, const BasisConfig &config) {
  if (d.coordinate_count != 1) throw InvalidInput("clamped solver needs exactly one (electron) coordinate");
  const double k = d.kinetic(0, 0);
  if (!(k > 0.0)) throw NonSelfAdjointRisk("electron coordinate carries no kinetic energy");
  std::vector<Nucleus> nuclei;
  double constant = d.constant_shift;
  for (const auto &t : d.coulomb) {
    const double ra = t.a.row(0), rb = t.b.row(0);
    if (ra == 0.0 && rb == 0.0) {
      constant += t.prefactor / (t.a.offset - t.b.offset).norm();
    } else if (std::abs(std::abs(ra - rb) - 1.0) < 1e-14 && (ra == 0.0 || rb == 0.0)) {
      const Eigen::Vector3d pos = ra != 0.0 ? Eigen::Vector3d((t.b.offset - t.a.offset) / ra)
                                         : Eigen::Vector3d((t.a.offset - t.b.offset) / rb);
      nuclei.push_back({pos, -t.prefactor});
    } else {
      throw InvalidInput("Coulomb term '" + t.label + "' is not a fixed-centre attraction");
    }
  }
  if (nuclei.empty() || nuclei.size() > 2) throw InvalidInput("clamped solver supports one or two centres");
  const double mass = 1.0 / k;
  const Eigen::Vector3d a = nuclei[0].position;
  const Eigen::Vector3d b = nuclei.size() == 2 ? nuclei[1].position : a;
  auto basis = build_basis(a, b, mass, config);
  const Eigen::Vector3d mid = 0.5 * (a + b);
  const bool homo = nuclei.size() == 2 && nuclei[0].charge == nuclei[1].charge;
  return solve_in_basis(basis, nuclei, mass, n_states, config.overlap_threshold, constant, homo ? &mid : nullptr,
                        (b - a).norm());
}

double state_overlap(const ElectronicState &a, const ElectronicState &b) {
  if (!a.basis || !b.basis) throw InvalidInput("state carries no basis");
  return a.coefficients.dot(overlap_matrix(*a.basis, *b.basis) * b.coefficients);
}

std::vector<double> PotentialCurve::electronic(std::size_t k) const {
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = energies.at(k)[i] - Z1 * Z2 / r[i];
  return out;
}

std::string PotentialCurve::csv() const {
  std::vector<std::string> header{"r"};
  for (std::size_t k = 0; k < energies.size(); ++k) header.push_back("E_total_k" + std::to_string(k));
  header.push_back("Lambda");
  CsvTable t(header);
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::vector<double> row{r[i]};
    for (const auto &e : energies) row.push_back(e[i]);
    row.push_back(threshold[i]);
    t.add_row(row);
  }
  return t.str();
}

std::string PotentialCurve::sidecar_json() const {
  nlohmann::ordered_json j;
  j["V0"] = V0;
  j["rMin"] = has_minimum ? nlohmann::json(r_min) : nlohmann::json(nullptr);
  j["has_minimum"] = has_minimum;
  j["labels"] = labels;
  j["Z1"] = Z1;
  j["Z2"] = Z2;
  j["effective_mass"] = effective_mass;
  j["basis"] = {{"family", "even-tempered sigma Gaussians"},
                {"exponents", basis.exponents},
                {"ratio", basis.ratio},
                {"smallest", basis.smallest},
                {"p_shell", basis.p_shell},
                {"d_shell", basis.d_shell},
                {"midpoint", basis.midpoint},
                {"midpoint_exponents", basis.midpoint_exponents},
                {"overlap_threshold", basis.overlap_threshold}};
  j["warnings"] = warnings;
  return j.dump(2);
}

bool parabolic_minimum(const std::vector<double> &r, const std::vector<double> &e, double &r_min, double &v0) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] < e[best]) best = i;
  v0 = e[best];
  r_min = r[best];
  if (best == 0 || best + 1 >= e.size()) return false;
  const double x0 = r[best - 1], x1 = r[best], x2 = r[best + 1];
  const double y0 = e[best - 1], y1 = e[best], y2 = e[best + 1];
  // Lagrange parabola through three points
  const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
  const double c = (d12 - d01) / (x2 - x0);
  if (!(c > 0.0)) return false;
  const double bcoef = d01 - c * (x0 + x1);
  r_min = -bcoef / (2.0 * c);
  v0 = y0 + d01 * (r_min - x0) + c * (r_min - x0) * (r_min - x1);
  return true;
}

PotentialCurve potential_curve(const MolecularSystem &system, const std::vector<double> &r_grid, int n_states,
                               const BasisConfig &config, double effective_mass) {
  if (system.nuclear_count() != 2 || system.electron_count() != 1)
    throw InvalidInput("potential curves need a one-electron diatomic");
  if (r_grid.empty()) throw InvalidInput("empty r grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0)) throw InvalidInput("r grid must be positive");
    if (i && !(r_grid[i] > r_grid[i - 1])) throw InvalidInput("r grid must be ascending");
  }
  PotentialCurve c;
  c.Z1 = system.nucleus(0).charge;
  c.Z2 = system.nucleus(1).charge;
  c.effective_mass = effective_mass;
  c.basis = config;
  c.r = r_grid;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  c.energies.assign(n_states, std::vector<double>(r_grid.size(), nan));
  c.symmetry.assign(n_states, std::vector<Parity>(r_grid.size(), Parity::None));
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double r = r_grid[i];
    c.threshold.push_back(c.Z1 * c.Z2 / r);
    auto sol = solve_two_center(r, c.Z1, c.Z2, effective_mass, n_states, config);
    for (const auto &w : sol.warnings) c.warnings.push_back(w);
    for (const auto &st : sol.states) {
      c.energies[st.index][i] = st.energy_total;
      c.symmetry[st.index][i] = st.symmetry;
    }
  }
  // labels from the symmetry at the first grid point, counted per parity
  int ng = 0, nu = 0, nn = 0;
  for (int k = 0; k < n_states; ++k) {
    const Parity p = c.symmetry[k].front();
    if (p == Parity::Gerade) c.labels.push_back("sigma_g" + std::to_string(++ng));
    else if (p == Parity::Ungerade) c.labels.push_back("sigma_u" + std::to_string(++nu));
    else c.labels.push_back("sigma" + std::to_string(++nn));
  }
  c.has_minimum = parabolic_minimum(c.r, c.energies[0], c.r_min, c.V0);
  if (!c.has_minimum) c.warnings.push_back("ground curve has no interior minimum on the grid");
  return c;
}

double electron_mass_factor(const MolecularSystem &system) {
  const double M = system.total_nuclear_mass();
  if (is_infinite_mass(M)) return 1.0;
  return M / (M + 1.0);
}

ElectronicState finite_mass_rescale(const ElectronicState &state, const MolecularSystem &system) {
  if (system.electron_count() != 1) throw InvalidInput("finite-mass rescaling is exact only for one electron");
  const double mu = electron_mass_factor(system);
  ElectronicState out = state;
  const double repulsion = state.energy_total - state.energy_electronic;
  out.r = state.r / mu;
  out.energy_electronic = mu * state.energy_electronic;
  out.energy_total = mu * state.energy_electronic + mu * repulsion;
  if (out.basis) {
    // f(mu x) in the same Gaussian family: centres shrink, exponents grow by mu^2
    auto scaled = std::make_shared<Basis>(*out.basis);
    for (auto &g : *scaled) {
      g.center /= mu;
      g.exponent *= mu * mu;
      for (auto &t : g.terms) t.coefficient *= std::pow(mu, 1.5 + t.powers[0] + t.powers[1] + t.powers[2]);
    }
    out.basis = scaled;
  }
  return out;
}

PotentialCurve finite_mass_rescale(const PotentialCurve &curve, const MolecularSystem &system) {
  if (system.electron_count() != 1) throw InvalidInput("finite-mass rescaling is exact only for one electron");
  const double mu = electron_mass_factor(system);
  PotentialCurve out = curve;
  for (auto &r : out.r) r /= mu;
  for (auto &e : out.energies)
    for (auto &v : e) v *= mu;
  for (auto &t : out.threshold) t *= mu;
  out.V0 *= mu;
  out.r_min /= mu;
  out.effective_mass *= mu;
  return out;
}

} // namespace molab
