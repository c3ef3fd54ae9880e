#include "molab/born_huang.hpp"

#include "molab/error.hpp"
#include "molab/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace molab {

DiatomicFrame DiatomicFrame::of(const MolecularSystem &system) {
  if (system.nuclear_count() != 2 || system.electron_count() != 1)
    throw InvalidInput("Born-Huang treatment needs a one-electron diatomic");
  DiatomicFrame f;
  const Eigen::VectorXd w = nuclear_mass_weights(system);
  f.w1 = w(0);
  f.w2 = w(1);
  f.Z1 = system.nucleus(0).charge;
  f.Z2 = system.nucleus(1).charge;
  return f;
}

namespace {

struct GeometrySolver {
  DiatomicFrame frame;
  CouplingOptions opt;
  int n_solve = 1;

  std::vector<ElectronicState> operator()(const Eigen::Vector3d &t) const {
    auto sol = solve_geometry(frame.nucleus1(t), frame.nucleus2(t), frame.Z1, frame.Z2, opt.effective_mass, n_solve,
                              opt.basis);
    std::vector<ElectronicState> out;
    for (auto &s : sol.states)
      if (!opt.manifold || s.symmetry == *opt.manifold) out.push_back(std::move(s));
    return out;
  }
};

// For each reference state pick the candidate with the largest |overlap| (greedy,
// strongest pairs first) and flip its sign so the overlap is positive.
std::vector<ElectronicState> follow(const std::vector<ElectronicState> &ref, std::vector<ElectronicState> cand,
                                    double tolerance, double &min_overlap, const char *where) {
  const std::size_t n = ref.size();
  if (cand.size() < n) throw SolverError(std::string("too few bound states to follow the channels at ") + where);
  const Eigen::MatrixXd S = overlap_matrix(*ref.front().basis, *cand.front().basis);
  Eigen::MatrixXd O(n, cand.size());
  for (std::size_t a = 0; a < n; ++a) {
    const Eigen::RowVectorXd left = ref[a].coefficients.transpose() * S;
    for (std::size_t b = 0; b < cand.size(); ++b) O(a, b) = left.dot(cand[b].coefficients);
  }
  std::vector<int> pick(n, -1);
  std::vector<bool> used(cand.size(), false), done(n, false);
  for (std::size_t round = 0; round < n; ++round) {
    double best = -1.0;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (done[a]) continue;
      for (std::size_t b = 0; b < cand.size(); ++b)
        if (!used[b] && std::abs(O(a, b)) > best) {
          best = std::abs(O(a, b));
          ba = a;
          bb = b;
        }
    }
    done[ba] = true;
    used[bb] = true;
    pick[ba] = static_cast<int>(bb);
  }
  std::vector<ElectronicState> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double ov = O(a, pick[a]);
    min_overlap = std::min(min_overlap, std::abs(ov));
    if (std::abs(ov) < tolerance) {
      std::ostringstream msg;
      msg << "phase discontinuity at " << where << ": channel " << a << " overlap " << ov
          << " with its neighbour; use a finer grid";
      throw SolverError(msg.str());
    }
    out[a] = cand[pick[a]];
    if (ov < 0.0) out[a].coefficients = -out[a].coefficients;
  }
  return out;
}

Eigen::MatrixXd overlaps(const std::vector<ElectronicState> &a, const std::vector<ElectronicState> &b) {
  const Eigen::MatrixXd S = overlap_matrix(*a.front().basis, *b.front().basis);
  Eigen::MatrixXd O(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) O(i, j) = a[i].coefficients.dot(S * b[j].coefficients);
  return O;
}

std::string channel_label(const ElectronicState &s, int ordinal) {
  std::string p = s.symmetry == Parity::Gerade ? "sigma_g" : (s.symmetry == Parity::Ungerade ? "sigma_u" : "sigma");
  return p + std::to_string(ordinal);
}

} // namespace

CouplingMatrix coupling_matrix(const MolecularSystem &system, const std::vector<double> &r_grid, int n_channels,
                               const CouplingOptions &options) {
  if (n_channels < 1) throw InvalidInput("need at least one channel");
  if (r_grid.size() < 2) throw InvalidInput("coupling grid needs at least two points");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0)) throw InvalidInput("r grid must be positive");
    if (i && !(r_grid[i] > r_grid[i - 1])) throw InvalidInput("r grid must be ascending");
  }
  const double h = options.step;
  if (!(h > 0.0) || 2.0 * h >= r_grid.front()) throw InvalidInput("finite-difference step too large for the grid");

  GeometrySolver solve{DiatomicFrame::of(system), options, options.manifold ? 2 * n_channels + 2 : n_channels};
  CouplingMatrix cm;
  cm.r = r_grid;
  cm.channels = n_channels;
  cm.Z1 = solve.frame.Z1;
  cm.Z2 = solve.frame.Z2;
  cm.effective_mass = options.effective_mass;
  cm.energies.assign(n_channels, std::vector<double>(r_grid.size()));
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();

  std::vector<ElectronicState> prev;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double r = r_grid[i];
    auto cand = solve(r * z);
    std::vector<ElectronicState> cur;
    if (i == 0) {
      if (static_cast<int>(cand.size()) < n_channels) throw SolverError("too few bound states for the channels");
      cur.assign(cand.begin(), cand.begin() + n_channels);
      int ng = 0, nu = 0, nn = 0;
      for (const auto &s : cur)
        cm.labels.push_back(channel_label(s, s.symmetry == Parity::Gerade ? ++ng : (s.symmetry == Parity::Ungerade ? ++nu : ++nn)));
    } else {
      const std::string where = "r=" + format_number(r);
      cur = follow(prev, std::move(cand), options.phase_tolerance, cm.min_neighbour_overlap, where.c_str());
    }
    double dummy = 1.0;
    auto displaced = [&](double s) {
      const std::string where = "r=" + format_number(r + s);
      return overlaps(cur, follow(cur, solve((r + s) * z), 0.5, dummy, where.c_str()));
    };
    const Eigen::MatrixXd O0 = overlaps(cur, cur);
    const Eigen::MatrixXd Op1 = displaced(h), Om1 = displaced(-h);
    const Eigen::MatrixXd Op2 = displaced(2 * h), Om2 = displaced(-2 * h);
    const Eigen::MatrixXd F1 = (Op1 - Om1) / (2 * h), F2 = (Op2 - Om2) / (4 * h);
    const Eigen::MatrixXd G1 = (Op1 - 2 * O0 + Om1) / (h * h), G2 = (Op2 - 2 * O0 + Om2) / (4 * h * h);
    cm.F.push_back((4 * F1 - F2) / 3);
    cm.G.push_back((4 * G1 - G2) / 3);
    for (int c = 0; c < n_channels; ++c) cm.energies[c][i] = cur[c].energy_total;
    prev = std::move(cur);
  }
  return cm;
}

PotentialCurve CouplingMatrix::curves() const {
  PotentialCurve c;
  c.r = r;
  c.energies = energies;
  c.labels = labels;
  c.Z1 = Z1;
  c.Z2 = Z2;
  c.effective_mass = effective_mass;
  for (double x : r) c.threshold.push_back(Z1 * Z2 / x);
  c.symmetry.assign(energies.size(), std::vector<Parity>(r.size(), Parity::None));
  c.has_minimum = parabolic_minimum(c.r, c.energies.front(), c.r_min, c.V0);
  return c;
}

std::string CouplingMatrix::csv() const {
  std::vector<std::string> header{"r"};
  for (int m = 0; m < channels; ++m)
    for (int n = m + 1; n < channels; ++n) header.push_back("F_" + std::to_string(m) + std::to_string(n));
  for (int m = 0; m < channels; ++m)
    for (int n = 0; n < channels; ++n) header.push_back("G_" + std::to_string(m) + std::to_string(n));
  CsvTable t(header);
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::vector<double> row{r[i]};
    for (int m = 0; m < channels; ++m)
      for (int n = m + 1; n < channels; ++n) row.push_back(F[i](m, n));
    for (int m = 0; m < channels; ++m)
      for (int n = 0; n < channels; ++n) row.push_back(G[i](m, n));
    t.add_row(row);
  }
  return t.str();
}

// ---------------------------------------------------------------------------

ChannelSolution solve_coupled(const PotentialCurve &curves, const CouplingMatrix &cm, double mu, int C, int n_levels,
                              const RadialGrid &grid, const CoupledOptions &options) {
  if (!(mu > 0.0)) throw InvalidInput("muNuclear must be positive");
  if (C < 1 || C > static_cast<int>(curves.state_count()) || C > cm.channels)
    throw InvalidInput("channelCount exceeds the available states");
  if (n_levels < 1) throw InvalidInput("nLevels must be >= 1");
  if (options.couplings && (grid.r_lo < cm.r.front() || grid.r_hi > cm.r.back()))
    throw InvalidInput("coupled grid must lie inside the coupling grid");

  const int N = grid.points, hw = grid.half_width;
  const int kd = hw * C + C - 1;
  const Eigen::Index dim = static_cast<Eigen::Index>(N) * C;
  const double h = grid.step();
  const double pre = -0.5 / mu;

  std::vector<CurveInterpolant> E;
  for (int c = 0; c < C; ++c) E.emplace_back(curves, c);

  // couplings interpolated onto the fine grid
  std::vector<Eigen::MatrixXd> F(N, Eigen::MatrixXd::Zero(C, C)), Gs(N, Eigen::MatrixXd::Zero(C, C));
  if (options.couplings) {
    for (int m = 0; m < C; ++m)
      for (int n = 0; n < C; ++n) {
        std::vector<double> f, g;
        for (std::size_t i = 0; i < cm.r.size(); ++i) {
          f.push_back(cm.F[i](m, n));
          g.push_back(0.5 * (cm.G[i](m, n) + cm.G[i](n, m)));
        }
        CubicSpline sf(cm.r, f), sg(cm.r, g);
        for (int i = 0; i < N; ++i) {
          F[i](m, n) = sf(grid.node(i));
          Gs[i](m, n) = sg(grid.node(i));
        }
      }
  }

  // general band, A(I, J) at full(kd + I - J, J)
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(2 * kd + 1, dim);
  auto at = [&](Eigen::Index I, Eigen::Index J) -> double & { return full(kd + I - J, J); };

  const Eigen::MatrixXd kin = radial_kinetic_band(mu, grid);
  for (int j = 0; j < N; ++j)
    for (int i = std::max(0, j - hw); i <= j; ++i) {
      const double v = kin(hw + i - j, j);
      for (int c = 0; c < C; ++c) {
        at(static_cast<Eigen::Index>(i) * C + c, static_cast<Eigen::Index>(j) * C + c) += v;
        if (i != j) at(static_cast<Eigen::Index>(j) * C + c, static_cast<Eigen::Index>(i) * C + c) += v;
      }
    }
  const auto w1 = central_first_derivative_weights(hw);
  for (int i = 0; i < N; ++i) {
    const double r = grid.node(i);
    for (int m = 0; m < C; ++m) {
      at(static_cast<Eigen::Index>(i) * C + m, static_cast<Eigen::Index>(i) * C + m) += E[m](r);
      for (int n = 0; n < C; ++n) {
        at(static_cast<Eigen::Index>(i) * C + m, static_cast<Eigen::Index>(i) * C + n) += pre * Gs[i](m, n);
        for (int d = -hw; d <= hw; ++d) {
          const int j = i + d;
          if (d == 0 || j < 0 || j >= N) continue;
          const double D = w1[d + hw] / h;
          at(static_cast<Eigen::Index>(i) * C + m, static_cast<Eigen::Index>(j) * C + n) +=
              pre * (F[i](m, n) + F[j](m, n)) * D;
        }
      }
    }
  }

  ChannelSolution out;
  out.channel_count = C;
  out.grid = grid;
  double scale = 0.0;
  std::pair<Eigen::Index, Eigen::Index> worst{0, 0};
  Eigen::MatrixXd band = Eigen::MatrixXd::Zero(kd + 1, dim);
  for (Eigen::Index J = 0; J < dim; ++J)
    for (Eigen::Index I = std::max<Eigen::Index>(0, J - kd); I <= J; ++I) {
      const double a = at(I, J), b = at(J, I);
      if (std::abs(a - b) > out.hermiticity_residual) worst = {I, J};
      out.hermiticity_residual = std::max(out.hermiticity_residual, std::abs(a - b));
      scale = std::max(scale, std::abs(a));
      band(kd + I - J, J) = 0.5 * (a + b);
    }
  if (out.hermiticity_residual > 1e-8 * std::max(1.0, scale)) {
    std::ostringstream msg;
    // usually an avoided crossing with a channel outside the model sharper than the difference step
    msg << "assembled coupled-channel matrix is not Hermitian: residual " << out.hermiticity_residual << " near r="
        << grid.node(static_cast<int>(worst.first / C)) << " between channels " << worst.first % C << " and "
        << worst.second % C;
    throw SolverError(msg.str());
  }

  BandedEigen eig = lowest_band_eigenpairs(band, n_levels, true);
  for (int k = 0; k < n_levels; ++k) {
    out.energies.push_back(eig.values(k));
    const Eigen::VectorXd u = eig.vectors.col(k) / std::sqrt(h);
    Eigen::MatrixXd amp(N, C);
    std::vector<double> wts(C, 0.0);
    for (int i = 0; i < N; ++i)
      for (int c = 0; c < C; ++c) {
        amp(i, c) = u(static_cast<Eigen::Index>(i) * C + c);
        wts[c] += h * amp(i, c) * amp(i, c);
      }
    out.channel_weights.push_back(wts);
    if (options.vectors) out.amplitudes.push_back(std::move(amp));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> DiagonalCorrection::total() const {
  std::vector<double> t(radial);
  for (std::size_t i = 0; i < t.size() && i < perpendicular.size(); ++i) t[i] += 2.0 * perpendicular[i];
  return t;
}

DiagonalCorrection diagonal_correction(const MolecularSystem &system, const std::vector<double> &r_grid,
                                       bool perpendicular, const CouplingOptions &options) {
  CouplingOptions opt = options;
  opt.manifold.reset();
  const CouplingMatrix cm = coupling_matrix(system, r_grid, 1, opt);
  DiagonalCorrection dc;
  dc.r = r_grid;
  dc.effective_mass = options.effective_mass;
  for (const auto &G : cm.G) dc.radial.push_back(-G(0, 0));
  if (!perpendicular) return dc;

  GeometrySolver solve{DiatomicFrame::of(system), opt, 1};
  const double d = options.step;
  for (double r : r_grid) {
    const Eigen::Vector3d t = r * Eigen::Vector3d::UnitZ();
    const auto s0 = solve(t);
    double dummy = 1.0;
    auto ov = [&](double delta) {
      const auto s = follow(s0, solve(t + delta * Eigen::Vector3d::UnitY()), 0.5, dummy, "perpendicular step");
      return overlaps(s0, s)(0, 0);
    };
    const double o0 = overlaps(s0, s0)(0, 0);
    const double q1 = 2.0 * (o0 - ov(d)) / (d * d);
    const double q2 = 2.0 * (o0 - ov(2 * d)) / (4 * d * d);
    dc.perpendicular.push_back((4 * q1 - q2) / 3);
  }
  return dc;
}

ChannelSolution adiabatic_solve(const PotentialCurve &curve, const DiagonalCorrection *correction, double mu,
                                int n_levels, const RadialGrid &grid) {
  const CurveInterpolant V(curve, 0);
  std::function<double(double)> pot = std::cref(V);
  CubicSpline q;
  if (correction) {
    q = CubicSpline(correction->r, correction->total());
    const double lo = correction->r.front(), hi = correction->r.back();
    pot = [&V, q, lo, hi, mu](double r) { return V(r) + q(std::clamp(r, lo, hi)) / (2.0 * mu); };
  }
  const RadialSolution rs = solve_radial(pot, mu, 0, n_levels, grid, true);
  ChannelSolution out;
  out.channel_count = 1;
  out.grid = grid;
  for (std::size_t k = 0; k < rs.levels.size(); ++k) {
    out.energies.push_back(rs.levels[k].energy);
    out.channel_weights.push_back({1.0});
    out.amplitudes.push_back(rs.wavefunctions.col(static_cast<Eigen::Index>(k)));
  }
  return out;
}

AdiabaticBound adiabatic_ground_level(const MolecularSystem &system, const std::vector<double> &r_grid,
                                      const RadialGrid &grid, const BasisConfig &basis) {
  AdiabaticBound b;
  const double mu = nuclear_reduced_mass(system);
  const double mue = electron_mass_factor(system);
  b.curve = potential_curve(system, r_grid, 1, basis, mue);
  CouplingOptions opt;
  opt.basis = basis;
  opt.effective_mass = mue;
  b.correction = diagonal_correction(system, r_grid, true, opt);
  b.energy = adiabatic_solve(b.curve, &b.correction, mu, 1, grid).energies.front();
  const PotentialCurve bo = potential_curve(system, r_grid, 1, basis, 1.0);
  b.bo_energy = solve_radial(bo, mu, 0, 1, grid).levels.front().energy;
  return b;
}

} // namespace molab
