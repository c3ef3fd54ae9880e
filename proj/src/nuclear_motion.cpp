#include "molab/nuclear_motion.hpp"

#include "molab/error.hpp"
#include "molab/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace molab {

// ---------------------------------------------------------------------------
// Curve interpolation

CurveInterpolant::CurveInterpolant(const PotentialCurve &curve, std::size_t state) {
  if (state >= curve.state_count()) throw InvalidInput("curve has no state " + std::to_string(state));
  std::vector<double> r, e;
  const auto el = curve.electronic(state);
  for (std::size_t i = 0; i < curve.r.size(); ++i)
    if (std::isfinite(el[i])) {
      r.push_back(curve.r[i]);
      e.push_back(el[i]);
    }
  if (r.size() < 4) throw InvalidInput("curve needs at least four finite samples");
  zz_ = curve.Z1 * curve.Z2;
  r_front_ = r.front();
  r_back_ = r.back();
  spline_ = CubicSpline(std::move(r), std::move(e));
  asymptote_ = -0.5 * curve.effective_mass * std::pow(std::max(curve.Z1, curve.Z2), 2);
  tail_ = spline_(r_back_) + zz_ / r_back_ - asymptote_;
}

double CurveInterpolant::operator()(double r) const {
  if (r > r_back_) return asymptote_ + tail_ * std::pow(r_back_ / r, 4);
  return spline_(r) + zz_ / r;
}

double CurveInterpolant::derivative(double r) const {
  if (r > r_back_) return -4.0 * tail_ * std::pow(r_back_ / r, 4) / r;
  return spline_.derivative(r) - zz_ / (r * r);
}

CurveMinimum refine_minimum(const PotentialCurve &curve, std::size_t state) {
  const CurveInterpolant V(curve, state);
  std::size_t best = 0;
  const auto &e = curve.energies.at(state);
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] < e[best]) best = i;
  if (best == 0 || best + 1 >= e.size()) throw SolverError("curve has no interior minimum");
  auto m = brent_minimize(V, curve.r[best - 1], curve.r[best + 1], 1e-10);
  return {m.x, m.f};
}

// ---------------------------------------------------------------------------
// Radial solver

Eigen::MatrixXd radial_kinetic_band(double mu, const RadialGrid &grid) {
  const int n = grid.points, kd = grid.half_width;
  if (n <= 2 * kd) throw InvalidInput("radial grid too small for the stencil");
  const double h = grid.step();
  const auto w = central_second_derivative_weights(kd);
  const double pre = -0.5 / (mu * h * h);
  Eigen::MatrixXd band = Eigen::MatrixXd::Zero(kd + 1, n);
  // full node index J = i + 1; walls at J = 0 and J = n + 1 with u odd about each wall
  for (int i = 0; i < n; ++i) {
    const int J = i + 1;
    for (int d = -kd; d <= kd; ++d) {
      int K = J + d;
      double sign = 1.0;
      if (K == 0 || K == n + 1) continue;
      if (K < 0) {
        K = -K;
        sign = -1.0;
      } else if (K > n + 1) {
        K = 2 * (n + 1) - K;
        sign = -1.0;
      }
      const int c = K - 1;
      if (c < i) continue; // upper triangle only; the reflected stencil is symmetric
      band(kd + i - c, c) += sign * pre * w[d + kd];
    }
  }
  return band;
}

namespace {

struct ShootingGrid {
  std::vector<double> veff; // full nodes 0..n+1
  double h = 0.0;
  double origin_limit = 0.0; // lim_{r->0} r V(r) when r_lo = 0
};

// Numerov matching function at energy E; zero at an eigenvalue.
double numerov_mismatch(const ShootingGrid &s, double mu, double E) {
  const int last = static_cast<int>(s.veff.size()) - 1;
  const double h2 = s.h * s.h;
  auto g = [&](int j) { return 2.0 * mu * (s.veff[j] - E); };
  int m = last - 1;
  while (m > 1 && s.veff[m] > E) --m;
  m = std::clamp(m, 2, last - 2);

  // outward
  double u_prev = 0.0, u_cur = s.h;
  double w_prev = -(h2 / 12.0) * 2.0 * mu * s.origin_limit * (u_cur / s.h);
  double w_cur = (1.0 - h2 * g(1) / 12.0) * u_cur;
  double out_m1 = 0.0, out_m = 0.0;
  for (int j = 1; j < m; ++j) {
    const double w_next = 2.0 * w_cur - w_prev + h2 * g(j) * u_cur;
    const double u_next = w_next / (1.0 - h2 * g(j + 1) / 12.0);
    w_prev = w_cur;
    w_cur = w_next;
    u_prev = u_cur;
    u_cur = u_next;
    if (std::abs(u_cur) > 1e150) {
      w_prev *= 1e-150; w_cur *= 1e-150; u_prev *= 1e-150; u_cur *= 1e-150;
    }
  }
  out_m1 = u_prev;
  out_m = u_cur;
  // inward
  u_prev = 0.0;
  u_cur = 1e-30;
  w_prev = 0.0;
  w_cur = (1.0 - h2 * g(last - 1) / 12.0) * u_cur;
  for (int j = last - 1; j > m; --j) {
    const double w_next = 2.0 * w_cur - w_prev + h2 * g(j) * u_cur;
    const double u_next = w_next / (1.0 - h2 * g(j - 1) / 12.0);
    w_prev = w_cur;
    w_cur = w_next;
    u_prev = u_cur;
    u_cur = u_next;
    if (std::abs(u_cur) > 1e150) {
      w_prev *= 1e-150; w_cur *= 1e-150; u_prev *= 1e-150; u_cur *= 1e-150;
    }
  }
  const double in_m1 = u_prev / u_cur; // u at m + 1, scaled so u_m = 1
  const double o_m1 = out_m1 / out_m;   // u at m - 1
  const double wm = 1.0 - h2 * g(m) / 12.0;
  return ((1.0 - h2 * g(m + 1) / 12.0) * in_m1 + (1.0 - h2 * g(m - 1) / 12.0) * o_m1 - 2.0 * wm - h2 * g(m)) / h2;
}

ShootingGrid shooting_grid(const std::function<double(double)> &veff, const RadialGrid &grid) {
  ShootingGrid s;
  s.h = grid.step();
  const int n = grid.points;
  s.veff.resize(n + 2);
  for (int j = 0; j <= n + 1; ++j) {
    const double r = grid.r_lo + j * s.h;
    s.veff[j] = (j == 0 && r == 0.0) ? 0.0 : veff(r);
  }
  if (grid.r_lo == 0.0) {
    const double eps = 1e-9;
    s.origin_limit = eps * veff(eps);
    if (!std::isfinite(s.origin_limit)) s.origin_limit = 0.0;
  }
  return s;
}

double numerov_root(const ShootingGrid &s, double mu, double guess, double bracket) {
  double d = std::min(1e-9 * std::max(1.0, std::abs(guess)), 0.5 * bracket);
  double fl = 0.0, fh = 0.0, lo = 0.0, hi = 0.0;
  bool found = false;
  while (d <= bracket) {
    lo = guess - d;
    hi = guess + d;
    fl = numerov_mismatch(s, mu, lo);
    fh = numerov_mismatch(s, mu, hi);
    if (std::isfinite(fl) && std::isfinite(fh) && fl * fh <= 0.0) {
      found = true;
      break;
    }
    d *= 2.0;
  }
  if (!found) throw SolverError("Numerov shooting found no eigenvalue near the grid level");
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(guess)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = numerov_mismatch(s, mu, mid);
    if (fm * fl <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      fl = fm;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace

double numerov_eigenvalue(const std::function<double(double)> &veff, double mu, const RadialGrid &grid, double guess,
                          double bracket) {
  return numerov_root(shooting_grid(veff, grid), mu, guess, bracket);
}

RadialSolution solve_radial(const std::function<double(double)> &potential, double mu, int J, int n_levels,
                            const RadialGrid &grid, bool vectors) {
  if (!(mu > 0.0)) throw InvalidInput("muNuclear must be positive");
  if (n_levels < 1) throw InvalidInput("nLevels must be >= 1");
  if (J < 0) throw InvalidInput("J must be >= 0");
  if (!(grid.r_hi > grid.r_lo)) throw InvalidInput("radial grid needs r_hi > r_lo");
  const double cent = J * (J + 1) / (2.0 * mu);
  auto veff = [&](double r) { return potential(r) + cent / (r * r); };

  Eigen::MatrixXd band = radial_kinetic_band(mu, grid);
  const int kd = grid.half_width;
  for (int i = 0; i < grid.points; ++i) band(kd, i) += veff(grid.node(i));

  RadialSolution out;
  out.dissociation = veff(grid.node(grid.points - 1));
  const int want = std::min(n_levels, grid.points);
  BandedEigen eig = lowest_band_eigenpairs(band, want, true);
  const double h = grid.step();

  std::vector<int> bound;
  for (int k = 0; k < want; ++k)
    if (eig.values(k) < out.dissociation - 1e-9) bound.push_back(k);
  if (bound.empty()) {
    out.diagnostics.push_back("no bound level below the dissociation limit");
    return out;
  }
  if (static_cast<int>(bound.size()) < n_levels) {
    std::ostringstream msg;
    msg << "only " << bound.size() << " bound levels below the dissociation limit";
    out.diagnostics.push_back(msg.str());
  }

  ShootingGrid sg;
  if (grid.numerov_check) sg = shooting_grid(veff, grid);
  if (vectors) out.wavefunctions.resize(grid.points, static_cast<Eigen::Index>(bound.size()));
  for (std::size_t b = 0; b < bound.size(); ++b) {
    const int k = bound[b];
    VibRotLevel lv;
    lv.v = k;
    lv.J = J;
    lv.energy = eig.values(k);
    Eigen::VectorXd u = eig.vectors.col(k) / std::sqrt(h);
    Eigen::Index imax = 0;
    u.cwiseAbs().maxCoeff(&imax);
    if (u(imax) < 0.0) u = -u;
    // amplitude at the walls relative to the peak
    const int edge = std::max(1, grid.points / 100);
    const double peak = u.cwiseAbs().maxCoeff();
    const double tail = std::max(u.head(edge).cwiseAbs().maxCoeff(), u.tail(edge).cwiseAbs().maxCoeff());
    lv.norm_converged = tail <= 1e-6 * peak;
    if (vectors) out.wavefunctions.col(static_cast<Eigen::Index>(b)) = u;
    out.levels.push_back(lv);

    if (grid.numerov_check) {
      double gap = out.dissociation - lv.energy;
      if (k > 0) gap = std::min(gap, lv.energy - eig.values(k - 1));
      if (k + 1 < want) gap = std::min(gap, eig.values(k + 1) - lv.energy);
      const double en = numerov_root(sg, mu, lv.energy, 0.45 * gap);
      out.numerov_energies.push_back(en);
      out.max_numerov_deviation = std::max(out.max_numerov_deviation, std::abs(en - lv.energy));
    }
  }
  if (grid.numerov_check && out.max_numerov_deviation > grid.numerov_tolerance) {
    std::ostringstream msg;
    msg << "grid too coarse: Numerov and grid levels differ by " << out.max_numerov_deviation << " hartree";
    throw SolverError(msg.str());
  }
  return out;
}

RadialSolution solve_radial(const PotentialCurve &curve, double mu, int J, int n_levels, const RadialGrid &grid,
                            bool vectors) {
  const CurveInterpolant V(curve, 0);
  return solve_radial(std::cref(V), mu, J, n_levels, grid, vectors);
}

double nuclear_reduced_mass(const MolecularSystem &system) {
  if (system.nuclear_count() != 2) throw InvalidInput("nuclear reduced mass needs two nuclei");
  const double w = inverse_mass(system.nucleus(0).mass) + inverse_mass(system.nucleus(1).mass);
  if (w == 0.0) return kInfiniteMass;
  return 1.0 / w;
}

std::string KappaExpansion::json() const {
  nlohmann::ordered_json j;
  j["V0"] = V0;
  j["omega"] = omega;
  j["B"] = B;
  j["k"] = k;
  j["kappa"] = kappa;
  j["rMin"] = r_min;
  j["mu"] = mu;
  j["predicted_spacing"] = predicted_spacing;
  j["actual_spacing"] = actual_spacing;
  return j.dump(2);
}

KappaExpansion kappa_expansion(const PotentialCurve &curve, const MolecularSystem &system, const RadialGrid &grid) {
  KappaExpansion x;
  CurveMinimum m;
  try {
    m = refine_minimum(curve, 0);
  } catch (const SolverError &e) {
    throw SolverError(std::string("not a minimum: ") + e.what());
  }
  const CurveInterpolant V(curve, 0);
  x.V0 = m.V0;
  x.r_min = m.r_min;
  const double h = 0.02;
  const double r0 = m.r_min;
  x.k = (-V(r0 - 2 * h) + 16 * V(r0 - h) - 30 * V(r0) + 16 * V(r0 + h) - V(r0 + 2 * h)) / (12 * h * h);
  if (!(x.k > 0.0)) throw SolverError("not a minimum: curvature " + format_number(x.k));
  x.mu = nuclear_reduced_mass(system);
  x.kappa = kappa(system).value;
  x.omega = std::sqrt(x.k / x.mu);
  x.B = 1.0 / (2.0 * x.mu * r0 * r0);
  x.harmonic_term = 0.5 * x.omega;
  x.rotational_unit = x.B;
  x.predicted_spacing = x.omega;
  auto lv = solve_radial(curve, x.mu, 0, 2, grid);
  if (lv.levels.size() >= 2) x.actual_spacing = lv.levels[1].energy - lv.levels[0].energy;
  return x;
}

std::string levels_csv(const std::vector<VibRotLevel> &levels) {
  CsvTable t({"v", "J", "energy_hartree"});
  for (const auto &l : levels) t.add_row({std::to_string(l.v), std::to_string(l.J), format_number(l.energy)});
  return t.str();
}

} // namespace molab
