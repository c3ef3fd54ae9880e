#include "molab/spectrum_probe.hpp"

#include "molab/error.hpp"
#include "molab/io.hpp"
#include "molab/nuclear_motion.hpp"
#include "molab/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace molab {

namespace {

constexpr double kSupport = 8.0; // packet support in standard deviations

void require_descending(const std::vector<double> &s, const char *what) {
  if (s.empty()) throw InvalidInput(std::string(what) + " is empty");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0) || !std::isfinite(s[i])) throw InvalidInput(std::string(what) + " entries must be positive");
    if (i && !(s[i] < s[i - 1])) throw InvalidInput(std::string(what) + " must be descending");
  }
}

double integrate(const std::function<double(double)> &f, double a, double b, double rel = 1e-9,
                 double abs = 1e-17) {
  const auto q = integrate_adaptive(f, a, b, rel, abs, 24);
  if (!q.converged) throw SolverError("packet quadrature did not converge");
  return q.value;
}

// Packet mass outside [lo, hi].
double outside_mass(double lo, double hi, double b, double sigma) {
  const double a = std::max(0.0, b - kSupport * sigma), c = b + kSupport * sigma;
  auto P = [&](double r) { return packet_density(r, b, sigma); };
  double m = 0.0;
  if (lo > a) m += integrate(P, a, std::min(lo, c));
  if (hi < c) m += integrate(P, std::max(hi, a), c);
  return m;
}

// Integral of f against the packet (or its sigma derivative), split at b where
// the integrand is sharpest.
// `noise` is the absolute round-off of f; the weight integrates to O(1), its
// sigma derivative to O(1/sigma).
double packet_integral(const std::function<double(double)> &f, double b, double sigma, bool derivative,
                       double noise = 1e-17) {
  const double a = std::max(0.0, b - kSupport * sigma), c = b + kSupport * sigma;
  auto g = [&](double r) {
    return f(r) * (derivative ? packet_density_dsigma(r, b, sigma) : packet_density(r, b, sigma));
  };
  const double abs = derivative ? noise / sigma : noise;
  return integrate(g, a, b, 1e-9, abs) + integrate(g, b, c, 1e-9, abs);
}

struct Moments {
  double mean, variance;
};

Moments moments(const std::function<double(double)> &E, double b, double sigma) {
  const double Eb = E(b);
  // subtract E(b) so narrow packets keep their relative accuracy
  const double d1 = packet_integral([&](double r) { return E(r) - Eb; }, b, sigma, false);
  const double d2 = packet_integral([&](double r) { return (E(r) - Eb) * (E(r) - Eb); }, b, sigma, false);
  return {Eb + d1, std::max(0.0, d2 - d1 * d1)};
}

} // namespace

double packet_density(double r, double b, double sigma) {
  if (r <= 0.0) return 0.0;
  const double s2 = 2.0 * sigma * sigma;
  const double gm = std::exp(-(r - b) * (r - b) / s2), gp = std::exp(-(r + b) * (r + b) / s2);
  return r / (b * sigma * std::sqrt(2.0 * M_PI)) * (gm - gp);
}

double packet_density_dsigma(double r, double b, double sigma) {
  if (r <= 0.0) return 0.0;
  const double s2 = 2.0 * sigma * sigma, s3 = sigma * sigma * sigma;
  const double gm = std::exp(-(r - b) * (r - b) / s2), gp = std::exp(-(r + b) * (r + b) / s2);
  const double pre = r / (b * std::sqrt(2.0 * M_PI));
  return pre * (-(gm - gp) / (sigma * sigma) + (gm * (r - b) * (r - b) - gp * (r + b) * (r + b)) / (sigma * s3));
}

// ---------------------------------------------------------------------------
// Weyl moments

std::string WeylProbe::csv() const {
  CsvTable t({"sigma", "mean", "variance"});
  for (std::size_t i = 0; i < sigmas.size(); ++i) t.add_row(std::vector<double>{sigmas[i], means[i], variances[i]});
  return t.str();
}

std::string WeylProbe::json() const {
  nlohmann::ordered_json j;
  j["b"] = b;
  j["state"] = state;
  j["fibre_energy"] = fibre_energy;
  j["extrapolated_mean"] = extrapolated_mean;
  j["fitted_variance_exponent"] = fitted_variance_exponent;
  return j.dump(2);
}

WeylProbe weyl_moments(const std::function<double(double)> &fibre, double lo, double hi, double b,
                       const std::vector<double> &sigmas) {
  require_descending(sigmas, "sigmaList");
  if (!(b > 0.0)) throw InvalidInput("packet centre b must be positive");
  for (double s : sigmas)
    if (b - kSupport * s < lo || b + kSupport * s > hi)
      throw InvalidInput("packet of width " + format_number(s) + " at b = " + format_number(b) +
                         " leaves the curve domain [" + format_number(lo) + ", " + format_number(hi) + "]");
  WeylProbe w;
  w.b = b;
  w.sigmas = sigmas;
  w.fibre_energy = fibre(b);
  for (double s : sigmas) {
    const auto m = moments(fibre, b, s);
    w.means.push_back(m.mean);
    w.variances.push_back(m.variance);
  }
  if (sigmas.size() >= 2) {
    w.fitted_variance_exponent = log_log_slope(w.sigmas, w.variances);
    const std::size_t n = sigmas.size();
    const double a2 = sigmas[n - 2] * sigmas[n - 2], b2 = sigmas[n - 1] * sigmas[n - 1];
    w.extrapolated_mean = (a2 * w.means[n - 1] - b2 * w.means[n - 2]) / (a2 - b2);
  } else {
    w.extrapolated_mean = w.means[0];
  }
  return w;
}

WeylProbe weyl_moments(const PotentialCurve &curve, double b, int state, const std::vector<double> &sigmas) {
  if (state < 0) throw InvalidInput("state index must be non-negative");
  const CurveInterpolant V(curve, static_cast<std::size_t>(state));
  auto w = weyl_moments(std::cref(V), V.r_front(), V.r_back(), b, sigmas);
  w.state = state;
  return w;
}

// ---------------------------------------------------------------------------
// Collapse probe

const char *probe_mode_name(ProbeMode m) { return m == ProbeMode::HElec ? "H_ELEC" : "FULL_INTERNAL"; }

std::string CollapseTrace::csv() const {
  CsvTable t({"sigma", "energy", "dE_dsigma"});
  for (std::size_t i = 0; i < sigmas.size(); ++i) t.add_row(std::vector<double>{sigmas[i], energies[i], gradients[i]});
  return t.str();
}

std::string CollapseTrace::json() const {
  nlohmann::ordered_json j;
  j["mode"] = probe_mode_name(mode);
  j["b"] = b;
  j["interior_minimum_found"] = interior_minimum_found;
  j["sigma_star"] = interior_minimum_found ? nlohmann::json(sigma_star) : nlohmann::json(nullptr);
  j["energy_star"] = interior_minimum_found ? nlohmann::json(energy_star) : nlohmann::json(nullptr);
  j["gradient_signs"] = gradient_signs;
  return j.dump(2);
}

CollapseTrace collapse_probe(const OperatorDescriptor &d, const PotentialCurve &curve, double b,
                             const std::vector<double> &sigmas, ProbeMode mode, const DiagonalCorrection *correction) {
  if (d.coordinate_count != 2 || d.kinetic.rows() != 2)
    throw InvalidInput("collapse probe needs the internal descriptor of a one-electron diatomic");
  if (!(b > 0.0)) throw InvalidInput("packet centre b must be positive");
  const double K = d.kinetic(0, 0);
  if (mode == ProbeMode::HElec && K != 0.0)
    throw InvalidInput("H_ELEC mode needs the descriptor without nuclear kinetic energy");
  if (mode == ProbeMode::FullInternal && !(K > 0.0))
    throw NonSelfAdjointRisk("NON_SELF_ADJOINT_RISK: FULL_INTERNAL mode needs a nuclear kinetic term");
  std::vector<double> desc(sigmas.rbegin(), sigmas.rend());
  require_descending(desc, "sigmaGrid (read from the widest)");

  const CurveInterpolant V(curve, 0);
  CubicSpline Q;
  if (correction && mode == ProbeMode::FullInternal) Q = CubicSpline(correction->r, correction->total());
  auto q_at = [&](double r) { return Q(std::clamp(r, Q.front(), Q.back())); };
  const double Vb = V(b);
  auto fibre = [&](double r) { return V(r) - Vb; };
  const double noise = 1e-15 * std::max(1.0, std::abs(Vb));

  auto energy = [&](double s) {
    double e = Vb + packet_integral(fibre, b, s, false, noise);
    if (mode == ProbeMode::FullInternal) {
      e += 3.0 * K / (8.0 * s * s);
      if (!Q.empty()) e += 0.5 * K * packet_integral(q_at, b, s, false, noise);
    }
    return e;
  };
  auto gradient = [&](double s) {
    double g = packet_integral(fibre, b, s, true, noise);
    if (mode == ProbeMode::FullInternal) {
      g -= 3.0 * K / (4.0 * s * s * s);
      if (!Q.empty()) g += 0.5 * K * packet_integral(q_at, b, s, true, noise);
    }
    return g;
  };

  CollapseTrace c;
  c.mode = mode;
  c.b = b;
  c.sigmas = sigmas;
  c.nuclear_inverse_mass = K;
  for (double s : sigmas) {
    // the Coulomb sliver near t = 0 is extrapolated; it must carry negligible weight
    if (outside_mass(V.r_front(), V.r_back(), b, s) > 1e-5)
      throw InvalidInput("packet of width " + format_number(s) + " leaves the curve domain");
    c.energies.push_back(energy(s));
    c.gradients.push_back(gradient(s));
    c.gradient_signs.push_back(c.gradients.back() > 0.0 ? 1 : (c.gradients.back() < 0.0 ? -1 : 0));
  }
  for (std::size_t i = 1; i < sigmas.size(); ++i) {
    if (c.gradient_signs[i - 1] < 0 && c.gradient_signs[i] > 0) {
      const auto m = brent_minimize(energy, sigmas[i - 1], sigmas[i], 1e-8 * sigmas[i]);
      c.interior_minimum_found = true;
      c.sigma_star = m.x;
      c.energy_star = m.f;
      break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Spectrum cover

std::vector<double> spectrum_cover(const PotentialCurve &curve, double E) {
  const CurveInterpolant V(curve, 0);
  const auto m = refine_minimum(curve, 0);
  if (E < m.V0) return {};
  if (E == m.V0) return {m.r_min};
  auto f = [&](double r) { return V(r) - E; };
  std::vector<double> roots;

  double lo = V.r_front();
  while (f(lo) < 0.0 && lo > 1e-8) lo *= 0.5;
  if (f(lo) >= 0.0) roots.push_back(bisect_root(f, lo, m.r_min));

  // the outer branch climbs to the dissociation limit and never reaches it
  double hi = V.r_back();
  while (f(hi) < 0.0 && hi < 1e6 && E < V.asymptote()) hi *= 2.0;
  if (f(hi) >= 0.0) roots.push_back(bisect_root(f, m.r_min, hi));
  return roots;
}

// ---------------------------------------------------------------------------
// Kato ratios

double inverse_distance_moment(const Eigen::Vector3d &mu, const Eigen::Vector3d &mv, double cuu, double cuv,
                               double cvv) {
  const double su = cuu + mu.squaredNorm() / 3.0, sv = cvv + mv.squaredNorm() / 3.0;
  if (!(su > 0.0) || !(sv > 0.0)) throw SolverError("norm evaluation failed: a Coulomb distance vanishes identically");
  const double lu = 1.0 / std::sqrt(su), lv = 1.0 / std::sqrt(sv);
  const bool same = cuu == cvv && cuv == cuu && mu == mv;

  // E[exp(-s^2 |u|^2 - t^2 |v|^2)] for the isotropic bivariate normal
  auto gauss = [&](double s2, double t2) {
    const double m00 = 1.0 + 2.0 * s2 * cuu, m01 = 2.0 * s2 * cuv, m10 = 2.0 * t2 * cuv, m11 = 1.0 + 2.0 * t2 * cvv;
    const double det = m00 * m11 - m01 * m10;
    // (I + 2SC)^-1 S
    const double a = m11 * s2 / det, bb = -m01 * t2 / det, dd = m00 * t2 / det;
    double ex = 0.0;
    for (int k = 0; k < 3; ++k) ex += a * mu(k) * mu(k) + 2.0 * bb * mu(k) * mv(k) + dd * mv(k) * mv(k);
    return std::pow(det, -1.5) * std::exp(-ex);
  };
  const double half_pi = 0.5 * M_PI;
  if (same) {
    // E[1/|u|^2] = int 2s E[exp(-s^2 |u|^2)] ds, s = lu tan(theta)
    auto g = [&](double th) {
      const double s = lu * std::tan(th), c = std::cos(th);
      return 2.0 * s * gauss(s * s, 0.0) * lu / (c * c);
    };
    return integrate(g, 0.0, half_pi, 1e-10);
  }
  // polar coordinates in the scaled (s, t) plane: strong u-v correlation puts a
  // ridge along the diagonal, which the radial integral then resolves in 1D
  auto outer = [&](double phi) {
    const double cp = std::cos(phi), sp = std::sin(phi);
    auto radial = [&](double psi) {
      const double rho = std::tan(psi), c = std::cos(psi);
      const double s = lu * rho * cp, t = lv * rho * sp;
      return gauss(s * s, t * t) * rho / (c * c);
    };
    return integrate(radial, 0.0, half_pi, 1e-10);
  };
  return 4.0 / M_PI * lu * lv * integrate(outer, 0.0, half_pi, 1e-9);
}

std::string KatoTable::csv() const {
  CsvTable t({"width", "potential_norm", "kinetic_norm", "ratio"});
  for (const auto &r : rows) t.add_row(std::vector<double>{r.width, r.potential_norm, r.kinetic_norm, r.ratio});
  return t.str();
}

std::string KatoTable::json() const {
  nlohmann::ordered_json j;
  j["tail_growth"] = tail_growth;
  j["bounded"] = bounded;
  j["divergent"] = divergent;
  return j.dump(2);
}

KatoTable kato_ratio_probe(const OperatorDescriptor &d, const TrialFamily &family) {
  const int n = d.coordinate_count;
  if (family.centers.rows() != n || family.centers.cols() != 3 || family.widths.size() != n)
    throw InvalidInput("trial family does not match the descriptor's coordinates");
  if (family.shrinking < 0 || family.shrinking >= n) throw InvalidInput("shrinking coordinate out of range");
  require_descending(family.shrink_widths, "shrink_widths");
  const double span = family.shrink_widths.front() / family.shrink_widths.back();
  if (span < 10.0 * (1.0 - 1e-12)) throw InvalidInput("shrink_widths must span at least one decade");

  KatoTable table;
  for (double width : family.shrink_widths) {
    Eigen::VectorXd w = family.widths;
    w(family.shrinking) = width;
    if (!(w.array() > 0.0).all()) throw InvalidInput("trial widths must be positive");
    const Eigen::VectorXd var = w.array().square();

    // ||T0 f|| in closed form, D = diag(1/(4 w^2))
    const Eigen::MatrixXd KD = d.kinetic * (0.25 / var.array()).matrix().asDiagonal();
    const double tr = KD.trace(), tr2 = (KD * KD).trace();
    const double tnorm = 0.5 * std::sqrt(6.0 * tr2 + 9.0 * tr * tr);

    const std::size_t m = d.coulomb.size();
    std::vector<Eigen::VectorXd> rows(m);
    std::vector<Eigen::Vector3d> means(m);
    for (std::size_t k = 0; k < m; ++k) {
      rows[k] = d.coulomb[k].difference_row();
      means[k] = family.centers.transpose() * rows[k] + d.coulomb[k].difference_offset();
    }
    double v2 = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t l = k; l < m; ++l) {
        const double ckk = rows[k].dot(var.asDiagonal() * rows[k]);
        const double cll = rows[l].dot(var.asDiagonal() * rows[l]);
        const double ckl = rows[k].dot(var.asDiagonal() * rows[l]);
        const double e = inverse_distance_moment(means[k], means[l], ckk, ckl, cll);
        v2 += (k == l ? 1.0 : 2.0) * d.coulomb[k].prefactor * d.coulomb[l].prefactor * e;
      }
    KatoRow row;
    row.width = width;
    row.kinetic_norm = tnorm;
    row.potential_norm = std::sqrt(std::max(0.0, v2));
    row.ratio = row.potential_norm / (tnorm + 1.0);
    table.rows.push_back(row);
  }

  const double target = std::log(10.0 * family.shrink_widths.back());
  std::size_t j = 0;
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (std::abs(std::log(table.rows[i].width) - target) < std::abs(std::log(table.rows[j].width) - target)) j = i;
  table.tail_growth = table.rows.back().ratio / table.rows[j].ratio;
  bool rising = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i) rising = rising && table.rows[i].ratio > table.rows[i - 1].ratio;
  table.bounded = table.tail_growth < 2.0;
  table.divergent = rising && table.tail_growth > 5.0;
  return table;
}

// ---------------------------------------------------------------------------
// Born-Oppenheimer selection

OperatorDescriptor bo_select(const MolecularSystem &system, double b, bool hughes_eckart) {
  if (system.nuclear_count() != 2) throw InvalidInput("BO selection is implemented for diatomics");
  if (!(b > 0.0)) throw InvalidInput("nuclear separation b must be positive");
  const auto sep = internal_hamiltonian(system);
  const OperatorDescriptor &full = sep.internal;
  const int ne = full.coordinate_count - 1;
  const Eigen::Vector3d t(0.0, 0.0, b);

  OperatorDescriptor out;
  out.coordinate_count = ne;
  out.kinetic = hughes_eckart ? Eigen::MatrixXd(full.kinetic.bottomRightCorner(ne, ne))
                              : Eigen::MatrixXd::Identity(ne, ne);
  out.coordinate_labels.assign(full.coordinate_labels.begin() + 1, full.coordinate_labels.end());
  out.constant_shift = full.constant_shift;
  for (const auto &term : full.coulomb) {
    CoulombTerm c = term;
    c.a.row = term.a.row.tail(ne);
    c.b.row = term.b.row.tail(ne);
    c.a.offset = term.a.offset + term.a.row(0) * t;
    c.b.offset = term.b.offset + term.b.row(0) * t;
    if (c.a.row.isZero() && c.b.row.isZero())
      out.constant_shift += c.prefactor / (c.a.offset - c.b.offset).norm();
    else
      out.coulomb.push_back(c);
  }
  out.update_flags();
  return out;
}

} // namespace molab
