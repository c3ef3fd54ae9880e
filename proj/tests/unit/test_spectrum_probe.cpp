#include "molab/error.hpp"
#include "molab/nuclear_motion.hpp"
#include "molab/numerics.hpp"
#include "molab/spectrum_probe.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace molab;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double mp = 1836.15267;

const MolecularSystem &clamped() {
  static const MolecularSystem s = build_system({{kInfiniteMass, 1}, {kInfiniteMass, 1}}, 1);
  return s;
}
const MolecularSystem &h2() {
  static const MolecularSystem s = build_system({{mp, 1}, {mp, 1}}, 1);
  return s;
}

// Ground curve from near coalescence out to 14 bohr, computed once.
const PotentialCurve &wide_curve() {
  static const PotentialCurve c = [] {
    std::vector<double> r;
    for (int i = 1; i <= 20; ++i) r.push_back(0.05 * i);
    for (int i = 1; i <= 100; ++i) r.push_back(1.0 + 0.05 * i);
    for (int i = 1; i <= 40; ++i) r.push_back(6.0 + 0.2 * i);
    return potential_curve(clamped(), r, 1);
  }();
  return c;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> s;
  for (int i = 0; i < n; ++i) s.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return s;
}

double gauss_legendre_integral(const std::function<double(double)> &f, double a, double b, int panels) {
  const auto &rule = gauss_legendre(20);
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
      sum += 0.5 * (hi - lo) * rule.weights[k] * f(0.5 * (hi + lo) + 0.5 * (hi - lo) * rule.nodes[k]);
  }
  return sum;
}
} // namespace

TEST_CASE("packet radial density is a normalised 3D Gaussian", "[probe]") {
  for (double sigma : {0.05, 0.4, 1.0}) {
    const double b = 2.0;
    auto P = [&](double r) { return packet_density(r, b, sigma); };
    const double hi = b + 10 * sigma;
    CHECK_THAT(gauss_legendre_integral(P, 0.0, hi, 40), WithinAbs(1.0, 1e-12));
    // <|t|^2> = b^2 + 3 sigma^2 for an isotropic Gaussian
    CHECK_THAT(gauss_legendre_integral([&](double r) { return r * r * P(r); }, 0.0, hi, 40),
               WithinRel(b * b + 3 * sigma * sigma, 1e-12));
    const double h = 1e-6 * sigma;
    for (double r : {1.5, 2.0, 2.3})
      CHECK_THAT(packet_density_dsigma(r, b, sigma),
                 WithinAbs((packet_density(r, b, sigma + h) - packet_density(r, b, sigma - h)) / (2 * h),
                           1e-6 * (1 + std::abs(packet_density_dsigma(r, b, sigma)))));
  }
}

TEST_CASE("Weyl variance exponents at and away from the minimum", "[probe][weyl]") {
  const auto &c = wide_curve();
  const auto m = refine_minimum(c);
  const std::vector<double> sigmas{0.1, 0.05, 0.025, 0.0125, 0.00625};
  const auto at_min = weyl_moments(c, m.r_min, 0, sigmas);
  CHECK_THAT(at_min.fitted_variance_exponent, WithinAbs(4.0, 0.3));
  CHECK_THAT(at_min.extrapolated_mean, WithinAbs(at_min.fibre_energy, 1e-6));
  for (std::size_t i = 1; i < sigmas.size(); ++i) CHECK(at_min.variances[i] < at_min.variances[i - 1]);

  const auto off = weyl_moments(c, 3.0, 0, sigmas);
  CHECK_THAT(off.fitted_variance_exponent, WithinAbs(2.0, 0.2));
  CHECK_THAT(off.extrapolated_mean, WithinAbs(off.fibre_energy, 1e-6));
  // variance -> E'(b)^2 sigma^2, slope from a central difference of the raw samples
  std::size_t i3 = 0;
  while (std::abs(c.r[i3] - 3.0) > 1e-9) ++i3;
  const double slope = (c.energies[0][i3 + 1] - c.energies[0][i3 - 1]) / (c.r[i3 + 1] - c.r[i3 - 1]);
  CHECK_THAT(off.variances.back() / (sigmas.back() * sigmas.back()), WithinRel(slope * slope, 1e-2));

  CHECK(off.csv().rfind("sigma,mean,variance\n", 0) == 0);
  CHECK_THAT(off.json(), ContainsSubstring("\"fitted_variance_exponent\""));
}

TEST_CASE("Weyl moments reject bad packet lists", "[probe][weyl]") {
  const auto &c = wide_curve();
  CHECK_THROWS_WITH(weyl_moments(c, 2.0, 0, {0.01, 0.1}), ContainsSubstring("sigmaList must be descending"));
  CHECK_THROWS_WITH(weyl_moments(c, 0.3, 0, {0.1}), ContainsSubstring("leaves the curve domain"));
  CHECK_THROWS_AS(weyl_moments(c, 2.0, 3, {0.1}), InvalidInput);
}

TEST_CASE("fibrewise quadrature of the interpolated curve matches direct fibre energies", "[probe][weyl]") {
  // finely sampled near b, as the interpolant needs
  std::vector<double> r;
  for (int i = 0; i <= 50; ++i) r.push_back(1.5 + 0.02 * i);
  const auto c = potential_curve(clamped(), r, 1);
  const double b = 2.0, sigma = 0.05;
  const auto w = weyl_moments(c, b, 0, {sigma});
  auto direct = [&](double x) {
    return solve_two_center(x, 1, 1, 1.0, 1).states[0].energy_total * packet_density(x, b, sigma);
  };
  const double ref = gauss_legendre_integral(direct, b - 8 * sigma, b, 1) + gauss_legendre_integral(direct, b, b + 8 * sigma, 1);
  CHECK_THAT(w.means[0], WithinAbs(ref, 1e-8));
}

TEST_CASE("H_ELEC packets collapse onto the fibre, FULL_INTERNAL ones do not", "[probe][collapse]") {
  const auto &c = wide_curve();
  const auto m = refine_minimum(c);
  const auto sigmas = log_grid(1e-3, 1.0, 31);

  const auto helec = internal_hamiltonian(clamped()).internal;
  const auto t = collapse_probe(helec, c, m.r_min, sigmas, ProbeMode::HElec);
  CHECK_FALSE(t.interior_minimum_found);
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    CHECK(t.gradients[i] > 0.0);
    CHECK(t.gradient_signs[i] == 1);
    if (i) CHECK(t.energies[i] > t.energies[i - 1]);
  }
  CHECK(t.csv().rfind("sigma,energy,dE_dsigma\n", 0) == 0);

  // analytic gradient against a difference of traced energies
  const auto pair = collapse_probe(helec, c, 3.0, {0.2 * (1 - 1e-4), 0.2 * (1 + 1e-4)}, ProbeMode::HElec);
  const double fd = (pair.energies[1] - pair.energies[0]) / (0.4e-4);
  CHECK_THAT(collapse_probe(helec, c, 3.0, {0.2}, ProbeMode::HElec).gradients[0], WithinRel(fd, 1e-5));

  const auto full = internal_hamiltonian(h2()).internal;
  const auto f = collapse_probe(full, c, m.r_min, sigmas, ProbeMode::FullInternal);
  REQUIRE(f.interior_minimum_found);
  // harmonic estimate, k from a second difference of the raw samples
  std::size_t i0 = 0;
  for (std::size_t i = 1; i < c.r.size(); ++i)
    if (c.energies[0][i] < c.energies[0][i0]) i0 = i;
  const double h = c.r[i0 + 1] - c.r[i0];
  const double k = (c.energies[0][i0 + 1] - 2 * c.energies[0][i0] + c.energies[0][i0 - 1]) / (h * h);
  const double mu = nuclear_reduced_mass(h2());
  CHECK_THAT(f.sigma_star, WithinRel(std::pow(mu * k, -0.25), 0.25));
  CHECK(f.energy_star > m.V0);
  CHECK_THAT(f.json(), ContainsSubstring("\"sigma_star\""));

  CHECK_THROWS_AS(collapse_probe(full, c, m.r_min, sigmas, ProbeMode::HElec), InvalidInput);
  CHECK_THROWS_AS(collapse_probe(helec, c, m.r_min, sigmas, ProbeMode::FullInternal), NonSelfAdjointRisk);
  CHECK_THROWS_AS(collapse_probe(helec, c, m.r_min, {0.1, 0.01}, ProbeMode::HElec), InvalidInput);
}

TEST_CASE("a flat fibre energy gives a sigma-independent expectation", "[probe][collapse]") {
  PotentialCurve flat;
  flat.Z1 = flat.Z2 = 0.0;
  for (int i = 0; i <= 100; ++i) {
    flat.r.push_back(0.05 + 0.1 * i);
    flat.threshold.push_back(0.0);
  }
  flat.energies.assign(1, std::vector<double>(flat.r.size(), -0.3));
  const auto helec = internal_hamiltonian(clamped()).internal;
  const auto t = collapse_probe(helec, flat, 4.0, log_grid(1e-3, 0.4, 9), ProbeMode::HElec);
  for (std::size_t i = 0; i < t.energies.size(); ++i) {
    CHECK_THAT(t.energies[i], WithinAbs(-0.3, 1e-12));
    CHECK(std::abs(t.gradients[i]) < 1e-9);
  }
}

TEST_CASE("spectrum cover of the ground curve", "[probe][cover]") {
  const auto &c = wide_curve();
  const auto m = refine_minimum(c);
  const auto at = spectrum_cover(c, m.V0);
  REQUIRE(at.size() == 1);
  CHECK(at[0] == m.r_min);
  CHECK(spectrum_cover(c, m.V0 - 0.01).empty());

  const auto two = spectrum_cover(c, -0.55);
  REQUIRE(two.size() == 2);
  CHECK(two[0] < m.r_min);
  CHECK(two[1] > m.r_min);
  // independent bracketing: linear interpolation across sign changes of the samples
  std::vector<double> crossings;
  const auto &e = c.energies[0];
  for (std::size_t i = 1; i < e.size(); ++i)
    if ((e[i - 1] + 0.55) * (e[i] + 0.55) < 0.0)
      crossings.push_back(c.r[i - 1] + (c.r[i] - c.r[i - 1]) * (-0.55 - e[i - 1]) / (e[i] - e[i - 1]));
  REQUIRE(crossings.size() == 2);
  CHECK_THAT(two[0], WithinAbs(crossings[0], 2e-3));
  CHECK_THAT(two[1], WithinAbs(crossings[1], 2e-3));

  // above the dissociation limit only the inner wall remains
  CHECK(spectrum_cover(c, -0.45).size() == 1);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> above(m.V0, m.V0 + 0.1), below(m.V0 - 1.0, m.V0);
  int hit = 0, miss = 0;
  for (int i = 0; i < 20; ++i) {
    hit += !spectrum_cover(c, above(rng)).empty();
    miss += spectrum_cover(c, std::nextafter(below(rng), -1.0)).empty();
  }
  CHECK(hit == 20);
  CHECK(miss == 20);
}

TEST_CASE("Gaussian inverse-distance moments against closed forms", "[probe][kato]") {
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  // E[1/|u|^2] = 1/c for a centred isotropic Gaussian
  CHECK_THAT(inverse_distance_moment(zero, zero, 0.7, 0.7, 0.7), WithinRel(1.0 / 0.7, 1e-8));
  // independent pair: product of E[1/|u|] = erf(|m| / sqrt(2c)) / |m|
  const Eigen::Vector3d mu(0.0, 0.0, 1.3), mv(0.4, 0.0, -0.2);
  auto one = [](const Eigen::Vector3d &m, double c) { return std::erf(m.norm() / std::sqrt(2 * c)) / m.norm(); };
  CHECK_THAT(inverse_distance_moment(mu, mv, 0.5, 0.0, 2.0), WithinRel(one(mu, 0.5) * one(mv, 2.0), 1e-8));
  CHECK_THROWS_AS(inverse_distance_moment(zero, zero, 0.0, 0.0, 1.0), SolverError);
}

TEST_CASE("Kato ratios: bounded with kinetic energy, divergent without", "[probe][kato]") {
  const auto m = refine_minimum(wide_curve());
  std::vector<double> widths;
  for (int i = 0; i <= 20; ++i) widths.push_back(0.5 * std::pow(10.0, -i / 10.0));

  TrialFamily f;
  f.centers = Eigen::MatrixXd::Zero(2, 3);
  f.centers(0, 2) = m.r_min;
  f.widths = Eigen::Vector2d(1.0, 1.0);
  f.shrinking = 0;
  f.shrink_widths = widths;
  const auto full = kato_ratio_probe(internal_hamiltonian(h2()).internal, f);
  CHECK(full.tail_growth < 2.0);
  CHECK(full.bounded);
  CHECK_FALSE(full.divergent);
  // product rule: ||(Tn + Te) f||^2 = ||Tn f||^2 + ||Te f||^2 + 2 <Tn><Te> for a product state
  {
    const auto K = internal_hamiltonian(h2()).internal.kinetic;
    const double w = full.rows.back().width;
    const double tn = std::sqrt(15.0) / 8.0 * K(0, 0) / (w * w), te = std::sqrt(15.0) / 8.0 * K(1, 1);
    const double en = 3.0 * K(0, 0) / (8.0 * w * w), ee = 3.0 * K(1, 1) / 8.0;
    CHECK_THAT(full.rows.back().kinetic_norm, WithinRel(std::sqrt(tn * tn + te * te + 2 * en * ee), 1e-12));
  }

  TrialFamily g = f;
  g.centers(0, 2) = 0.0; // nuclear coalescence
  const auto helec = kato_ratio_probe(internal_hamiltonian(clamped()).internal, g);
  CHECK(helec.tail_growth > 5.0);
  CHECK(helec.divergent);
  CHECK_FALSE(helec.bounded);
  CHECK(helec.csv().rfind("width,potential_norm,kinetic_norm,ratio\n", 0) == 0);

  // hydrogen atom, electron width shrinking: ||V f|| ~ 1/w loses to ||T f|| ~ 1/w^2
  TrialFamily a;
  a.centers = Eigen::MatrixXd::Zero(1, 3);
  a.widths = Eigen::VectorXd::Ones(1);
  a.shrink_widths = widths;
  const auto hyd = kato_ratio_probe(internal_hamiltonian(build_system({{mp, 1}}, 1)).internal, a);
  CHECK(hyd.bounded);
  for (const auto &row : hyd.rows) {
    const double K = 1.0 + 1.0 / mp;
    CHECK_THAT(row.kinetic_norm, WithinRel(std::sqrt(15.0) / 8.0 * K / (row.width * row.width), 1e-12));
    CHECK_THAT(row.potential_norm, WithinRel(1.0 / row.width, 1e-8)); // E[1/r^2] = 1/w^2
  }

  a.shrink_widths = {0.5, 0.2};
  CHECK_THROWS_WITH(kato_ratio_probe(internal_hamiltonian(build_system({{mp, 1}}, 1)).internal, a),
                    ContainsSubstring("decade"));
  a.centers = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(kato_ratio_probe(internal_hamiltonian(build_system({{mp, 1}}, 1)).internal, a), InvalidInput);
}

TEST_CASE("Born-Oppenheimer selection reproduces the clamped solver", "[probe][bo]") {
  const auto d = bo_select(h2(), 2.0);
  CHECK(d.coordinate_count == 1);
  CHECK(d.kinetic(0, 0) == 1.0);
  CHECK_THAT(d.constant_shift, WithinRel(0.5, 1e-15));
  CHECK_THAT(solve_clamped(d, 1).states[0].energy_total,
             WithinAbs(solve_two_center(2.0, 1, 1, 1.0, 1).states[0].energy_total, 1e-8));

  // Hughes-Eckart kept: electron reduced mass, equal to the rescaled flag-off energy
  const auto he = bo_select(h2(), 2.0, true);
  const double mu = electron_mass_factor(h2());
  CHECK_THAT(h2().total_nuclear_mass(), WithinAbs(3672.3, 0.01));
  CHECK_THAT(he.kinetic(0, 0), WithinRel(1.0 / mu, 1e-15));
  const auto on = solve_clamped(he, 1).states[0];
  const auto off = solve_clamped(bo_select(h2(), mu * 2.0), 1).states[0];
  const auto rescaled = finite_mass_rescale(off, h2());
  CHECK_THAT(rescaled.r, WithinRel(2.0, 1e-14));
  CHECK_THAT(on.energy_electronic, WithinAbs(rescaled.energy_electronic, 1e-8));

  // reassembled curve
  const std::vector<double> r{1.0, 1.7, 2.4, 4.0};
  const auto curve = potential_curve(clamped(), r, 1);
  for (std::size_t i = 0; i < r.size(); ++i)
    CHECK_THAT(solve_clamped(bo_select(clamped(), r[i]), 1).states[0].energy_total,
               WithinAbs(curve.energies[0][i], 1e-12));

  CHECK_THROWS_AS(bo_select(h2(), 0.0), InvalidInput);
  CHECK_THROWS_AS(bo_select(build_system({{mp, 1}}, 1), 1.0), InvalidInput);
}
