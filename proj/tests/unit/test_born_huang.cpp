#include "molab/born_huang.hpp"
#include "molab/error.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace molab;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double mp = 1836.15267;

std::vector<double> grid(double a, double b, double step) {
  std::vector<double> r;
  for (int i = 0; a + i * step <= b + 1e-12; ++i) r.push_back(a + i * step);
  return r;
}

const MolecularSystem &h2() {
  static const MolecularSystem s = build_system({{mp, 1}, {mp, 1}}, 1);
  return s;
}

// gerade manifold, three channels, computed once
const CouplingMatrix &gerade() {
  static const CouplingMatrix cm = [] {
    CouplingOptions o;
    o.manifold = Parity::Gerade;
    return coupling_matrix(h2(), grid(0.6, 6.0, 0.1), 3, o);
  }();
  return cm;
}

RadialGrid inner_grid() {
  RadialGrid g;
  g.r_lo = 0.6;
  g.r_hi = 6.0;
  g.points = 1500;
  return g;
}
} // namespace

TEST_CASE("F is antisymmetric with a vanishing diagonal", "[coupling]") {
  const auto &cm = gerade();
  REQUIRE(cm.channels == 3);
  CHECK(cm.labels == std::vector<std::string>{"sigma_g1", "sigma_g2", "sigma_g3"});
  CHECK(cm.min_neighbour_overlap >= 0.9);
  for (const auto &F : cm.F) {
    for (int m = 0; m < 3; ++m) {
      CHECK(std::abs(F(m, m)) <= 1e-8);
      for (int n = 0; n < 3; ++n) CHECK(std::abs(F(m, n) + F(n, m)) <= 1e-8);
    }
  }
}

TEST_CASE("g/u selection rule for the first-derivative coupling", "[coupling]") {
  const auto cm = coupling_matrix(h2(), {1.0, 1.5, 2.0, 2.5, 3.0}, 2);
  CHECK(cm.labels == std::vector<std::string>{"sigma_g1", "sigma_u1"});
  for (std::size_t i = 0; i < cm.r.size(); ++i) {
    CHECK(std::abs(cm.F[i](0, 1)) <= 1e-8);
    // second differences amplify the round-off in the overlaps
    CHECK(std::abs(cm.G[i](0, 1)) <= 1e-6);
  }
}

TEST_CASE("1s sigma_g - 2s sigma_g coupling is nonzero and strongest relative to the gap where the curves approach",
          "[coupling]") {
  const auto &cm = gerade();
  std::vector<double> gap, ratio;
  for (std::size_t i = 0; i < cm.r.size(); ++i) {
    CHECK(std::abs(cm.F[i](0, 1)) > 1e-2);
    gap.push_back(cm.energies[1][i] - cm.energies[0][i]);
    ratio.push_back(std::abs(cm.F[i](0, 1)) / gap.back());
  }
  // the gap narrows monotonically outward; the ratio climbs with it and flattens near the end
  for (std::size_t i = 1; i < gap.size(); ++i) CHECK(gap[i] < gap[i - 1]);
  const auto strongest = std::max_element(ratio.begin(), ratio.end()) - ratio.begin();
  CHECK(strongest >= static_cast<long>(0.9 * ratio.size()));
  CHECK(ratio.back() > 1.5 * ratio.front());
}

TEST_CASE("second-derivative diagonal is minus the diagonal correction", "[coupling]") {
  const auto &cm = gerade();
  for (const auto &G : cm.G) CHECK(G(0, 0) < 0.0);
  const auto csv = cm.csv();
  CHECK(csv.rfind("r,F_01,F_02,F_12,G_00,G_01,", 0) == 0);
}

TEST_CASE("phase discontinuity demands a finer grid", "[coupling]") {
  CouplingOptions o;
  o.manifold = Parity::Gerade;
  CHECK_THROWS_WITH(coupling_matrix(h2(), {0.6, 6.0}, 2, o), ContainsSubstring("finer grid"));
  CHECK_THROWS_AS(coupling_matrix(h2(), {2.0, 1.0}, 1), InvalidInput);
}

TEST_CASE("one channel without couplings is the Born-Oppenheimer solve", "[coupled]") {
  const auto &cm = gerade();
  const auto curves = cm.curves();
  const double mu = nuclear_reduced_mass(h2());
  RadialGrid g = inner_grid();
  const auto one = solve_coupled(curves, cm, mu, 1, 3, g, {false, false});
  const auto bo = solve_radial(curves, mu, 0, 3, g);
  for (int k = 0; k < 3; ++k) CHECK_THAT(one.energies[k], WithinAbs(bo.levels[k].energy, 1e-9));
  const auto ad = adiabatic_solve(curves, nullptr, mu, 3, g);
  for (int k = 0; k < 3; ++k) CHECK_THAT(ad.energies[k], WithinAbs(bo.levels[k].energy, 1e-9));
}

TEST_CASE("two uncoupled channels give the union of the single-channel spectra", "[coupled]") {
  const auto &cm = gerade();
  const auto curves = cm.curves();
  const double mu = nuclear_reduced_mass(h2());
  RadialGrid g = inner_grid();
  g.numerov_check = false;
  const auto two = solve_coupled(curves, cm, mu, 2, 6, g, {false, false});
  std::vector<double> all;
  for (std::size_t c = 0; c < 2; ++c) {
    const CurveInterpolant V(curves, c);
    for (const auto &l : solve_radial(std::cref(V), mu, 0, 6, g).levels) all.push_back(l.energy);
  }
  std::sort(all.begin(), all.end());
  for (int k = 0; k < 6; ++k) CHECK_THAT(two.energies[k], WithinAbs(all[k], 1e-9));
}

TEST_CASE("coupled channels lower the ground level monotonically", "[coupled]") {
  const auto &cm = gerade();
  const auto curves = cm.curves();
  const double mu = nuclear_reduced_mass(h2());
  const RadialGrid g = inner_grid();
  const double bo = solve_coupled(curves, cm, mu, 1, 1, g, {false, false}).energies[0];
  std::vector<double> e;
  for (int C = 1; C <= 3; ++C) {
    const auto s = solve_coupled(curves, cm, mu, C, 1, g);
    CHECK(s.hermiticity_residual <= 1e-8);
    double total = 0.0;
    for (double w : s.channel_weights[0]) total += w;
    CHECK_THAT(total, WithinAbs(1.0, 1e-10));
    e.push_back(s.energies[0]);
  }
  // diagonal G term pushes the one-channel level above the clamped-curve level
  CHECK(e[0] > bo);
  CHECK(e[1] <= e[0] + 1e-9);
  CHECK(e[2] <= e[1] + 1e-9);
  // small positive lowering, same sign as second-order perturbation theory
  CHECK(e[0] - e[1] > 0.0);
  CHECK(e[0] - e[1] < 1e-5);
}

TEST_CASE("solve_coupled rejects inconsistent requests", "[coupled]") {
  const auto &cm = gerade();
  const auto curves = cm.curves();
  CHECK_THROWS_AS(solve_coupled(curves, cm, 918.0, 4, 1, inner_grid()), InvalidInput);
  RadialGrid wide = inner_grid();
  wide.r_hi = 9.0;
  CHECK_THROWS_WITH(solve_coupled(curves, cm, 918.0, 2, 1, wide), ContainsSubstring("inside the coupling grid"));
}

TEST_CASE("diagonal correction raises every level and vanishes with the nuclear mass", "[adiabatic]") {
  const auto r = grid(0.6, 6.0, 0.2);
  const auto dc = diagonal_correction(h2(), r, true);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(dc.radial[i] > 0.0);
    CHECK(dc.perpendicular[i] > 0.0);
  }
  // perpendicular term approaches the atomic 1/12 from below at large separation
  CHECK(dc.perpendicular.back() < 1.0 / 12.0);
  CHECK(dc.perpendicular.back() > 0.06);

  const auto curve = gerade().curves();
  const double mu = nuclear_reduced_mass(h2());
  RadialGrid g = inner_grid();
  const auto bo = adiabatic_solve(curve, nullptr, mu, 3, g);
  const auto ad = adiabatic_solve(curve, &dc, mu, 3, g);
  for (int k = 0; k < 3; ++k) CHECK(ad.energies[k] > bo.energies[k]);
  // shift ~ <Q>/(2 mu): a hundredfold mass cuts it about a hundredfold
  const auto bo_heavy = adiabatic_solve(curve, nullptr, 100 * mu, 1, g);
  const auto ad_heavy = adiabatic_solve(curve, &dc, 100 * mu, 1, g);
  const double ratio = (ad_heavy.energies[0] - bo_heavy.energies[0]) / (ad.energies[0] - bo.energies[0]);
  CHECK_THAT(ratio, WithinAbs(0.01, 0.002));
}
