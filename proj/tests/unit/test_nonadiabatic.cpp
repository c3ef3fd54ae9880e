#include "molab/error.hpp"
#include "molab/nonadiabatic.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace molab;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double mp = 1836.15267;

// Closed-form m = 0 integrals of exp(-x^T A x) over two 3-vectors: the overlap
// and the Coulomb integral of 1/|w.x|. Derivatives with respect to A_pp bring
// down |x_p|^2 factors, giving an independent route to the prefactor elements.
double overlap0(const Eigen::Matrix2d &A) { return std::pow(M_PI * M_PI / A.determinant(), 1.5); }
double coulomb0(const Eigen::Matrix2d &A, const Eigen::Vector2d &w) {
  const double s2 = w.dot(0.5 * A.inverse() * w);
  return overlap0(A) * std::sqrt(2.0 / M_PI) / std::sqrt(s2);
}
} // namespace

TEST_CASE("three-body Hamiltonian for homonuclear and heteronuclear ions", "[nonadiabatic]") {
  const auto h2 = build_internal_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 1));
  CHECK(h2.alpha1 == 0.5);
  CHECK(h2.alpha2 == -0.5);
  CHECK(h2.homonuclear);
  const auto &K = h2.descriptor.kinetic;
  CHECK_THAT(K(0, 0), WithinRel(2.0 / mp, 1e-14));         // 1/mu nuclear
  CHECK_THAT(K(1, 1), WithinRel(1.0 + 1.0 / (2 * mp), 1e-14)); // electron with Hughes-Eckart
  CHECK(K(0, 1) == 0.0);
  CHECK(h2.descriptor.coulomb.size() == 3);
  CHECK_FALSE(h2.descriptor.flags.non_self_adjoint_risk);

  const auto hd = build_internal_hamiltonian(build_system({{mp, 1}, {2 * mp, 1}}, 1));
  CHECK_THAT(hd.alpha1, WithinAbs(0.66667, 5e-6));
  CHECK_THAT(hd.alpha1, WithinRel(2.0 / 3.0, 1e-14));
  CHECK_FALSE(hd.homonuclear);

  const auto inf = build_internal_hamiltonian(build_system({{kInfiniteMass, 1}, {kInfiniteMass, 1}}, 1));
  CHECK(inf.descriptor.kinetic(0, 0) == 0.0);
  CHECK(inf.descriptor.flags.non_self_adjoint_risk);

  CHECK_THROWS_AS(build_internal_hamiltonian(build_system({{mp, 1}}, 1)), InvalidInput);
  CHECK_THROWS_AS(build_internal_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 2)), InvalidInput);
}

TEST_CASE("prefactor Coulomb elements match derivatives of the plain Gaussian integrals", "[nonadiabatic][ecg]") {
  // one symmetrised term with power 1: both the direct and the exchanged
  // products carry |t|^4, the second derivative in A_tt of the m = 0 integrand
  const auto d = build_internal_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 1)).descriptor;
  CorrelatedGaussianBasis b;
  b.terms.push_back({{0.7, 0.3, 0.4}, 1});
  const auto res = evaluate_basis(d, b);

  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < 3; ++k) {
    const Eigen::Vector2d w = d.coulomb[k].difference_row();
    A += b.terms[0].exponents[k] * w * w.transpose();
  }
  Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
  E(0, 0) = 1.0;
  const double h = 1e-3;
  auto second = [&](auto f) { return (f(A + h * E) - 2 * f(A) + f(A - h * E)) / (h * h); };
  Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
  P(0, 0) = -1.0;
  const Eigen::Matrix2d AX = A + P * A * P;
  A *= 2.0;
  auto second_x = [&](auto f) { return (f(AX + h * E) - 2 * f(AX) + f(AX - h * E)) / (h * h); };
  const double S = second(overlap0) + second_x(overlap0);
  double V = 0.0;
  for (const auto &t : d.coulomb) {
    const Eigen::Vector2d w = t.difference_row();
    V += t.prefactor * (second([&](const Eigen::Matrix2d &X) { return coulomb0(X, w); }) +
                        second_x([&](const Eigen::Matrix2d &X) { return coulomb0(X, w); }));
  }
  CHECK_THAT(res.potential, WithinRel(V / S, 1e-5));
}

TEST_CASE("two-particle reductions", "[nonadiabatic]") {
  VariationalConfig cfg;
  cfg.terms = 16;
  const auto h = solve_variational(internal_hamiltonian(build_system({{mp, 1}}, 1)).internal, cfg);
  const double mu = mp / (mp + 1.0);
  CHECK_THAT(h.energy, WithinAbs(-0.5 * mu, 1e-5));
  CHECK_THAT(-0.5 * mu, WithinAbs(-0.49973, 5e-6));
  CHECK(h.energy >= -0.5 * mu);
  CHECK_THAT(virial_ratio(h), WithinAbs(-2.0, 1e-3));
  CHECK(h.basis.size() == 16);
  CHECK(h.bound);
  CHECK(h.threshold == 0.0);

  const auto ps = solve_variational(internal_hamiltonian(build_system({{1.0, 1}}, 1)).internal, cfg);
  CHECK_THAT(ps.energy, WithinAbs(-0.25, 1e-5));
}

TEST_CASE("H2+ variational energy, symmetry and determinism", "[nonadiabatic][h2]") {
  const auto d = build_internal_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 1)).descriptor;
  VariationalConfig cfg;
  cfg.terms = 60;
  cfg.refine_sweeps = 1;
  const auto a = solve_variational(d, cfg);
  CHECK(a.basis.symmetrized);
  CHECK(a.energy > -0.60264);
  CHECK(a.energy < -0.5966);
  CHECK(a.bound);
  CHECK_THAT(a.threshold, WithinRel(-0.5 / (1.0 + 1.0 / mp), 1e-14));
  // monotone history
  for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i] <= a.history[i - 1]);
  CHECK(a.history.back() == a.energy);

  // bit-identical rerun, also with several threads
  const auto b = solve_variational(d, cfg);
  CHECK(a.history == b.history);
  cfg.threads = 3;
  const auto c = solve_variational(d, cfg);
  CHECK(a.history == c.history);

  // relabelling the nuclei maps each term onto its exchange image
  CorrelatedGaussianBasis swapped = a.basis;
  for (auto &t : swapped.terms) std::swap(t.exponents[1], t.exponents[2]);
  CHECK(std::abs(evaluate_basis(d, swapped).energy - a.energy) < 1e-10);

  // basis round trip through JSON
  const auto back = CorrelatedGaussianBasis::from_json(a.basis.json());
  CHECK(evaluate_basis(d, back).energy == evaluate_basis(d, a.basis).energy);
  CHECK_THAT(evaluate_basis(d, back).energy, WithinAbs(a.energy, 1e-12));
  CHECK_THAT(a.json(), ContainsSubstring("\"virial_ratio\""));
}

TEST_CASE("virial ratio approaches -2 as the basis grows", "[nonadiabatic][h2]") {
  const auto d = build_internal_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 1)).descriptor;
  VariationalConfig cfg;
  cfg.terms = 120;
  cfg.refine_sweeps = 0;
  const auto r = solve_variational(d, cfg);
  CHECK_THAT(virial_ratio(r), WithinAbs(-2.0, 5e-3));
  CHECK(std::abs(r.virial_history[49] + 2.0) > std::abs(r.virial_history.back() + 2.0));
}

TEST_CASE("clamped heavy pair is rejected unless probing", "[nonadiabatic]") {
  const auto d = build_internal_hamiltonian(build_system({{kInfiniteMass, 1}, {kInfiniteMass, 1}}, 1)).descriptor;
  VariationalConfig cfg;
  cfg.terms = 10;
  CHECK_THROWS_AS(solve_variational(d, cfg), NonSelfAdjointRisk);
  CHECK_THROWS_WITH(solve_variational(d, cfg), ContainsSubstring("NON_SELF_ADJOINT_RISK"));
  cfg.probe_mode = true;
  const auto r = solve_variational(d, cfg);
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK_THAT(r.diagnostics[0], ContainsSubstring("probe mode"));
}

TEST_CASE("mass scans", "[nonadiabatic][scan]") {
  VariationalConfig cfg;
  cfg.terms = 16;
  const auto atomic =
      mass_scan(build_system({{mp, 1}}, 1), {1, 4, 16, 64, kInfiniteMass}, ScanMode::Atomic, cfg);
  REQUIRE(atomic.points.size() == 5);
  CHECK(atomic.max_limit_deviation <= 1e-5);
  CHECK_THAT(atomic.points.back().E0, WithinAbs(-0.5, 1e-5));
  for (const auto &p : atomic.points) CHECK(p.status == "OK");

  cfg.terms = 40;
  cfg.refine_sweeps = 0;
  const auto mol = mass_scan(build_system({{mp, 1}, {mp, 1}}, 1), {1, 2, 4, kInfiniteMass}, ScanMode::Molecular, cfg);
  REQUIRE(mol.points.size() == 4);
  CHECK(mol.points.back().status == "NON_SELF_ADJOINT_RISK");
  CHECK(std::isnan(mol.points.back().E0));
  for (int i = 0; i < 3; ++i) {
    CHECK(mol.points[i].status == "OK");
    CHECK(mol.points[i].spacing > 0.0);
  }
  CHECK(mol.points[1].spacing < mol.points[0].spacing);
  CHECK(mol.csv().rfind("lambda,E0,E1,spacing,status\n", 0) == 0);
  CHECK_THAT(mol.csv(), ContainsSubstring("inf,nan,nan,nan,NON_SELF_ADJOINT_RISK"));

  CHECK_THROWS_AS(mass_scan(build_system({{mp, 1}}, 1), {1, 2}, ScanMode::Atomic, cfg), InvalidInput);
  CHECK_THROWS_AS(mass_scan(build_system({{mp, 1}}, 1), {4, 2, 1}, ScanMode::Atomic, cfg), InvalidInput);
  CHECK_THROWS_AS(mass_scan(build_system({{mp, 1}}, 1), {1, 2, 4}, ScanMode::Molecular, cfg), InvalidInput);
}
