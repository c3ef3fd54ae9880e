#include "molab/error.hpp"
#include "molab/system_model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace molab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double mp = 1836.15267;
}

TEST_CASE("build_system validates and defaults M0 to the mean", "[system]") {
  auto h2 = build_system({{mp, 1}, {mp, 1}}, 1);
  CHECK(h2.nuclear_count() == 2);
  CHECK(h2.electron_count() == 1);
  CHECK(h2.reference_mass() == mp);
  auto hd = build_system({{1836.15267, 1}, {3670.48, 1}}, 1);
  CHECK_THAT(hd.reference_mass(), WithinRel((1836.15267 + 3670.48) / 2.0, 1e-15));
  CHECK_THROWS_WITH(build_system({{-1, 1}}, 1), Catch::Matchers::ContainsSubstring("non-positive mass"));
  CHECK_THROWS_WITH(build_system({{mp, -1}}, 1), Catch::Matchers::ContainsSubstring("negative nuclear charge"));
  CHECK_THROWS_AS(build_system({}, 1), InvalidInput);
}

TEST_CASE("kappa = M0^(-1/4)", "[system]") {
  CHECK(kappa(build_system({{1, 1}}, 0)).value == 1.0);
  CHECK_THAT(kappa(build_system({{16, 1}}, 0)).value, WithinAbs(0.5, 1e-15));
  const double k = kappa(build_system({{mp, 1}}, 1)).value;
  CHECK_THAT(k, WithinRel(std::exp(-0.25 * std::log(mp)), 1e-14));
  CHECK_THAT(k, WithinAbs(0.15276, 5e-6));
  auto inf = kappa(build_system({{kInfiniteMass, 1}}, 1));
  CHECK(inf.value == 0.0);
  CHECK(inf.infinite_reference);
  double prev = 2.0;
  for (double M : {1.0, 2.0, 10.0, 1e3, 1e6}) {
    const double v = kappa(build_system({{M, 1}}, 0)).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("lab Hamiltonians carry the Coulomb pair census", "[system]") {
  auto h = lab_hamiltonian(build_system({{mp, 1}}, 1));
  CHECK_THAT(h.kinetic(0, 0), WithinRel(1.0 / mp, 1e-15));
  CHECK(h.kinetic(1, 1) == 1.0);
  REQUIRE(h.coulomb.size() == 1);
  CHECK(h.coulomb[0].prefactor == -1.0);

  auto h2 = lab_hamiltonian(build_system({{mp, 1}, {mp, 1}}, 1));
  REQUIRE(h2.coulomb.size() == 3);
  std::vector<double> q;
  for (auto &t : h2.coulomb) q.push_back(t.prefactor);
  std::sort(q.begin(), q.end());
  CHECK(q == std::vector<double>{-1, -1, 1});

  auto he = lab_hamiltonian(build_system({{7294.3, 2}}, 2));
  q.clear();
  for (auto &t : he.coulomb) q.push_back(t.prefactor);
  std::sort(q.begin(), q.end());
  CHECK(q == std::vector<double>{-2, -2, 1});

  CHECK_THROWS_AS(lab_hamiltonian(build_system({{kInfiniteMass, 1}}, 1)), InvalidInput);
}

TEST_CASE("centre-of-mass separation is an exact congruence", "[system]") {
  for (auto sys : {build_system({{mp, 1}, {mp, 1}}, 1), build_system({{mp, 1}, {3670.48, 1}}, 2),
                   build_system({{mp, 1}, {mp, 1}, {3670.48, 1}}, 2)}) {
    auto lab = lab_hamiltonian(sys);
    for (auto choice : {NuclearCoordinates::DifferencesToFirst, NuclearCoordinates::Jacobi}) {
      if (sys.nuclear_count() < 3 && choice == NuclearCoordinates::Jacobi) continue;
      auto sep = separate_center_of_mass(lab, sys, choice);
      CHECK(congruence_residual(lab, sep, sys) < 1e-12);
      // translation invariance of every internal row
      CHECK((sep.map.transform * Eigen::VectorXd::Ones(sep.map.transform.cols())).norm() < 1e-12);
    }
  }
}

TEST_CASE("H2+ internal kinetic blocks", "[system]") {
  auto sys = build_system({{mp, 1}, {mp, 1}}, 1);
  auto sep = separate_center_of_mass(lab_hamiltonian(sys), sys);
  const auto &K = sep.internal.kinetic;
  REQUIRE(K.rows() == 2);
  // brute-force V diag(1/m) V^T with V = [x2 - x1; x_e - (x1 + x2)/2]
  Eigen::Matrix3d V;
  V << -1, 1, 0, -0.5, -0.5, 1, 0.5, 0.5, 0;
  Eigen::Vector3d minv(1 / mp, 1 / mp, 1.0);
  Eigen::Matrix3d full = V * minv.asDiagonal() * V.transpose();
  CHECK_THAT(K(0, 0), WithinRel(full(0, 0), 1e-14));
  CHECK_THAT(K(0, 0), WithinRel(2.0 / mp, 1e-14));
  CHECK_THAT(K(1, 1), WithinRel(1.0 + 1.0 / (2.0 * mp), 1e-14));
  CHECK_THAT(K(0, 1), WithinAbs(0.0, 1e-18));
}

TEST_CASE("degenerate and limiting internal frames", "[system]") {
  auto one = build_system({{mp, 1}}, 0);
  auto sep = separate_center_of_mass(lab_hamiltonian(one), one);
  CHECK(sep.internal.coordinate_count == 0);
  CHECK_THAT(sep.center_of_mass.kinetic(0, 0), WithinRel(1.0 / mp, 1e-15));

  auto clamped = internal_hamiltonian(build_system({{kInfiniteMass, 1}, {kInfiniteMass, 1}}, 1));
  CHECK(clamped.internal.kinetic(0, 0) == 0.0);
  CHECK(clamped.internal.kinetic(1, 1) == 1.0);
  CHECK(clamped.internal.flags.non_self_adjoint_risk);
}

TEST_CASE("inverse mass matrices", "[system]") {
  const double m = 1836.15267;
  auto mm = inverse_mass_matrix(build_system({{m, 1}, {m, 1}}, 1), NuclearCoordinates::DifferencesToFirst);
  CHECK_THAT(mm(0, 0), WithinRel(2.0 / m, 1e-15));
  auto inf = inverse_mass_matrix(build_system({{m, 1}, {kInfiniteMass, 1}}, 1), NuclearCoordinates::DifferencesToFirst);
  CHECK_THAT(inf(0, 0), WithinRel(1.0 / m, 1e-15));
  CHECK_THROWS_AS(inverse_mass_matrix(build_system({{m, 1}}, 1), NuclearCoordinates::Jacobi), InvalidInput);

  // Jacobi chain rule: t1 = x2 - x1, t2 = x3 - (m1 x1 + m2 x2)/(m1 + m2)
  const double m1 = 1836.15, m2 = 1836.15, m3 = 3670.48;
  auto J = inverse_mass_matrix(build_system({{m1, 1}, {m2, 1}, {m3, 1}}, 1), NuclearCoordinates::Jacobi);
  REQUIRE(J.rows() == 2);
  CHECK_THAT(J(0, 0), WithinRel(1 / m1 + 1 / m2, 1e-14));
  CHECK_THAT(J(1, 1), WithinRel(1 / (m1 + m2) + 1 / m3, 1e-14));
  CHECK_THAT(J(0, 1), WithinAbs(0.0, 1e-18));
  CHECK((J - J.transpose()).norm() == 0.0);
}

TEST_CASE("swapping identical nuclei permutes the descriptor", "[system]") {
  auto sys = build_system({{mp, 1}, {mp, 1}}, 1);
  auto a = internal_hamiltonian(sys).internal;
  auto b = internal_hamiltonian(sys.with_swapped_nuclei(0, 1)).internal;
  CHECK((a.kinetic - b.kinetic).norm() < 1e-15);
  std::vector<double> qa, qb;
  for (auto &t : a.coulomb) qa.push_back(t.prefactor);
  for (auto &t : b.coulomb) qb.push_back(t.prefactor);
  CHECK(qa == qb);
}
