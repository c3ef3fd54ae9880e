#include "molab/gaussian.hpp"

#include "molab/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

namespace molab {

namespace {

constexpr int kMaxL = 8;

// Hermite expansion coefficients E^{ij}_t for one Cartesian direction.
struct HermiteTable {
  int imax = 0, jmax = 0;
  std::array<double, (kMaxL + 1) * (kMaxL + 1) * (2 * kMaxL + 2)> data{};
  double &at(int i, int j, int t) { return data[(i * (kMaxL + 1) + j) * (2 * kMaxL + 2) + t]; }
  double get(int i, int j, int t) const {
    if (t < 0 || t > i + j || i < 0 || j < 0) return 0.0;
    return data[(i * (kMaxL + 1) + j) * (2 * kMaxL + 2) + t];
  }
};

void build_hermite(HermiteTable &E, int imax, int jmax, double Qx, double a, double b) {
  const double p = a + b;
  const double mu = a * b / p;
  const double XPA = -b / p * Qx, XPB = a / p * Qx;
  E.imax = imax;
  E.jmax = jmax;
  E.data.fill(0.0);
  E.at(0, 0, 0) = std::exp(-mu * Qx * Qx);
  for (int i = 0; i <= imax; ++i) {
    for (int j = 0; j <= jmax; ++j) {
      if (i == 0 && j == 0) continue;
      for (int t = 0; t <= i + j; ++t) {
        double v;
        if (j == 0) {
          v = (t > 0 ? E.get(i - 1, j, t - 1) / (2.0 * p) : 0.0) + XPA * E.get(i - 1, j, t) + (t + 1) * E.get(i - 1, j, t + 1);
        } else {
          v = (t > 0 ? E.get(i, j - 1, t - 1) / (2.0 * p) : 0.0) + XPB * E.get(i, j - 1, t) + (t + 1) * E.get(i, j - 1, t + 1);
        }
        E.at(i, j, t) = v;
      }
    }
  }
}

int max_power(const GaussianFunction &f, int dim) {
  int m = 0;
  for (const auto &t : f.terms) m = std::max(m, t.powers[dim]);
  return m;
}

int max_degree(const GaussianFunction &f) {
  int m = 0;
  for (const auto &t : f.terms) m = std::max(m, t.powers[0] + t.powers[1] + t.powers[2]);
  return m;
}

// 1D overlap of x^i and x^j factors: E^{ij}_0 sqrt(pi/p).
double s1d(const HermiteTable &E, int i, int j, double p) {
  if (j < 0) return 0.0;
  return E.get(i, j, 0) * std::sqrt(std::numbers::pi / p);
}

double raw_overlap(const GaussianFunction &a, const GaussianFunction &b) {
  const double p = a.exponent + b.exponent;
  std::array<HermiteTable, 3> E;
  for (int d = 0; d < 3; ++d)
    build_hermite(E[d], max_power(a, d), max_power(b, d), a.center(d) - b.center(d), a.exponent, b.exponent);
  double s = 0.0;
  for (const auto &ta : a.terms)
    for (const auto &tb : b.terms) {
      double v = ta.coefficient * tb.coefficient;
      for (int d = 0; d < 3; ++d) v *= s1d(E[d], ta.powers[d], tb.powers[d], p);
      s += v;
    }
  return s;
}

} // namespace

GaussianFunction make_sigma_function(const Eigen::Vector3d &center, double exponent, ShellKind kind,
                                     const Eigen::Vector3d &axis) {
  if (!(exponent > 0.0)) throw InvalidInput("Gaussian exponent must be positive");
  GaussianFunction f;
  f.center = center;
  f.exponent = exponent;
  const Eigen::Vector3d u = axis.normalized();
  auto add = [&](std::array<int, 3> p, double c) {
    if (std::abs(c) < 1e-15) return;
    for (auto &t : f.terms)
      if (t.powers == p) {
        t.coefficient += c;
        return;
      }
    f.terms.push_back({p, c});
  };
  switch (kind) {
  case ShellKind::S: add({0, 0, 0}, 1.0); break;
  case ShellKind::P:
    for (int d = 0; d < 3; ++d) {
      std::array<int, 3> p{0, 0, 0};
      p[d] = 1;
      add(p, u(d));
    }
    break;
  case ShellKind::D:
    for (int d = 0; d < 3; ++d)
      for (int e = 0; e < 3; ++e) {
        std::array<int, 3> p{0, 0, 0};
        p[d] += 1;
        p[e] += 1;
        add(p, u(d) * u(e));
      }
    break;
  }
  const double norm = raw_overlap(f, f);
  for (auto &t : f.terms) t.coefficient /= std::sqrt(norm);
  return f;
}

GaussianFunction inverted_through(const GaussianFunction &f, const Eigen::Vector3d &point) {
  GaussianFunction g = f;
  g.center = 2.0 * point - f.center;
  for (auto &t : g.terms)
    if ((t.powers[0] + t.powers[1] + t.powers[2]) % 2 == 1) t.coefficient = -t.coefficient;
  return g;
}

void boys_function(int m_max, double T, std::span<double> out) {
  if (T < 1e-12) {
    for (int m = 0; m <= m_max; ++m) out[m] = 1.0 / (2.0 * m + 1.0) - T / (2.0 * m + 3.0);
    return;
  }
  const double a = m_max + 0.5;
  out[m_max] = boost::math::tgamma_lower(a, T) / (2.0 * std::pow(T, a));
  const double e = std::exp(-T);
  for (int m = m_max - 1; m >= 0; --m) out[m] = (2.0 * T * out[m + 1] + e) / (2.0 * m + 1.0);
}

double overlap_integral(const GaussianFunction &a, const GaussianFunction &b) { return raw_overlap(a, b); }

double kinetic_integral(const GaussianFunction &a, const GaussianFunction &b) {
  const double p = a.exponent + b.exponent;
  const double be = b.exponent;
  std::array<HermiteTable, 3> E;
  for (int d = 0; d < 3; ++d)
    build_hermite(E[d], max_power(a, d), max_power(b, d) + 2, a.center(d) - b.center(d), a.exponent, b.exponent);
  double t = 0.0;
  for (const auto &ta : a.terms)
    for (const auto &tb : b.terms) {
      std::array<double, 3> s{}, k{};
      for (int d = 0; d < 3; ++d) {
        const int i = ta.powers[d], j = tb.powers[d];
        s[d] = s1d(E[d], i, j, p);
        k[d] = -2.0 * be * be * s1d(E[d], i, j + 2, p) + be * (2 * j + 1) * s[d] -
               0.5 * j * (j - 1) * (j >= 2 ? s1d(E[d], i, j - 2, p) : 0.0);
      }
      t += ta.coefficient * tb.coefficient * (k[0] * s[1] * s[2] + s[0] * k[1] * s[2] + s[0] * s[1] * k[2]);
    }
  return t;
}

double coulomb_integral(const GaussianFunction &a, const GaussianFunction &b, const Eigen::Vector3d &C) {
  const double p = a.exponent + b.exponent;
  const Eigen::Vector3d P = (a.exponent * a.center + b.exponent * b.center) / p;
  const Eigen::Vector3d PC = P - C;
  const int L = max_degree(a) + max_degree(b);
  std::array<HermiteTable, 3> E;
  for (int d = 0; d < 3; ++d)
    build_hermite(E[d], max_power(a, d), max_power(b, d), a.center(d) - b.center(d), a.exponent, b.exponent);

  // R^n_{tuv}, n + t + u + v <= L
  const int D = L + 1;
  std::vector<double> R(static_cast<std::size_t>(D * D * D * D), 0.0);
  auto idx = [D](int n, int t, int u, int v) { return ((n * D + t) * D + u) * D + v; };
  std::array<double, 2 * kMaxL + 2> F{};
  boys_function(L, p * PC.squaredNorm(), F);
  for (int n = 0; n <= L; ++n) R[idx(n, 0, 0, 0)] = std::pow(-2.0 * p, n) * F[n];
  for (int n = L - 1; n >= 0; --n) {
    const int top = L - n;
    for (int t = 0; t <= top; ++t)
      for (int u = 0; u + t <= top; ++u)
        for (int v = 0; v + u + t <= top; ++v) {
          if (t + u + v == 0) continue;
          double val;
          if (t > 0) {
            val = PC(0) * R[idx(n + 1, t - 1, u, v)] + (t > 1 ? (t - 1) * R[idx(n + 1, t - 2, u, v)] : 0.0);
          } else if (u > 0) {
            val = PC(1) * R[idx(n + 1, t, u - 1, v)] + (u > 1 ? (u - 1) * R[idx(n + 1, t, u - 2, v)] : 0.0);
          } else {
            val = PC(2) * R[idx(n + 1, t, u, v - 1)] + (v > 1 ? (v - 1) * R[idx(n + 1, t, u, v - 2)] : 0.0);
          }
          R[idx(n, t, u, v)] = val;
        }
  }
  double sum = 0.0;
  for (const auto &ta : a.terms)
    for (const auto &tb : b.terms) {
      const auto &pa = ta.powers;
      const auto &pb = tb.powers;
      double v = 0.0;
      for (int t = 0; t <= pa[0] + pb[0]; ++t) {
        const double ex = E[0].get(pa[0], pb[0], t);
        if (ex == 0.0) continue;
        for (int u = 0; u <= pa[1] + pb[1]; ++u) {
          const double ey = E[1].get(pa[1], pb[1], u);
          if (ey == 0.0) continue;
          for (int w = 0; w <= pa[2] + pb[2]; ++w) v += ex * ey * E[2].get(pa[2], pb[2], w) * R[idx(0, t, u, w)];
        }
      }
      sum += ta.coefficient * tb.coefficient * v;
    }
  return 2.0 * std::numbers::pi / p * sum;
}

Eigen::MatrixXd overlap_matrix(std::span<const GaussianFunction> bra, std::span<const GaussianFunction> ket) {
  Eigen::MatrixXd S(bra.size(), ket.size());
  for (std::size_t i = 0; i < bra.size(); ++i)
    for (std::size_t j = 0; j < ket.size(); ++j) S(i, j) = overlap_integral(bra[i], ket[j]);
  return S;
}

} // namespace molab
