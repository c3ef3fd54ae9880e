#include "molab/numerics.hpp"

#include "molab/error.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace molab {

// ---------------------------------------------------------------------------
// CubicSpline

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n != y_.size() || n < 2) throw InvalidInput("spline needs at least two matching points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw InvalidInput("spline knots must be strictly ascending");
  m_.assign(n, 0.0);
  if (n == 2) return;
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];
  if (n == 3) {
    // single parabola
    const double d0 = (y_[1] - y_[0]) / h[0], d1 = (y_[2] - y_[1]) / h[1];
    const double c = 2.0 * (d1 - d0) / (h[0] + h[1]);
    std::fill(m_.begin(), m_.end(), c);
    return;
  }
  // Unknowns M_1..M_{n-2}; not-a-knot eliminates M_0 and M_{n-1}.
  const std::size_t m = n - 2;
  std::vector<double> lo(m, 0.0), di(m, 0.0), up(m, 0.0), rhs(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 1;
    lo[k] = h[i - 1];
    di[k] = 2.0 * (h[i - 1] + h[i]);
    up[k] = h[i];
    rhs[k] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
  }
  {
    const double a = h[0], b = h[1];
    di[0] += a * (a + b) / b;
    up[0] -= a * a / b;
  }
  {
    const double a = h[n - 3], b = h[n - 2];
    di[m - 1] += b * (a + b) / a;
    lo[m - 1] -= b * b / a;
  }
  // Thomas
  for (std::size_t k = 1; k < m; ++k) {
    const double w = lo[k] / di[k - 1];
    di[k] -= w * up[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  std::vector<double> sol(m);
  sol[m - 1] = rhs[m - 1] / di[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) sol[k] = (rhs[k] - up[k] * sol[k + 1]) / di[k];
  for (std::size_t k = 0; k < m; ++k) m_[k + 1] = sol[k];
  m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
  const double a = h[n - 3], b = h[n - 2];
  m_[n - 1] = ((a + b) * m_[n - 2] - b * m_[n - 3]) / a;
}

std::size_t CubicSpline::interval(double x) const {
  if (x <= x_.front()) return 0;
  if (x >= x_.back()) return x_.size() - 2;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double CubicSpline::operator()(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

double CubicSpline::second_derivative(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
  return a * m_[i] + b * m_[i + 1];
}

// ---------------------------------------------------------------------------
// Quadrature

const GaussLegendreRule &gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {

double panel(const std::function<double(double)> &f, double a, double b, const GaussLegendreRule &rule) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
  return s * h;
}

} // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)> &f, double a, double b, double rel_tol,
                                    double abs_tol, int max_depth) {
  const auto &rule = gauss_legendre(20);
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  struct Panel {
    double a, b, coarse;
    int depth;
  };
  // First pass gives the scale of the integral for the relative tolerance.
  std::vector<Panel> stack;
  const int initial = 8;
  double scale = 0.0;
  for (int k = 0; k < initial; ++k) {
    const double pa = a + (b - a) * k / initial, pb = a + (b - a) * (k + 1) / initial;
    const double v = panel(f, pa, pb, rule);
    scale += std::abs(v);
    stack.push_back({pa, pb, v, 0});
  }
  out.converged = true;
  while (!stack.empty()) {
    const Panel p = stack.back();
    stack.pop_back();
    const double m = 0.5 * (p.a + p.b);
    const double left = panel(f, p.a, m, rule), right = panel(f, m, p.b, rule);
    const double fine = left + right;
    const double err = std::abs(fine - p.coarse);
    const double tol = std::max(rel_tol * scale, abs_tol) * (p.b - p.a) / (b - a);
    if (err <= tol || p.depth >= max_depth) {
      if (err > tol) out.converged = false;
      out.value += fine;
      out.error += err;
      ++out.panels;
    } else {
      stack.push_back({m, p.b, right, p.depth + 1});
      stack.push_back({p.a, m, left, p.depth + 1});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Band eigensolver: eigenvalues by LAPACK dsbevx, eigenvectors by inverse
// iteration with a banded LU so no dense n x n workspace is needed.

BandedEigen lowest_band_eigenpairs(const Eigen::MatrixXd &band, int count, bool vectors) {
  const lapack_int kd = static_cast<lapack_int>(band.rows() - 1);
  const lapack_int n = static_cast<lapack_int>(band.cols());
  if (count < 1 || count > n) throw InvalidInput("invalid eigenpair count");
  Eigen::MatrixXd ab = band;
  Eigen::VectorXd w(n);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  double dummy = 0.0;
  const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, kd, ab.data(), kd + 1, &dummy, 1, 0.0, 0.0,
                                         1, count, 2.0 * LAPACKE_dlamch('S'), &found, w.data(), &dummy, 1, ifail.data());
  if (info != 0 || found != count) throw SolverError("banded eigensolver failed (info " + std::to_string(info) + ")");
  BandedEigen out;
  out.values = w.head(count);
  if (!vectors) return out;

  // General band storage for dgbsv: ldab = 2 kl + ku + 1, kl = ku = kd.
  const lapack_int ldab = 3 * kd + 1;
  out.vectors.resize(n, count);
  const double scale = std::max(1.0, band.cwiseAbs().maxCoeff());
  for (int k = 0; k < count; ++k) {
    const double shift = out.values(k) + 1e-11 * scale;
    Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(ldab, n);
    for (lapack_int j = 0; j < n; ++j) {
      for (lapack_int i = std::max<lapack_int>(0, j - kd); i <= j; ++i) {
        const double a = band(kd + i - j, j) - (i == j ? shift : 0.0);
        gb(2 * kd + i - j, j) = a; // A(i, j), upper part
        gb(2 * kd + j - i, i) = a; // A(j, i), lower part
      }
    }
    std::vector<lapack_int> ipiv(n);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    for (lapack_int i = 0; i < n; ++i) x(i) += 0.1 * std::sin(0.37 * i + k);
    lapack_int lu_info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, gb.data(), ldab, ipiv.data());
    if (lu_info < 0) throw SolverError("band LU failed");
    for (int iter = 0; iter < 3; ++iter) {
      LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, gb.data(), ldab, ipiv.data(), x.data(), n);
      for (int p = 0; p < k; ++p)
        if (std::abs(out.values(p) - out.values(k)) < 1e-8 * scale) x -= out.vectors.col(p).dot(x) * out.vectors.col(p);
      x.normalize();
    }
    out.vectors.col(k) = x;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference weights (Fornberg)

namespace {

std::vector<double> fornberg(int half_width, int derivative) {
  const int n = 2 * half_width + 1;
  const int m = derivative;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = i - half_width;
  // c[j][k]: weight of node j for the k-th derivative at z = 0.
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0, c4 = x[0];
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) w[j] = c[j][m];
  return w;
}

} // namespace

std::vector<double> central_first_derivative_weights(int half_width) { return fornberg(half_width, 1); }
std::vector<double> central_second_derivative_weights(int half_width) { return fornberg(half_width, 2); }

double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("log-log fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw InvalidInput("log-log fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Minimum brent_minimize(const std::function<double(double)> &f, double a, double b, double tol) {
  const double golden = 0.3819660112501051;
  double x = a + golden * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-14, tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x >= xm) ? a - x : b - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x;
      else b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x) a = u;
      else b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx};
}

double bisect_root(const std::function<double(double)> &f, double a, double b, double tol, int max_iter) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw SolverError("root not bracketed");
  for (int i = 0; i < max_iter && std::abs(b - a) > tol; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  return 0.5 * (a + b);
}

} // namespace molab
