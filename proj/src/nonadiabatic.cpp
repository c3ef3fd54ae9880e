#include "molab/nonadiabatic.hpp"

#include "molab/error.hpp"
#include "molab/io.hpp"
#include "molab/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace molab {

ThreeBodyHamiltonian build_internal_hamiltonian(const MolecularSystem &system) {
  if (system.nuclear_count() != 2 || system.electron_count() != 1)
    throw InvalidInput("three-body Hamiltonian needs two nuclei and one electron, got " +
                       std::to_string(system.nuclear_count()) + " nuclei and " +
                       std::to_string(system.electron_count()) + " electrons");
  ThreeBodyHamiltonian out;
  SeparatedHamiltonian sep = internal_hamiltonian(system);
  out.descriptor = std::move(sep.internal);
  out.alpha1 = -sep.map.nuclear_positions(0, 0);
  out.alpha2 = -sep.map.nuclear_positions(1, 0);
  out.homonuclear = system.homonuclear();
  return out;
}

namespace {

constexpr double kLogPi = 1.1447298858494002; // log(pi)

// Everything the integrals need, fixed once per descriptor. One-coordinate
// problems get a decoupled dummy second coordinate (exponent 1/2 per term,
// no kinetic energy, no Coulomb weight) so a single 2x2 kernel serves both.
struct Model {
  int n = 2;
  int p = 0; // coordinate carrying the |t|^(2m) prefactor
  int o = 1;
  bool prefactor = false;
  Eigen::Matrix2d K = Eigen::Matrix2d::Zero();
  std::vector<Eigen::Vector2d> rows;
  std::vector<double> charges;
  std::vector<bool> heavy;
  std::vector<std::string> labels;
  bool symmetric = false;
  Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
  double shift = 0.0;
  std::vector<double> log_factorial;
  std::vector<double> lgamma_half; // lgamma(j + 3/2)
};

Model make_model(const OperatorDescriptor &d, int max_power) {
  d.validate();
  if (d.coordinate_count < 1 || d.coordinate_count > 2)
    throw InvalidInput("correlated Gaussian solver handles one or two internal coordinates, got " +
                       std::to_string(d.coordinate_count));
  Model m;
  m.n = d.coordinate_count;
  m.shift = d.constant_shift;
  if (m.n == 2) {
    int nuclear = -1;
    for (int i = 0; i < 2; ++i)
      if (i < static_cast<int>(d.coordinate_labels.size()) && d.coordinate_labels[i].rfind("t_n", 0) == 0)
        nuclear = i;
    m.prefactor = nuclear >= 0;
    m.p = nuclear >= 0 ? nuclear : 0;
    m.o = 1 - m.p;
    m.K = d.kinetic;
  } else {
    m.p = 0;
    m.o = 1;
    m.K(0, 0) = d.kinetic(0, 0);
  }
  for (const CoulombTerm &t : d.coulomb) {
    if (t.difference_offset().norm() > 0.0)
      throw InvalidInput("correlated Gaussian solver needs a fully internal descriptor (term " + t.label +
                         " has a clamped offset)");
    Eigen::Vector2d w = Eigen::Vector2d::Zero();
    const Eigen::VectorXd row = t.difference_row();
    for (int i = 0; i < m.n; ++i) w(i) = row(i);
    m.rows.push_back(w);
    m.charges.push_back(t.prefactor);
    m.heavy.push_back(m.prefactor && w(m.o) == 0.0);
    m.labels.push_back(t.label);
  }
  // nuclear exchange: t -> -t must permute the Coulomb terms with equal charges
  if (m.prefactor) {
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    P(m.p, m.p) = -1.0;
    bool ok = true;
    for (std::size_t k = 0; k < m.rows.size() && ok; ++k) {
      const Eigen::Vector2d image = P * m.rows[k];
      bool found = false;
      for (std::size_t l = 0; l < m.rows.size(); ++l)
        if (m.charges[l] == m.charges[k] &&
            ((image - m.rows[l]).norm() < 1e-14 || (image + m.rows[l]).norm() < 1e-14))
          found = true;
      ok = found;
    }
    m.symmetric = ok;
    m.P = P;
  }
  const int top = 4 * max_power + 8;
  m.log_factorial.resize(top);
  m.lgamma_half.resize(top);
  for (int j = 0; j < top; ++j) {
    m.log_factorial[j] = std::lgamma(j + 1.0);
    m.lgamma_half[j] = std::lgamma(j + 1.5);
  }
  return m;
}

struct Primitive {
  Eigen::Matrix2d A;
  Eigen::Matrix2d PA; // exchanged image
  int power = 0;
};

Primitive make_primitive(const Model &m, const EcgTerm &term) {
  Primitive f;
  f.A = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < m.rows.size(); ++k) f.A += term.exponents[k] * m.rows[k] * m.rows[k].transpose();
  if (m.n == 1) f.A(1, 1) = 0.5;
  f.PA = m.P * f.A * m.P;
  f.power = term.power;
  return f;
}

// sum_j Binomial(j; M, x) Gamma(j + 1) / Gamma(j + 3/2), summed outward from the mode
double coulomb_series(const Model &m, int M, double x) {
  if (M == 0 || x <= 0.0) return std::exp(-m.lgamma_half[0]);
  if (x >= 1.0) return std::exp(m.log_factorial[M] - m.lgamma_half[M]);
  int j0 = static_cast<int>(std::floor((M + 1) * x));
  j0 = std::clamp(j0, 0, M);
  const double log_t0 = m.log_factorial[M] - m.log_factorial[j0] - m.log_factorial[M - j0] + j0 * std::log(x) +
                        (M - j0) * std::log1p(-x) + m.log_factorial[j0] - m.lgamma_half[j0];
  const double odds = x / (1.0 - x);
  double sum = 1.0;
  double t = 1.0;
  for (int j = j0; j < M; ++j) {
    t *= (M - j) * odds / (j + 1.5);
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  t = 1.0;
  for (int j = j0; j > 0; --j) {
    t *= (j + 0.5) / ((M - j + 1) * odds);
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  return std::exp(log_t0) * sum;
}

struct PairValue {
  double log_s = 0.0;
  double t = 0.0; // <T>/S
  double v = 0.0; // <V>/S
};

// |t|^(2 m1) exp(-x^T A1 x) against |t|^(2 m2) exp(-x^T A2 x)
PairValue pair_value(const Model &m, const Eigen::Matrix2d &A1, int m1, const Eigen::Matrix2d &A2, int m2) {
  const int p = m.p, o = m.o;
  const Eigen::Matrix2d A = A1 + A2;
  const int M = m1 + m2;
  const double det = A.determinant();
  const double Aoo = A(o, o);
  const double beta = A(o, p) / Aoo;
  const double gamma = det / Aoo;

  PairValue out;
  out.log_s = 1.5 * (2.0 * kLogPi - std::log(det)) + m.lgamma_half[M] - m.lgamma_half[0] - M * std::log(gamma);

  Eigen::Matrix2d G2;
  G2(p, p) = (M + 1.5) / gamma;
  G2(o, p) = G2(p, o) = -beta * G2(p, p);
  G2(o, o) = beta * beta * G2(p, p) + 1.5 / Aoo;
  Eigen::Vector2d h;
  h(o) = -beta;
  h(p) = 1.0;
  double t = 2.0 * (A1 * m.K * A2 * G2).trace();
  if (m2 > 0) t -= 2.0 * m2 * (m.K * A1).row(p).dot(h);
  if (m1 > 0) t -= 2.0 * m1 * (m.K * A2).row(p).dot(h);
  if (m1 > 0 && m2 > 0) t += 2.0 * m1 * m2 * m.K(p, p) * gamma / (M + 0.5);
  out.t = t;

  const Eigen::Matrix2d Sigma = 0.5 * A.inverse();
  double v = 0.0;
  for (std::size_t k = 0; k < m.rows.size(); ++k) {
    const Eigen::Vector2d &w = m.rows[k];
    const double s2 = w.dot(Sigma * w);
    const double c = w.dot(Sigma.col(p));
    const double rho2 = M == 0 ? 0.0 : c * c / (s2 * Sigma(p, p));
    v += m.charges[k] * coulomb_series(m, M, rho2) / std::sqrt(2.0 * s2);
  }
  out.v = v;
  return out;
}

// Normalised (and symmetrised) matrix elements between two terms.
struct Element {
  double s = 0.0, t = 0.0, v = 0.0;
};

struct TermCache {
  Primitive f;
  double log_self = 0.0; // log S of the primitive with itself
  double norm = 1.0;     // 1 + exchange overlap (normalised primitives)
};

TermCache make_cache(const Model &m, const EcgTerm &term) {
  TermCache c;
  c.f = make_primitive(m, term);
  c.log_self = pair_value(m, c.f.A, c.f.power, c.f.A, c.f.power).log_s;
  if (m.symmetric) {
    const PairValue x = pair_value(m, c.f.A, c.f.power, c.f.PA, c.f.power);
    c.norm = 1.0 + std::exp(x.log_s - c.log_self);
  }
  return c;
}

Element element(const Model &m, const TermCache &a, const TermCache &b) {
  const PairValue d = pair_value(m, a.f.A, a.f.power, b.f.A, b.f.power);
  const double sd = std::exp(d.log_s - 0.5 * (a.log_self + b.log_self));
  Element e{sd, sd * d.t, sd * d.v};
  if (m.symmetric) {
    const PairValue x = pair_value(m, a.f.A, a.f.power, b.f.PA, b.f.power);
    const double sx = std::exp(x.log_s - 0.5 * (a.log_self + b.log_self));
    e.s += sx;
    e.t += sx * x.t;
    e.v += sx * x.v;
  }
  const double scale = 1.0 / std::sqrt(a.norm * b.norm);
  e.s *= scale;
  e.t *= scale;
  e.v *= scale;
  return e;
}

struct Spectrum {
  Eigen::VectorXd E;
  Eigen::MatrixXd C; // S-orthonormal eigenvectors
  bool ok = false;
};

Spectrum diagonalise(const Eigen::MatrixXd &S, const Eigen::MatrixXd &H) {
  Spectrum out;
  if (S.rows() == 0) {
    out.ok = true;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return out;
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd X = L.triangularView<Eigen::Lower>().solve(H);
  X = L.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
  X = 0.5 * (X + X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
  if (es.info() != Eigen::Success) return out;
  out.E = es.eigenvalues();
  out.C = L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  out.ok = true;
  return out;
}

double objective_of(const Eigen::VectorXd &E, int states) {
  double sum = 0.0;
  for (int i = 0; i < std::min<int>(states, static_cast<int>(E.size())); ++i) sum += E(i);
  return sum;
}

// Lowest roots of the bordered matrix [[diag(E), b], [b^T, e]].
double arrowhead_objective(const Eigen::VectorXd &E, const Eigen::VectorXd &b, double e, int states) {
  const int K = static_cast<int>(E.size());
  const double bn = b.norm();
  auto g = [&](double lam) { return e - lam - (b.array().square() / (E.array() - lam)).sum(); };
  double sum = 0.0;
  const int roots = std::min(states, K + 1);
  for (int j = 0; j < roots; ++j) {
    double lo = j == 0 ? std::min(K > 0 ? E(0) : e, e) - bn - 1.0 : E(j - 1);
    double hi = j < K ? E(j) : std::max(K > 0 ? E(K - 1) : e, e) + bn + 1.0;
    if (hi - lo <= 0.0) {
      sum += lo;
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (g(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    sum += 0.5 * (lo + hi);
  }
  return sum;
}

// Objective after bordering the current spectrum with one candidate term.
double bordered_objective(const Model &m, const std::vector<TermCache> &basis, const Spectrum &spec,
                          const TermCache &cand, int states, double dependency, int skip = -1) {
  const int K = static_cast<int>(spec.E.size());
  Eigen::VectorXd s(K), h(K);
  int r = 0;
  for (int i = 0; i < static_cast<int>(basis.size()); ++i) {
    if (i == skip) continue;
    const Element el = element(m, basis[i], cand);
    s(r) = el.s;
    h(r) = el.t + el.v;
    ++r;
  }
  const Element self = element(m, cand, cand);
  if (!std::isfinite(self.t + self.v) || !s.allFinite() || !h.allFinite()) return kInfiniteMass;
  const double hcc = self.t + self.v;
  if (K == 0) return hcc;
  const Eigen::VectorXd pv = spec.C.transpose() * s;
  const Eigen::VectorXd qv = spec.C.transpose() * h;
  const double d = 1.0 - pv.squaredNorm();
  if (d < dependency) return kInfiniteMass;
  const double sd = std::sqrt(d);
  const Eigen::VectorXd b = (qv.array() - spec.E.array() * pv.array()) / sd;
  const double e = (hcc - 2.0 * pv.dot(qv) + (spec.E.array() * pv.array().square()).sum()) / d;
  return arrowhead_objective(spec.E, b, e, states);
}

class Sampler {
public:
  Sampler(const Model &m, const VariationalConfig &cfg) : m_(m), cfg_(cfg), rng_(cfg.seed) {}

  EcgTerm fresh() {
    EcgTerm t;
    for (int attempt = 0;; ++attempt) {
      t.exponents.clear();
      for (std::size_t k = 0; k < m_.rows.size(); ++k)
        t.exponents.push_back(m_.heavy[k] ? log_uniform(cfg_.pair_lo, cfg_.pair_hi)
                                          : log_uniform(cfg_.electronic_lo, cfg_.electronic_hi));
      t.power = 0;
      if (!m_.prefactor) return t;
      const double peak = std::uniform_real_distribution<double>(cfg_.peak_lo, cfg_.peak_hi)(rng_);
      const long power = power_for(t, peak);
      if (power <= cfg_.max_power || attempt > 200) {
        t.power = static_cast<int>(std::min<long>(power, cfg_.max_power));
        return t;
      }
    }
  }

  EcgTerm perturb(const EcgTerm &base, double spread) {
    EcgTerm t = base;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double &a : t.exponents) a *= std::exp(spread * gauss(rng_));
    if (m_.prefactor) {
      const double peak = peak_of(base) * std::exp(0.2 * spread * gauss(rng_));
      t.power = static_cast<int>(std::clamp<long>(power_for(t, peak), 0, cfg_.max_power));
    }
    return t;
  }

private:
  double log_uniform(double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng_));
  }
  // the square of |t|^(2m) exp(-gamma t^2) has <t^2> = (2m + 3/2) / (2 gamma)
  double gamma_of(const EcgTerm &t) const {
    const Eigen::Matrix2d A = make_primitive(m_, t).A;
    return A.determinant() / A(m_.o, m_.o);
  }
  long power_for(const EcgTerm &t, double peak) const {
    return std::max(0L, std::lround(gamma_of(t) * peak * peak - 0.75));
  }
  double peak_of(const EcgTerm &t) const { return std::sqrt((t.power + 0.75) / gamma_of(t)); }

  const Model &m_;
  const VariationalConfig &cfg_;
  std::mt19937_64 rng_;
};

// Candidate objectives in parallel chunks; the caller reduces in index order.
std::vector<double> score(const Model &m, const std::vector<TermCache> &basis, const Spectrum &spec,
                          const std::vector<TermCache> &cands, int states, double dependency, int threads,
                          int skip = -1) {
  std::vector<double> out(cands.size(), kInfiniteMass);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < cands.size(); i += step)
      out[i] = bordered_objective(m, basis, spec, cands[i], states, dependency, skip);
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(cands.size())));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(n));
    for (auto &th : pool) th.join();
  }
  return out;
}

struct Matrices {
  Eigen::MatrixXd S, T, V;
};

Matrices build_matrices(const Model &m, const std::vector<TermCache> &basis) {
  const int K = static_cast<int>(basis.size());
  Matrices x{Eigen::MatrixXd(K, K), Eigen::MatrixXd(K, K), Eigen::MatrixXd(K, K)};
  for (int i = 0; i < K; ++i)
    for (int j = i; j < K; ++j) {
      const Element e = element(m, basis[i], basis[j]);
      x.S(i, j) = x.S(j, i) = e.s;
      x.T(i, j) = x.T(j, i) = e.t;
      x.V(i, j) = x.V(j, i) = e.v;
    }
  return x;
}

void set_row(const Model &m, Matrices &x, const std::vector<TermCache> &basis, int k) {
  for (int j = 0; j < static_cast<int>(basis.size()); ++j) {
    const Element e = element(m, basis[k], basis[j]);
    x.S(k, j) = x.S(j, k) = e.s;
    x.T(k, j) = x.T(j, k) = e.t;
    x.V(k, j) = x.V(j, k) = e.v;
  }
}

Eigen::MatrixXd without(const Eigen::MatrixXd &X, int k) {
  const int K = static_cast<int>(X.rows());
  Eigen::MatrixXd Y(K - 1, K - 1);
  for (int i = 0, r = 0; i < K; ++i) {
    if (i == k) continue;
    for (int j = 0, c = 0; j < K; ++j) {
      if (j == k) continue;
      Y(r, c++) = X(i, j);
    }
    ++r;
  }
  return Y;
}

void fill_result(const Model &m, const Matrices &x, int states, VariationalResult &res) {
  const Spectrum spec = diagonalise(x.S, x.T + x.V);
  if (!spec.ok) throw SolverError("overlap matrix of the correlated Gaussian basis is not positive definite");
  res.energies.clear();
  for (int i = 0; i < std::min<int>(states, static_cast<int>(spec.E.size())); ++i)
    res.energies.push_back(spec.E(i) + m.shift);
  res.energy = res.energies.front();
  res.coefficients = spec.C.col(0);
  res.kinetic = res.coefficients.dot(x.T * res.coefficients);
  res.potential = res.coefficients.dot(x.V * res.coefficients) + m.shift;
  res.virial = res.potential / res.kinetic;
  const Eigen::VectorXd sv = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x.S, Eigen::EigenvaluesOnly).eigenvalues();
  res.condition = sv(sv.size() - 1) / sv(0);
}

} // namespace

double breakup_threshold(const OperatorDescriptor &d) {
  // a lone pair can only fall apart into free particles
  if (d.coordinate_count < 2) return d.constant_shift;
  double threshold = 0.0;
  for (const CoulombTerm &t : d.coulomb) {
    if (t.prefactor >= 0.0) continue;
    const Eigen::VectorXd w = t.difference_row();
    const double inv_mu = w.dot(d.kinetic * w);
    if (inv_mu <= 0.0) return -kInfiniteMass;
    threshold = std::min(threshold, -t.prefactor * t.prefactor / (2.0 * inv_mu));
  }
  return threshold + d.constant_shift;
}

VariationalResult solve_variational(const OperatorDescriptor &descriptor, const VariationalConfig &cfg) {
  if (cfg.terms < 1 || cfg.candidates < 1 || cfg.states < 1)
    throw InvalidInput("basis size, candidate count and state count must be positive");
  if (!(cfg.electronic_lo > 0 && cfg.electronic_lo <= cfg.electronic_hi && cfg.pair_lo > 0 &&
        cfg.pair_lo <= cfg.pair_hi && cfg.peak_lo > 0 && cfg.peak_lo <= cfg.peak_hi))
    throw InvalidInput("exponent and peak ranges must be positive and ordered");
  OperatorDescriptor d = descriptor;
  d.update_flags();
  bool zero_kinetic = false;
  for (int i = 0; i < d.coordinate_count; ++i) zero_kinetic = zero_kinetic || d.kinetic(i, i) <= 0.0;
  if ((d.flags.non_self_adjoint_risk || zero_kinetic) && !cfg.probe_mode)
    throw NonSelfAdjointRisk("NON_SELF_ADJOINT_RISK: a coordinate carries no kinetic energy; the variational "
                             "problem has no lower bound to converge to (enable probe mode to explore it)");

  const Model m = make_model(d, cfg.max_power);
  Sampler sampler(m, cfg);
  VariationalResult res;
  res.basis.pair_labels = m.labels;
  res.basis.seed = cfg.seed;
  res.basis.symmetrized = m.symmetric;
  res.threshold = breakup_threshold(d);

  std::vector<TermCache> basis;
  Matrices x;
  Spectrum spec;
  spec.ok = true;

  // growth
  int stalls = 0;
  while (static_cast<int>(basis.size()) < cfg.terms) {
    std::vector<EcgTerm> terms;
    std::vector<TermCache> cands;
    for (int c = 0; c < cfg.candidates; ++c) {
      terms.push_back(sampler.fresh());
      cands.push_back(make_cache(m, terms.back()));
    }
    const std::vector<double> obj = score(m, basis, spec, cands, cfg.states, cfg.dependency_threshold, cfg.threads);
    std::size_t best = 0;
    for (std::size_t i = 1; i < obj.size(); ++i)
      if (obj[i] < obj[best]) best = i;
    if (!std::isfinite(obj[best])) {
      if (++stalls > 50) throw SolverError("basis growth stalled: every candidate is linearly dependent");
      continue;
    }
    basis.push_back(cands[best]);
    res.basis.terms.push_back(terms[best]);
    const int K = static_cast<int>(basis.size());
    x.S.conservativeResize(K, K);
    x.T.conservativeResize(K, K);
    x.V.conservativeResize(K, K);
    set_row(m, x, basis, K - 1);
    Spectrum next = diagonalise(x.S, x.T + x.V);
    if (!next.ok) {
      // numerically dependent after all: drop it and try again
      basis.pop_back();
      res.basis.terms.pop_back();
      x.S.conservativeResize(K - 1, K - 1);
      x.T.conservativeResize(K - 1, K - 1);
      x.V.conservativeResize(K - 1, K - 1);
      if (++stalls > 50) throw SolverError("basis growth stalled: overlap matrix lost positive definiteness");
      continue;
    }
    spec = std::move(next);
    res.history.push_back(objective_of(spec.E, cfg.states) + cfg.states * m.shift);
    const Eigen::VectorXd c0 = spec.C.col(0);
    res.virial_history.push_back((c0.dot(x.V * c0) + m.shift) / c0.dot(x.T * c0));
  }

  // coordinate-descent refinement: each term in turn is replaced by the best
  // of a few perturbed copies whenever that lowers the objective
  for (int sweep = 0; sweep < cfg.refine_sweeps; ++sweep) {
    const int K = static_cast<int>(basis.size());
    if (K < 2) break;
    for (int k = 0; k < K; ++k) {
      const Spectrum reduced = diagonalise(without(x.S, k), without(x.T + x.V, k));
      if (!reduced.ok) continue;
      std::vector<EcgTerm> terms{res.basis.terms[k]};
      std::vector<TermCache> cands{basis[k]};
      for (int c = 0; c < cfg.refine_candidates; ++c) {
        const double spread = (c % 2 == 0) ? cfg.refine_spread : 0.25 * cfg.refine_spread;
        terms.push_back(sampler.perturb(res.basis.terms[k], spread));
        cands.push_back(make_cache(m, terms.back()));
      }
      const std::vector<double> obj =
          score(m, basis, reduced, cands, cfg.states, cfg.dependency_threshold, cfg.threads, k);
      std::size_t best = 0;
      for (std::size_t i = 1; i < obj.size(); ++i)
        if (obj[i] < obj[best] - 1e-13 * std::abs(obj[0])) best = i;
      if (best == 0) continue;
      const TermCache old_cache = basis[k];
      const EcgTerm old_term = res.basis.terms[k];
      const Matrices backup = x;
      basis[k] = cands[best];
      res.basis.terms[k] = terms[best];
      set_row(m, x, basis, k);
      const Spectrum check = diagonalise(x.S, x.T + x.V);
      if (!check.ok || objective_of(check.E, cfg.states) > objective_of(spec.E, cfg.states)) {
        basis[k] = old_cache;
        res.basis.terms[k] = old_term;
        x = backup;
        continue;
      }
      spec = check;
    }
    res.history.push_back(objective_of(spec.E, cfg.states) + cfg.states * m.shift);
  }

  fill_result(m, x, cfg.states, res);
  res.bound = res.energy < res.threshold;
  if (cfg.probe_mode) {
    double largest = 0.0;
    for (const EcgTerm &t : res.basis.terms)
      for (std::size_t k = 0; k < t.exponents.size(); ++k)
        if (m.heavy[k]) largest = std::max(largest, t.exponents[k]);
    res.diagnostics.push_back("probe mode: largest heavy-pair exponent " + format_number(largest));
  }
  if (res.condition > 1e13)
    res.diagnostics.push_back("overlap condition number " + format_number(res.condition));
  return res;
}

VariationalResult evaluate_basis(const OperatorDescriptor &descriptor, const CorrelatedGaussianBasis &basis,
                                 int states) {
  if (basis.terms.empty()) throw InvalidInput("empty correlated Gaussian basis");
  int max_power = 0;
  for (const EcgTerm &t : basis.terms) {
    if (t.exponents.size() != descriptor.coulomb.size())
      throw InvalidInput("basis term has " + std::to_string(t.exponents.size()) + " exponents, descriptor has " +
                         std::to_string(descriptor.coulomb.size()) + " Coulomb terms");
    max_power = std::max(max_power, t.power);
  }
  const Model m = make_model(descriptor, max_power);
  std::vector<TermCache> cache;
  for (const EcgTerm &t : basis.terms) cache.push_back(make_cache(m, t));
  VariationalResult res;
  res.basis = basis;
  res.basis.pair_labels = m.labels;
  res.basis.symmetrized = m.symmetric;
  res.threshold = breakup_threshold(descriptor);
  fill_result(m, build_matrices(m, cache), states, res);
  res.bound = res.energy < res.threshold;
  return res;
}

double virial_ratio(const VariationalResult &result) {
  if (!(result.kinetic > 0.0) || !std::isfinite(result.potential))
    throw SolverError("virial ratio needs a normalisable state with positive kinetic energy");
  return result.potential / result.kinetic;
}

std::string CorrelatedGaussianBasis::json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["symmetrized"] = symmetrized;
  j["pair_labels"] = pair_labels;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const EcgTerm &t : terms) list.push_back({{"exponents", t.exponents}, {"power", t.power}});
  j["terms"] = list;
  return j.dump(2);
}

CorrelatedGaussianBasis CorrelatedGaussianBasis::from_json(const std::string &text) {
  CorrelatedGaussianBasis b;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    b.seed = j.value("seed", std::uint64_t{0});
    b.symmetrized = j.value("symmetrized", false);
    b.pair_labels = j.value("pair_labels", std::vector<std::string>{});
    for (const auto &t : j.at("terms"))
      b.terms.push_back({t.at("exponents").get<std::vector<double>>(), t.value("power", 0)});
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput(std::string("malformed basis JSON: ") + e.what());
  }
  return b;
}

std::string VariationalResult::json() const {
  nlohmann::ordered_json j;
  j["energy"] = energy;
  j["energies"] = energies;
  j["kinetic"] = kinetic;
  j["potential"] = potential;
  j["virial_ratio"] = virial;
  j["threshold"] = threshold;
  j["bound"] = bound;
  j["condition"] = condition;
  j["terms"] = basis.size();
  j["history"] = history;
  j["diagnostics"] = diagnostics;
  j["coefficients"] = std::vector<double>(coefficients.data(), coefficients.data() + coefficients.size());
  j["basis"] = nlohmann::ordered_json::parse(basis.json());
  return j.dump(2);
}

ScanReport mass_scan(const MolecularSystem &system, const std::vector<double> &lambdas, ScanMode mode,
                     const VariationalConfig &config) {
  std::vector<double> finite;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw InvalidInput("mass scale factors must be positive");
    if (std::isfinite(l)) finite.push_back(l);
  }
  if (finite.size() < 3) throw InvalidInput("mass scan needs at least three finite scale factors");
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) throw InvalidInput("mass scale factors must be ascending");
  if (mode == ScanMode::Atomic && (system.nuclear_count() != 1 || system.electron_count() != 1))
    throw InvalidInput("atomic scan needs one nucleus and one electron");
  if (mode == ScanMode::Molecular && (system.nuclear_count() != 2 || system.electron_count() != 1))
    throw InvalidInput("molecular scan needs two nuclei and one electron");

  ScanReport report;
  report.mode = mode;
  std::vector<double> xs, spacings;
  for (double l : lambdas) {
    ScanPoint pt;
    pt.lambda = l;
    MolecularSystem scaled = system;
    for (std::size_t g = 0; g < system.nuclear_count(); ++g)
      scaled = scaled.with_nuclear_mass(g, std::isfinite(l) ? l * system.nucleus(g).mass : kInfiniteMass);
    VariationalConfig cfg = config;
    try {
      if (mode == ScanMode::Atomic) {
        const double Z = system.nucleus(0).charge;
        const double mu = std::isfinite(l) ? 1.0 / (1.0 + 1.0 / scaled.nucleus(0).mass) : 1.0;
        pt.limit = -0.5 * mu * Z * Z;
        cfg.states = 1;
        const VariationalResult r = solve_variational(internal_hamiltonian(scaled).internal, cfg);
        pt.E0 = r.energy;
        pt.E1 = std::numeric_limits<double>::quiet_NaN();
        pt.spacing = std::numeric_limits<double>::quiet_NaN();
        pt.status = "OK";
        if (std::isfinite(l)) report.max_limit_deviation = std::max(report.max_limit_deviation, std::abs(pt.E0 - pt.limit));
      } else {
        cfg.states = 2;
        const VariationalResult r = solve_variational(build_internal_hamiltonian(scaled).descriptor, cfg);
        pt.E0 = r.energies.at(0);
        pt.E1 = r.energies.at(1);
        pt.spacing = pt.E1 - pt.E0;
        pt.status = "OK";
        xs.push_back(l);
        spacings.push_back(pt.spacing);
      }
    } catch (const NonSelfAdjointRisk &) {
      pt.E0 = pt.E1 = pt.spacing = std::numeric_limits<double>::quiet_NaN();
      pt.status = "NON_SELF_ADJOINT_RISK";
    } catch (const SolverError &e) {
      pt.E0 = pt.E1 = pt.spacing = std::numeric_limits<double>::quiet_NaN();
      pt.status = std::string("FAILED: ") + e.what();
    }
    report.points.push_back(pt);
  }
  if (mode == ScanMode::Molecular && xs.size() >= 2) report.spacing_exponent = log_log_slope(xs, spacings);
  return report;
}

std::string ScanReport::csv() const {
  CsvTable table({"lambda", "E0", "E1", "spacing", "status"});
  for (const ScanPoint &p : points)
    table.add_row({format_number(p.lambda), format_number(p.E0), format_number(p.E1), format_number(p.spacing),
                   p.status});
  return table.str();
}

std::string ScanReport::json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode == ScanMode::Atomic ? "ATOMIC" : "MOLECULAR";
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const ScanPoint &p : points) {
    nlohmann::ordered_json o;
    o["lambda"] = format_number(p.lambda);
    o["E0"] = format_number(p.E0);
    o["E1"] = format_number(p.E1);
    o["spacing"] = format_number(p.spacing);
    if (mode == ScanMode::Atomic) o["limit"] = p.limit;
    o["status"] = p.status;
    pts.push_back(o);
  }
  j["points"] = pts;
  if (mode == ScanMode::Molecular) j["spacing_exponent"] = spacing_exponent;
  else j["max_limit_deviation"] = max_limit_deviation;
  return j.dump(2);
}

} // namespace molab
