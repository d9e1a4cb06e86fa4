#pragma once

// Discrete Dirichlet operator L = (n-1) Delta_g + s_g on a grid metric,
// eigenvalue windows near a shift, conformal prescription of scalar curvature
// by Newton iteration, the first variation of a kernel eigenvalue under a
// conformal change, and kernel splitting.
//
// Delta_g comes from the energy form E(f) = sum A^ab d_a f d_b f du dphi with
// A = sqrt|G| G^-1: u- and phi-fluxes live on cell faces, the mixed term on
// cell corners. With volume weights W = sqrt|G| du dphi and stiffness K
// (E = f^T K f), Delta_h = -W^-1 K. The symmetrized operator is
// -(n-1) W^-1/2 K W^-1/2 + diag(s).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "anosov/grid.hpp"
#include "anosov/norms.hpp"
#include "anosov/random.hpp"

namespace anosov {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct DirichletOperator {
  std::shared_ptr<const GridMetric> grid;
  int n = 2;
  SparseMatrix stiffness;     // energy form, interior unknowns
  Eigen::VectorXd weights;    // volume weights (times e^{2f} after a conformal change)
  Eigen::VectorXd curvature;  // s at the unknowns
  SparseMatrix matrix;        // symmetrized operator

  Eigen::VectorXd laplacian(const Eigen::VectorXd& f) const { return -(stiffness * f).cwiseQuotient(weights); }

  /// L u in the unsymmetrized form (n-1) Delta_h u + s u.
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    return (n - 1) * laplacian(u) + curvature.cwiseProduct(u);
  }

  DirichletOperator shifted(double s0) const {
    DirichletOperator o = *this;
    o.curvature.array() += s0;
    SparseMatrix I(matrix.rows(), matrix.cols());
    I.setIdentity();
    o.matrix = matrix + s0 * I;
    return o;
  }

  int size() const { return static_cast<int>(weights.size()); }

  /// Coordinate text export of the symmetrized matrix: one "row col value" line
  /// per stored entry, zero-based.
  void write_coordinate(std::ostream& os) const {
    os.precision(17);
    for (int k = 0; k < matrix.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(matrix, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  }
};

namespace detail {

inline SparseMatrix stiffness_matrix(const GridMetric& g) {
  const int nu = g.nu(), np = g.nphi();
  const double hu = g.hu(), hp = g.hphi();
  GridField auu(nu, np), aup(nu, np), app(nu, np);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < np; ++j) {
      const double a = g.g11()(i, j), b = g.g12()(i, j), c = g.g22()(i, j);
      const double det = a * c - b * b, sq = g.sqrt_det()(i, j);
      auu(i, j) = sq * c / det;
      aup(i, j) = -sq * b / det;
      app(i, j) = sq * a / det;
    }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(g.unknowns()) * 9);
  auto unknown = [&](int i, int) { return i >= g.first_interior() && i < nu - 1; };
  auto wrap = [&](int j) { return (j % np + np) % np; };
  auto add_pair = [&](int i1, int j1, int i2, int j2, double w) {
    // w (f1 - f2)^2
    const bool u1 = unknown(i1, j1), u2 = unknown(i2, j2);
    const int a = u1 ? g.index(i1, j1) : -1, b = u2 ? g.index(i2, j2) : -1;
    if (u1) trip.emplace_back(a, a, w);
    if (u2) trip.emplace_back(b, b, w);
    if (u1 && u2) {
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
    }
  };
  for (int i = 0; i + 1 < nu; ++i)
    for (int j = 0; j < np; ++j) add_pair(i, j, i + 1, j, 0.5 * (auu(i, j) + auu(i + 1, j)) * hp / hu);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < np; ++j) {
      const int jn = wrap(j + 1);
      add_pair(i, j, i, jn, 0.5 * (app(i, j) + app(i, jn)) * hu / hp);
    }
  // Mixed term 2 c (D_u f)(D_phi f) hu hp on cell corners.
  for (int i = 0; i + 1 < nu; ++i)
    for (int j = 0; j < np; ++j) {
      const int jn = wrap(j + 1);
      const double c = 0.25 * (aup(i, j) + aup(i + 1, j) + aup(i, jn) + aup(i + 1, jn));
      if (c == 0.0) continue;
      const int ni[4] = {i, i + 1, i, i + 1};
      const int nj[4] = {j, j, jn, jn};
      const double du[4] = {-0.5 / hu, 0.5 / hu, -0.5 / hu, 0.5 / hu};
      const double dp[4] = {-0.5 / hp, -0.5 / hp, 0.5 / hp, 0.5 / hp};
      for (int p = 0; p < 4; ++p) {
        if (!unknown(ni[p], nj[p])) continue;
        for (int q = 0; q < 4; ++q) {
          if (!unknown(ni[q], nj[q])) continue;
          trip.emplace_back(g.index(ni[p], nj[p]), g.index(ni[q], nj[q]),
                            c * hu * hp * (du[p] * dp[q] + dp[p] * du[q]));
        }
      }
    }
  SparseMatrix K(g.unknowns(), g.unknowns());
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  return K;
}

inline void symmetrize(DirichletOperator& op) {
  const Eigen::VectorXd d = op.weights.cwiseSqrt().cwiseInverse();
  op.matrix = d.asDiagonal() * op.stiffness * d.asDiagonal();
  op.matrix *= -(op.n - 1.0);
  op.matrix += SparseMatrix(op.curvature.asDiagonal());
  op.matrix.makeCompressed();
}

}  // namespace detail

inline DirichletOperator assemble(const GridMetric& g, int n = 2) {
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  if (g.interior_rows() < 8) throw std::invalid_argument("grid too coarse: need at least 8 interior nodes per axis");
  DirichletOperator op;
  op.grid = std::make_shared<GridMetric>(g);
  op.n = n;
  op.stiffness = detail::stiffness_matrix(g);
  op.weights = g.restrict_interior(g.sqrt_det() * (g.hu() * g.hphi()));
  op.curvature = g.restrict_interior(g.scalar_curvature_field());
  detail::symmetrize(op);
  return op;
}

/// Discrete scalar curvature of e^{2f} g from the conformal formula; f vanishes
/// on the boundary and is given at all nodes. Returned at the interior unknowns.
inline Eigen::VectorXd conformal_scalar_curvature(const DirichletOperator& base, const Eigen::VectorXd& f);

/// Operator of e^{2f} g for a surface (n = 2): the stiffness is conformally
/// invariant, weights scale by e^{2f}, curvature follows the conformal formula.
inline DirichletOperator assemble_conformal(const DirichletOperator& base, const Eigen::VectorXd& f) {
  if (base.n != 2) throw std::invalid_argument("conformal reassembly is defined for surfaces (n = 2)");
  DirichletOperator op = base;
  op.weights = base.weights.cwiseProduct((2.0 * f).array().exp().matrix());
  op.curvature = conformal_scalar_curvature(base, f);
  detail::symmetrize(op);
  return op;
}

namespace detail {

/// Centred first differences along u and phi at the interior unknowns, with
/// zero boundary values and origin reflection on polar grids.
inline std::pair<SparseMatrix, SparseMatrix> gradient_matrices(const GridMetric& g) {
  const int nu = g.nu(), np = g.nphi();
  std::vector<Eigen::Triplet<double>> tu, tp;
  auto wrap = [&](int j) { return (j % np + np) % np; };
  for (int i = g.first_interior(); i < nu - 1; ++i)
    for (int j = 0; j < np; ++j) {
      const int row = g.index(i, j);
      auto add_u = [&](int ii, int jj, double w) {
        if (ii < 0) {
          ii = -ii - 1;
          jj = wrap(jj + np / 2);
        }
        if (ii >= g.first_interior() && ii < nu - 1) tu.emplace_back(row, g.index(ii, wrap(jj)), w);
      };
      add_u(i + 1, j, 0.5 / g.hu());
      add_u(i - 1, j, -0.5 / g.hu());
      tp.emplace_back(row, g.index(i, wrap(j + 1)), 0.5 / g.hphi());
      tp.emplace_back(row, g.index(i, wrap(j - 1)), -0.5 / g.hphi());
    }
  SparseMatrix Du(g.unknowns(), g.unknowns()), Dp(g.unknowns(), g.unknowns());
  Du.setFromTriplets(tu.begin(), tu.end());
  Dp.setFromTriplets(tp.begin(), tp.end());
  return {Du, Dp};
}

struct InverseMetric {
  Eigen::VectorXd uu, up, pp;
};

inline InverseMetric inverse_metric(const GridMetric& g) {
  InverseMetric r;
  GridField a = g.g11(), b = g.g12(), c = g.g22();
  GridField det = a * c - b * b;
  r.uu = g.restrict_interior(c / det);
  r.up = g.restrict_interior(-b / det);
  r.pp = g.restrict_interior(a / det);
  return r;
}

}  // namespace detail

inline Eigen::VectorXd conformal_scalar_curvature(const DirichletOperator& base, const Eigen::VectorXd& f) {
  const int n = base.n;
  const Eigen::VectorXd lap = base.laplacian(f);
  Eigen::VectorXd inner = base.curvature - 2.0 * (n - 1) * lap;
  if (n > 2) {
    const auto [Du, Dp] = detail::gradient_matrices(*base.grid);
    const auto gi = detail::inverse_metric(*base.grid);
    const Eigen::VectorXd fu = Du * f, fp = Dp * f;
    const Eigen::VectorXd df2 = (gi.uu.array() * fu.array().square() + 2.0 * gi.up.array() * fu.array() * fp.array() +
                                 gi.pp.array() * fp.array().square())
                                    .matrix();
    inner -= (n - 2.0) * (n - 1.0) * df2;
  }
  return ((-2.0 * f).array().exp() * inner.array()).matrix();
}

// ---------------------------------------------------------------------------
// Eigenvalue windows

struct SpectralWindow {
  std::vector<double> eigenvalues;             // ordered by distance from the shift
  std::vector<Eigen::VectorXd> eigenvectors;   // unknown-space fields with sum w u^2 = 1
  std::vector<double> residuals;               // ||L u - lambda u|| / ||u|| in the weighted norm
  double shift = 0.0;
  double radius = 0.0;
  double tolerance = 0.0;  // residual target actually used
  int iterations = 0;

  bool empty() const { return eigenvalues.empty(); }
  double sum() const {
    double s = 0.0;
    for (double l : eigenvalues) s += l;
    return s;
  }
};

class EigenSolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The `count` eigenpairs closest to `shift`, by block shift-invert subspace
/// iteration with Rayleigh-Ritz extraction.
inline SpectralWindow nearest_eigenpairs(const DirichletOperator& op, double shift, int count, double tol = 1e-10,
                                         int max_iter = 500, std::uint64_t seed = 1) {
  const int N = op.size();
  const int p = std::min(N, count + 4);
  // Residuals cannot drop below the rounding level of a matrix-vector product.
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(N);
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it) row_sums[it.row()] += std::abs(it.value());
  tol = std::max(tol, 0.1 * std::numeric_limits<double>::epsilon() * row_sums.maxCoeff());
  SparseMatrix B = op.matrix;
  SparseMatrix I(N, N);
  I.setIdentity();
  B -= shift * I;
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(B);
  if (lu.info() != Eigen::Success) {
    // Shift sits on an eigenvalue to machine precision; nudge it.
    const double nudge = 1e-9 * std::max(1.0, std::abs(shift));
    B -= nudge * I;
    lu.compute(B);
    if (lu.info() != Eigen::Success) throw EigenSolverFailure("shift-invert factorization failed");
  }
  Eigen::MatrixXd X(N, p);
  SplitMix64 rng(seed);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < N; ++i) X(i, j) = rng.uniform() - 0.5;
  SpectralWindow w;
  w.shift = shift;
  w.tolerance = tol;
  Eigen::VectorXd lam;
  Eigen::MatrixXd Q;
  double last_worst = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXd Y = lu.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, p);
    const Eigen::MatrixXd AQ = op.matrix * Q;
    const Eigen::MatrixXd H = Q.transpose() * AQ;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    std::vector<int> order(p);
    for (int k = 0; k < p; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(es.eigenvalues()[a] - shift) < std::abs(es.eigenvalues()[b] - shift);
    });
    Eigen::MatrixXd V(p, p);
    lam.resize(p);
    for (int k = 0; k < p; ++k) {
      V.col(k) = es.eigenvectors().col(order[k]);
      lam[k] = es.eigenvalues()[order[k]];
    }
    X = Q * V;
    const Eigen::MatrixXd R = AQ * V - X * lam.asDiagonal();
    double worst = 0.0;
    w.residuals.assign(static_cast<std::size_t>(count), 0.0);
    for (int k = 0; k < count; ++k) {
      w.residuals[k] = R.col(k).norm();
      worst = std::max(worst, w.residuals[k]);
    }
    w.iterations = it;
    if (worst <= tol) break;
    stagnant = worst > 0.5 * last_worst ? stagnant + 1 : 0;
    last_worst = std::min(last_worst, worst);
    if (stagnant >= 8 && worst <= 1e3 * tol) break;
    if (it == max_iter)
      throw EigenSolverFailure("eigensolver did not converge: residual " + std::to_string(worst) + " after " +
                               std::to_string(it) + " iterations");
  }
  const Eigen::VectorXd d = op.weights.cwiseSqrt().cwiseInverse();
  for (int k = 0; k < count; ++k) {
    w.eigenvalues.push_back(lam[k]);
    Eigen::VectorXd u = d.cwiseProduct(X.col(k));
    const double norm = std::sqrt(u.cwiseProduct(u).dot(op.weights));
    // fix the sign so the largest component is positive
    Eigen::Index imax;
    u.cwiseAbs().maxCoeff(&imax);
    w.eigenvectors.push_back((u[imax] < 0.0 ? -1.0 : 1.0) * u / norm);
  }
  return w;
}

/// All eigenpairs with |lambda| < radius (up to max_count).
inline SpectralWindow kernel_window(const DirichletOperator& op, double radius, int max_count = 8,
                                    double tol = 1e-10) {
  for (int count = 2; count <= max_count + 1; count *= 2) {
    const SpectralWindow w = nearest_eigenpairs(op, 0.0, std::min(count, op.size()), tol);
    int inside = 0;
    while (inside < count && std::abs(w.eigenvalues[inside]) < radius) ++inside;
    if (inside < count || count > max_count) {
      SpectralWindow out;
      out.shift = 0.0;
      out.radius = radius;
      out.iterations = w.iterations;
      for (int k = 0; k < std::min(inside, max_count); ++k) {
        out.eigenvalues.push_back(w.eigenvalues[k]);
        out.eigenvectors.push_back(w.eigenvectors[k]);
        out.residuals.push_back(w.residuals[k]);
      }
      return out;
    }
  }
  throw EigenSolverFailure("kernel window exceeds " + std::to_string(max_count) + " eigenvalues");
}

struct LpscVerdict {
  bool lpsc = false;
  double lambda = 0.0;  // eigenvalue of least modulus
  double gap_tol = 0.0;
  double residual = 0.0;
  std::string label() const { return lpsc ? "LPSC with margin" : "kernel within tolerance"; }
};

inline LpscVerdict lpsc_test(const DirichletOperator& op, double gap_tol = 1e-8) {
  const SpectralWindow w = nearest_eigenpairs(op, 0.0, 1);
  LpscVerdict v;
  v.lambda = w.eigenvalues[0];
  v.residual = w.residuals[0];
  v.gap_tol = gap_tol;
  v.lpsc = std::abs(v.lambda) > gap_tol;
  return v;
}

struct KernelTuning {
  double parameter = 0.0;
  double lambda = 0.0;
  int iterations = 0;
};

/// Secant continuation in a scalar parameter until the eigenvalue of least
/// modulus of family(c) vanishes to `tol`.
inline KernelTuning tune_kernel(const std::function<DirichletOperator(double)>& family, double c0, double c1,
                                double tol = 1e-12, int max_iter = 40) {
  double l0 = nearest_eigenpairs(family(c0), 0.0, 1).eigenvalues[0];
  double l1 = nearest_eigenpairs(family(c1), 0.0, 1).eigenvalues[0];
  for (int it = 1; it <= max_iter; ++it) {
    if (std::abs(l1) <= tol) return {c1, l1, it};
    if (l1 == l0) break;
    const double c2 = c1 - l1 * (c1 - c0) / (l1 - l0);
    c0 = c1;
    l0 = l1;
    c1 = c2;
    l1 = nearest_eigenpairs(family(c1), 0.0, 1, 1e-12).eigenvalues[0];
  }
  if (std::abs(l1) <= tol) return {c1, l1, max_iter};
  throw EigenSolverFailure("kernel continuation stalled at |lambda| = " + std::to_string(std::abs(l1)));
}

// ---------------------------------------------------------------------------
// Prescription

class LpscFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NewtonDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NewtonRecord {
  int iteration = 0;
  double residual = 0.0;  // sup norm of Phi before the step
  double step = 0.0;      // sup norm of the accepted update
  double damping = 1.0;
};

struct ConformalFactor {
  GridField field;
  int boundary_vanishing_order = 0;
  bool infinite_order = false;
};

struct Prescription {
  ConformalFactor f;
  Eigen::VectorXd values;  // f at the unknowns
  Eigen::VectorXd first_step;
  std::vector<NewtonRecord> trace;
  double residual = 0.0;
  int iterations = 0;
};

/// Phi(f) = s_{e^{2f} g} - (s_g + h) at the unknowns.
inline Eigen::VectorXd prescription_residual(const DirichletOperator& op, const Eigen::VectorXd& f,
                                             const Eigen::VectorXd& h) {
  return conformal_scalar_curvature(op, f) - op.curvature - h;
}

/// Solves s_{e^{2f} g} = s_g + h for f vanishing on the boundary by damped
/// Newton iteration with the exact discrete Jacobian.
inline Prescription prescribe(const DirichletOperator& op, const GridField& h_field, double tol = 1e-8,
                              int max_iter = 30, bool check_lpsc = true) {
  const GridMetric& g = *op.grid;
  if (check_lpsc) {
    const LpscVerdict v = lpsc_test(op);
    if (!v.lpsc) throw LpscFailure("operator has an eigenvalue " + std::to_string(v.lambda) + " within the gap");
  }
  const Eigen::VectorXd h = g.restrict_interior(h_field);
  const int N = op.size();
  const int n = op.n;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(N);
  Prescription out;
  const auto [Du, Dp] = detail::gradient_matrices(g);
  const auto gi = detail::inverse_metric(g);
  const Eigen::VectorXd winv = op.weights.cwiseInverse();
  SparseMatrix lap = winv.asDiagonal() * op.stiffness;
  lap *= -1.0;
  Eigen::VectorXd phi = prescription_residual(op, f, h);
  double res = phi.lpNorm<Eigen::Infinity>();
  std::ostringstream history;
  for (int it = 0; it <= max_iter; ++it) {
    history << (it ? ", " : "") << res;
    if (res <= tol) {
      out.residual = res;
      out.iterations = it;
      out.values = f;
      out.f.field = g.extend_interior(f);
      return out;
    }
    if (it == max_iter) break;
    const Eigen::VectorXd e2 = (-2.0 * f).array().exp().matrix();
    const Eigen::VectorXd s_new = conformal_scalar_curvature(op, f);
    // d/df [e^{-2f} X(f)] k = -2 s_new k + e^{-2f} X'(f) k
    SparseMatrix J = e2.asDiagonal() * lap;
    J *= -2.0 * (n - 1.0);
    if (n > 2) {
      const Eigen::VectorXd fu = Du * f, fp = Dp * f;
      const Eigen::VectorXd cu = gi.uu.cwiseProduct(fu) + gi.up.cwiseProduct(fp);
      const Eigen::VectorXd cp = gi.up.cwiseProduct(fu) + gi.pp.cwiseProduct(fp);
      const SparseMatrix G = SparseMatrix(cu.asDiagonal()) * Du + SparseMatrix(cp.asDiagonal()) * Dp;
      SparseMatrix EG = e2.asDiagonal() * G;
      EG *= 2.0 * (n - 2.0) * (n - 1.0);
      J -= EG;
    }
    J += SparseMatrix((-2.0 * s_new).asDiagonal());
    J.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu(J);
    if (lu.info() != Eigen::Success) throw NewtonDivergence("singular Newton Jacobian; residuals " + history.str());
    const Eigen::VectorXd step = lu.solve(-phi);
    if (it == 0) out.first_step = step;
    double damping = 1.0;
    Eigen::VectorXd trial, phi_trial;
    double res_trial = 0.0;
    for (int b = 0; b < 30; ++b) {
      trial = f + damping * step;
      phi_trial = prescription_residual(op, trial, h);
      res_trial = phi_trial.lpNorm<Eigen::Infinity>();
      if (res_trial < (1.0 - 1e-4 * damping) * res || res_trial <= tol) break;
      damping *= 0.5;
    }
    if (!(res_trial < res)) throw NewtonDivergence("no decrease along the Newton direction; residuals " + history.str());
    out.trace.push_back({it + 1, res, damping * step.lpNorm<Eigen::Infinity>(), damping});
    f = trial;
    phi = phi_trial;
    res = res_trial;
  }
  throw NewtonDivergence("no convergence in " + std::to_string(max_iter) + " iterations; residuals " + history.str());
}

// ---------------------------------------------------------------------------
// Kernel eigenvalue variation and splitting

/// First variation of the kernel eigenvalue sum under f = s k:
/// -(n-1)(n/2 + 1) * sum w (Delta_h k) theta with theta = sum u_i^2.
inline double eigenvalue_derivative(const DirichletOperator& op, const SpectralWindow& window,
                                    const Eigen::VectorXd& k) {
  if (window.empty()) throw std::invalid_argument("empty spectral window");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(op.size());
  for (const auto& u : window.eigenvectors) theta += u.cwiseProduct(u);
  const Eigen::VectorXd lap = op.laplacian(k);
  return -(op.n - 1.0) * (op.n / 2.0 + 1.0) * lap.cwiseProduct(theta).dot(op.weights);
}

/// Compactly supported smooth bump exp(1 - 1/(1 - |x - c|^2 / rho^2)).
struct MollifiedBump {
  ChartPoint center;
  double radius = 0.5;

  template <class T>
  T operator()(const T& x, const T& y) const {
    using std::exp;
    const T q = ((x - center.x) * (x - center.x) + (y - center.y) * (y - center.y)) / (radius * radius);
    if (!(value_of(q) < 1.0)) return T(0.0);
    return exp(1.0 - 1.0 / (1.0 - q));
  }
};

struct PerturbationStep {
  int window_before = 0;
  int window_after = 0;
  int basis_index = 0;
  double derivative = 0.0;
  double amplitude = 0.0;
  double lambda_after = 0.0;
};

struct Perturbation {
  ConformalFactor f;
  Eigen::VectorXd values;
  std::vector<MollifiedBump> bumps;
  std::vector<double> amplitudes;
  std::vector<PerturbationStep> steps;
  double c2_norm = 0.0;
  LpscVerdict verdict;

  template <class T>
  T operator()(const T& x, const T& y) const {
    T s(0.0);
    for (std::size_t i = 0; i < bumps.size(); ++i) s += amplitudes[i] * bumps[i](x, y);
    return s;
  }
};

/// Splits a near-kernel by conformal perturbations drawn from a bump basis until
/// the operator is LPSC with margin gap_tol. Each step uses at most eps / K of
/// the C^2 budget, K being the initial window dimension.
inline Perturbation lpsc_perturb(const DirichletOperator& op, double eps, double gap_tol,
                                 const std::vector<MollifiedBump>& basis, double min_derivative = 1e-6) {
  const GridMetric& g = *op.grid;
  if (!g.source()) throw std::invalid_argument("perturbation needs the metric the grid was sampled from");
  const Metric& m = *g.source();
  Perturbation out;
  out.values = Eigen::VectorXd::Zero(op.size());
  DirichletOperator cur = op;
  SpectralWindow win = kernel_window(cur, gap_tol);
  const int K = static_cast<int>(win.eigenvalues.size());
  std::vector<ChartPoint> pts;
  for (int i = 0; i < g.nu(); i += 2)
    for (int j = 0; j < g.nphi(); j += 2) pts.push_back(g.chart_point(i, j));
  while (!win.empty()) {
    // Basis element with the largest eigenvalue variation.
    int best = -1;
    double best_d = 0.0;
    std::vector<Eigen::VectorXd> sampled;
    for (std::size_t b = 0; b < basis.size(); ++b) {
      sampled.push_back(g.restrict_interior(g.sample_field(basis[b])));
      const double d = eigenvalue_derivative(cur, win, sampled.back());
      if (std::abs(d) > std::abs(best_d)) {
        best_d = d;
        best = static_cast<int>(b);
      }
    }
    if (best < 0 || std::abs(best_d) < min_derivative) {
      std::ostringstream msg;
      msg << "no basis element moves the kernel eigenvalue (scanned " << basis.size() << " bumps, max |d| = "
          << std::abs(best_d) << ")";
      throw std::runtime_error(msg.str());
    }
    const MollifiedBump& bump = basis[static_cast<std::size_t>(best)];
    const double unit_norm = cm_norm(m, bump, 2, pts);
    const double budget = eps / std::max(K, 1) / unit_norm;
    // Line search on the amplitude, pushing eigenvalues away from zero.
    double s = std::min(budget, 4.0 * gap_tol / std::abs(best_d));
    const double sign = 1.0;  // either sign splits; move the eigenvalue by s * d
    DirichletOperator next;
    LpscVerdict v;
    for (;;) {
      const Eigen::VectorXd trial = out.values + sign * s * sampled[static_cast<std::size_t>(best)];
      next = assemble_conformal(op, trial);
      v = lpsc_test(next, gap_tol);
      if (v.lpsc || s >= budget) break;
      s = std::min(2.0 * s, budget);
    }
    const SpectralWindow after = kernel_window(next, gap_tol);
    if (after.eigenvalues.size() >= win.eigenvalues.size())
      throw std::runtime_error("perturbation step did not shrink the kernel window within the C^2 budget");
    out.values += sign * s * sampled[static_cast<std::size_t>(best)];
    out.bumps.push_back(bump);
    out.amplitudes.push_back(sign * s);
    out.steps.push_back({static_cast<int>(win.eigenvalues.size()), static_cast<int>(after.eigenvalues.size()), best,
                         best_d, sign * s, v.lambda});
    cur = next;
    win = after;
  }
  out.f.field = g.extend_interior(out.values);
  out.f.infinite_order = true;  // bumps are supported away from the boundary
  out.c2_norm = out.bumps.empty() ? 0.0 : cm_norm(m, out, 2, pts);
  out.verdict = lpsc_test(cur, gap_tol);
  return out;
}

}  // namespace anosov
