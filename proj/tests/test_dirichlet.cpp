#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "anosov/dirichlet.hpp"

using namespace anosov;

namespace {

constexpr double kJ01Squared = 5.783185962946784;

Metric bumpy_disk() {
  return Metric::conformal_disk([](const auto& x, const auto& y) { return 0.1 * x * x - 0.05 * x * y + 0.05 * y; });
}

DirichletOperator cap_operator(double c, int N) { return assemble(GridMetric::sample(Metric::spherical_cap(c), N, N - 1)); }

}  // namespace

TEST(Dirichlet, SymmetricAndConsistent) {
  const DirichletOperator op = assemble(GridMetric::sample(bumpy_disk(), 33, 32));
  const SparseMatrix T = op.matrix.transpose();
  const double scale = Eigen::MatrixXd(op.matrix).cwiseAbs().maxCoeff();
  EXPECT_LE(Eigen::MatrixXd(op.matrix - T).cwiseAbs().maxCoeff(), 1e-12 * scale);

  // Manufactured solution on the flat disk: Delta (1 - r^2)^2 = 16 r^2 - 8.
  double prev = 1e9;
  for (int N : {33, 65, 129}) {
    const GridMetric g = GridMetric::sample(Metric::euclidean_disk(), N, N - 1);
    const DirichletOperator flat = assemble(g);
    const auto u = g.restrict_interior(g.sample_field([](double x, double y) {
      const double q = 1 - x * x - y * y;
      return q * q;
    }));
    const auto exact = g.restrict_interior(g.sample_field([](double x, double y) { return 16 * (x * x + y * y) - 8; }));
    const double err = (flat.laplacian(u) - exact).cwiseProduct(flat.weights).cwiseAbs().sum();
    EXPECT_LT(err, prev / 3.5) << N;
    prev = err;
  }
}

TEST(Dirichlet, FlatDiskAndCylinderSpectra) {
  const DirichletOperator disk = assemble(GridMetric::sample(Metric::euclidean_disk(), 65, 64));
  const SpectralWindow w = nearest_eigenpairs(disk, 0.0, 3);
  EXPECT_NEAR(w.eigenvalues[0], -kJ01Squared, 2e-3);
  EXPECT_NEAR(w.eigenvalues[1], w.eigenvalues[2], 1e-8);  // degenerate pair
  for (double r : w.residuals) EXPECT_LE(r, 1e-9);
  for (const auto& u : w.eigenvectors) EXPECT_NEAR(u.cwiseProduct(u).dot(disk.weights), 1.0, 1e-12);

  const SpectralWindow shifted = nearest_eigenpairs(disk.shifted(3.0), 0.0, 1);
  EXPECT_NEAR(shifted.eigenvalues[0], w.eigenvalues[0] + 3.0, 1e-9);

  // Flat cylinder [0, pi] x S^1: lowest Dirichlet mode sin t with eigenvalue -1.
  const Metric cyl = WarpedMetric{Profile::from_callable([](const auto& t) { return 1.0 + 0.0 * t; }), 0.0,
                                  std::numbers::pi}
                         .metric();
  const DirichletOperator c = assemble(GridMetric::sample(cyl, 65, 32));
  EXPECT_NEAR(nearest_eigenpairs(c, 0.0, 1).eigenvalues[0], -1.0, 1e-3);

  EXPECT_THROW(assemble(GridMetric::sample(Metric::euclidean_disk(), 12, 16), 1), std::invalid_argument);
  std::ostringstream coo;
  disk.write_coordinate(coo);
  EXPECT_FALSE(coo.str().empty());
}

TEST(Dirichlet, SecondOrderEigenvalueConvergence) {
  std::vector<double> err;
  std::vector<double> h;
  for (int N : {17, 33, 65}) {
    const GridMetric g = GridMetric::sample(Metric::euclidean_disk(), N, N - 1);
    err.push_back(std::abs(nearest_eigenpairs(assemble(g), 0.0, 1).eigenvalues[0] + kJ01Squared));
    h.push_back(g.hu());
  }
  for (std::size_t i = 1; i < err.size(); ++i)
    EXPECT_NEAR(std::log(err[i - 1] / err[i]) / std::log(h[i - 1] / h[i]), 2.0, 0.2);
}

TEST(Lpsc, Verdicts) {
  const DirichletOperator disk = assemble(GridMetric::sample(Metric::euclidean_disk(), 33, 32));
  EXPECT_TRUE(lpsc_test(disk).lpsc);
  EXPECT_TRUE(lpsc_test(disk.shifted(1e6)).lpsc);

  const auto family = [](double c) { return cap_operator(c, 33); };
  const KernelTuning t = tune_kernel(family, 0.95, 1.05);
  EXPECT_LE(std::abs(t.lambda), 1e-12);
  EXPECT_NEAR(t.parameter, 1.0, 5e-3);  // hemisphere up to discretization
  const DirichletOperator tuned = family(t.parameter);
  const LpscVerdict v = lpsc_test(tuned, 1e-8);
  EXPECT_FALSE(v.lpsc);
  EXPECT_EQ(v.label(), "kernel within tolerance");
  EXPECT_EQ(kernel_window(tuned, 1e-6).eigenvalues.size(), 1u);
}

TEST(Prescribe, ZeroAndFirstStep) {
  const GridMetric g = GridMetric::sample(bumpy_disk(), 33, 32);
  const DirichletOperator op = assemble(g);
  const Prescription zero = prescribe(op, g.zeros());
  EXPECT_EQ(zero.iterations, 0);
  EXPECT_EQ(GridMetric::sup(zero.f.field), 0.0);

  const GridField h = g.sample_field([](double x, double y) { return 0.01 * (1 + x - 0.5 * y * y); });
  const Prescription p = prescribe(op, h, 1e-10);
  // First Newton step from f = 0 is -1/2 L^{-1} h.
  Eigen::SparseLU<SparseMatrix> lu;
  const Eigen::VectorXd winv = op.weights.cwiseInverse();
  SparseMatrix L = winv.asDiagonal() * op.stiffness;
  L *= -(op.n - 1.0);
  L += SparseMatrix(op.curvature.asDiagonal());
  lu.compute(L);
  const Eigen::VectorXd direct = -0.5 * lu.solve(g.restrict_interior(h));
  EXPECT_LE((p.first_step - direct).lpNorm<Eigen::Infinity>(), 1e-12 * direct.lpNorm<Eigen::Infinity>());
  // Closure.
  const Eigen::VectorXd closure = conformal_scalar_curvature(op, p.values) - op.curvature - g.restrict_interior(h);
  EXPECT_LE(closure.lpNorm<Eigen::Infinity>(), 1e-10);
  // Quadratic tail.
  for (std::size_t i = 1; i < p.trace.size(); ++i) {
    if (p.trace[i - 1].residual < 1e-3 && p.trace[i].residual > 1e-12) {
      EXPECT_LE(p.trace[i].residual, 10.0 * p.trace[i - 1].residual * p.trace[i - 1].residual / 1e-3 + 1e-12);
    }
  }
  // f vanishes on the boundary.
  for (int j = 0; j < g.nphi(); ++j) EXPECT_EQ(p.f.field(g.nu() - 1, j), 0.0);
}

TEST(Prescribe, HigherDimensionFormula) {
  const GridMetric g = GridMetric::sample(bumpy_disk(), 33, 32);
  const DirichletOperator op = assemble(g, 3);
  const GridField h = g.sample_field([](double x, double) { return 0.02 * std::cos(x); });
  const Prescription p = prescribe(op, h, 1e-10);
  EXPECT_LE(p.residual, 1e-10);
  EXPECT_GE(p.iterations, 2);
}

TEST(Prescribe, RefusesKernel) {
  const auto family = [](double c) { return cap_operator(c, 33); };
  const DirichletOperator tuned = family(tune_kernel(family, 0.95, 1.05).parameter);
  EXPECT_THROW(prescribe(tuned, tuned.grid->zeros()), LpscFailure);
}

TEST(EigenvalueDerivative, FormulaMatchesFiniteDifference) {
  const auto family = [](double c) { return cap_operator(c, 33); };
  const DirichletOperator op = family(tune_kernel(family, 0.95, 1.05).parameter);
  const SpectralWindow win = kernel_window(op, 1e-6);
  const GridMetric& g = *op.grid;
  for (const MollifiedBump b : {MollifiedBump{{0.2, 0.1}, 0.5}, MollifiedBump{{-0.3, 0.3}, 0.4}}) {
    const Eigen::VectorXd k = g.restrict_interior(g.sample_field(b));
    const double d = eigenvalue_derivative(op, win, k);
    const double s = 1e-4;
    const double lp = nearest_eigenpairs(assemble_conformal(op, s * k), 0.0, 1, 1e-13).eigenvalues[0];
    const double lm = nearest_eigenpairs(assemble_conformal(op, -s * k), 0.0, 1, 1e-13).eigenvalues[0];
    EXPECT_LE(std::abs(d - (lp - lm) / (2 * s)), 1e-4 * std::abs(d));
  }
  // Sign: k = -Delta^{-1} theta gives a positive derivative.
  Eigen::VectorXd theta = win.eigenvectors[0].cwiseProduct(win.eigenvectors[0]);
  Eigen::SparseLU<SparseMatrix> lu;
  SparseMatrix lap = op.weights.cwiseInverse().asDiagonal() * op.stiffness;
  lap *= -1.0;
  lu.compute(lap);
  const Eigen::VectorXd k = -lu.solve(theta);
  EXPECT_GT(eigenvalue_derivative(op, win, k), 0.0);
  EXPECT_THROW(eigenvalue_derivative(op, SpectralWindow{}, k), std::invalid_argument);
}

TEST(LpscPerturb, SplitsTunedKernel) {
  const auto family = [](double c) { return cap_operator(c, 33); };
  const DirichletOperator op = family(tune_kernel(family, 0.95, 1.05).parameter);
  std::vector<MollifiedBump> basis;
  for (int i = 0; i < 6; ++i) basis.push_back({{0.4 * std::cos(i), 0.4 * std::sin(i)}, 0.4});
  const Perturbation p = lpsc_perturb(op, 1e-2, 1e-6, basis);
  EXPECT_TRUE(p.verdict.lpsc);
  EXPECT_LT(p.c2_norm, 1e-2);
  ASSERT_EQ(p.steps.size(), 1u);
  EXPECT_LT(p.steps[0].window_after, p.steps[0].window_before);

  const DirichletOperator disk = assemble(GridMetric::sample(Metric::euclidean_disk(), 33, 32));
  const Perturbation none = lpsc_perturb(disk, 1e-2, 1e-6, basis);
  EXPECT_TRUE(none.steps.empty());
  EXPECT_EQ(GridMetric::sup(none.f.field), 0.0);
}
