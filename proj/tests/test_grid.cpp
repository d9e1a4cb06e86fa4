#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "anosov/geodesic.hpp"
#include "anosov/grid.hpp"
#include "anosov/norms.hpp"

using namespace anosov;

namespace {

Metric cap_metric(double c) { return Metric::spherical_cap(c); }

}  // namespace

TEST(GridMetric, SampledFlatDisk) {
  const GridMetric g = GridMetric::sample(Metric::euclidean_disk(), 17, 16);
  EXPECT_EQ(g.kind(), GridKind::Polar);
  EXPECT_NEAR(g.u(16), 1.0, 1e-15);
  EXPECT_NEAR(g.u(0), 0.5 * g.hu(), 1e-15);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 16; ++j) {
      EXPECT_NEAR(g.g11()(i, j), 1.0, 1e-14);
      EXPECT_NEAR(g.g12()(i, j), 0.0, 1e-14);
      EXPECT_NEAR(g.g22()(i, j), g.u(i) * g.u(i), 1e-14);
      EXPECT_EQ(g.scalar_curvature_field()(i, j), 0.0);
    }
  EXPECT_EQ(g.unknowns(), 16 * 16);
  EXPECT_TRUE(g.boundary(16));
  EXPECT_FALSE(g.boundary(0));
}

TEST(GridMetric, FiniteDifferenceCurvatureConverges) {
  // Cap components in polar coordinates: e^{2 phi(r)} (dr^2 + r^2 dphi^2), s = 2.
  double prev = 1e9;
  for (int N : {33, 65}) {
    const GridMetric ref = GridMetric::sample(cap_metric(0.8), N, N - 1);
    const GridMetric g = GridMetric::from_components(GridKind::Polar, 0.0, 1.0, ref.g11(), ref.g12(), ref.g22());
    double err = 0.0, mid = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N - 1; ++j) {
        const double e = std::abs(g.scalar_curvature_field()(i, j) - 2.0);
        err = std::max(err, e);
        if (i > N / 4 && i < 3 * N / 4) mid = std::max(mid, e);
      }
    // Second order overall (one-sided stencils, polar origin), fourth order inside.
    EXPECT_LT(err, prev / 3.5);
    EXPECT_LT(mid, 1e-3);
    prev = err;
  }
}

TEST(GridMetric, CollarGridAndErrors) {
  const Metric m = WarpedMetric{Profile::from_callable([](const auto& t) {
                                  using std::cosh;
                                  return cosh(t);
                                }),
                                -1.0, 1.0}
                       .metric();
  const GridMetric g = GridMetric::sample(m, 21, 32);
  EXPECT_EQ(g.kind(), GridKind::Collar);
  EXPECT_NEAR(g.g22()(0, 0), std::cosh(1.0) * std::cosh(1.0), 1e-14);
  EXPECT_NEAR(g.scalar_curvature_field()(10, 3), -2.0, 1e-12);
  EXPECT_TRUE(g.boundary(0));
  EXPECT_EQ(g.unknowns(), 19 * 32);

  EXPECT_THROW(GridMetric::sample(Metric::euclidean_disk(), 6, 16), std::invalid_argument);
  EXPECT_THROW(GridMetric::sample(Metric::euclidean_disk(), 17, 15), std::invalid_argument);
  GridField bad = GridField::Ones(12, 8);
  bad(3, 3) = -1.0;
  EXPECT_THROW(GridMetric::from_components(GridKind::Collar, 0.0, 1.0, bad, GridField::Zero(12, 8), GridField::Ones(12, 8)),
               GeometryError);
}

TEST(GridMetric, InterpolationThroughOrigin) {
  const GridMetric g = GridMetric::sample(Metric::euclidean_disk(), 65, 64);
  auto f = [](double x, double y) { return std::exp(0.5 * x) * std::cos(y) + x * y; };
  const GridField F = g.sample_field(f);
  for (const ChartPoint p : {ChartPoint{0.0, 0.0}, ChartPoint{0.003, -0.002}, ChartPoint{0.5, 0.3},
                             ChartPoint{-0.7, 0.69}, ChartPoint{0.0, -0.999}})
    EXPECT_NEAR(g.interpolate(F, p), f(p.x, p.y), 2e-5) << p.x << " " << p.y;
}

TEST(Norms, FornbergWeights) {
  const auto w = fornberg_weights({-1.0, 0.0, 1.0}, 0.0, 2);
  EXPECT_NEAR(w[2][0], 1.0, 1e-14);
  EXPECT_NEAR(w[2][1], -2.0, 1e-14);
  EXPECT_NEAR(w[1][2], 0.5, 1e-14);
  EXPECT_NEAR(w[0][1], 1.0, 1e-14);
}

TEST(Norms, GeodesicJetMatchesIntegration) {
  const Metric m = Metric::conformal_disk([](const auto& x, const auto& y) { return 0.3 * x * x - 0.2 * y + 0.1 * x * y; });
  const ChartPoint p{0.1, -0.2};
  const Eigen::Vector2d X = make_unit(m, p, Eigen::Vector2d(0.6, 0.8)).direction;
  const auto jet = geodesic_jet<5>(m, p, X);
  const GeodesicPath path = integrate(m, {p, X}, 0.05, 1e-13);
  const double t = path.times.back();
  double x = 0, y = 0, tp = 1;
  for (int k = 0; k <= 5; ++k, tp *= t) {
    x += jet[0].coeff(k) * tp;
    y += jet[1].coeff(k) * tp;
  }
  EXPECT_NEAR(x, path.states.back().base.x, 1e-10);
  EXPECT_NEAR(y, path.states.back().base.y, 1e-10);
}

TEST(Norms, AnalyticNorms) {
  const Metric flat = Metric::euclidean_disk();
  std::vector<ChartPoint> pts;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j < 12; ++j) {
      const double r = 0.1 * i, a = 2 * std::numbers::pi * j / 12;
      pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
  for (int m = 0; m <= 4; ++m) EXPECT_NEAR(cm_norm(flat, [](const auto& x, const auto&) { return 0.0 * x - 2.5; }, m, pts), 2.5, 1e-14);
  EXPECT_NEAR(cm_norm(flat, [](const auto& x, const auto&) { return x; }, 1, pts), 1.0, 1e-14);
  EXPECT_NEAR(cm_norm(flat, [](const auto& x, const auto&) { return 3.0 * x; }, 1, pts), 3.0, 1e-14);
  // Hessian of x^2 + y^2 is 2 g.
  EXPECT_NEAR(cm_norm(flat, [](const auto& x, const auto& y) { return x * x + y * y; }, 2, pts), 2.0, 1e-12);

  // On dt^2 + cosh^2 t dtheta^2, Hess t = sinh t cosh t dtheta^2, so along the
  // unit theta direction the second derivative of t is tanh t.
  const Metric w = WarpedMetric{Profile::from_callable([](const auto& t) {
                                  using std::cosh;
                                  return cosh(t);
                                }),
                                -1.0, 1.0}
                       .metric();
  for (double t0 : {-0.7, 0.2, 0.9}) {
    const auto g = geodesic_jet<3>(w, {t0, 1.0}, Eigen::Vector2d(0.0, 1.0 / std::cosh(t0)));
    EXPECT_NEAR(2.0 * g[0].coeff(2), std::tanh(t0), 1e-13);
  }
  EXPECT_THROW(cm_norm(flat, [](const auto& x, const auto&) { return x; }, 6, pts), OrderError);
}

TEST(Norms, GridNormOfQuadratic) {
  const GridMetric g = GridMetric::sample(Metric::euclidean_disk(), 65, 64);
  const GridField F = g.sample_field([](double x, double y) { return x * x + y * y; });
  EXPECT_NEAR(cm_norm(g, F, 0), 1.0, 1e-14);
  EXPECT_NEAR(cm_norm(g, F, 1), 2.0, 2e-3);
  EXPECT_NEAR(cm_norm(g, F, 2), 2.0, 2e-3);
  EXPECT_THROW(cm_norm(g, F, 3), OrderError);
}
