#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "anosov/bump.hpp"
#include "anosov/norms.hpp"

using namespace anosov;

namespace {

const Metric& flat() {
  static const Metric m = Metric::euclidean_disk();
  return m;
}

double factorial(int k) { return std::tgamma(k + 1.0); }

}  // namespace

TEST(BumpFamily, ProfileJetAtOrigin) {
  for (int m : {3, 5, 7}) {
    const BumpFamily b(flat(), m, 0.1, {{0.0, 0.0}});
    const Jet<1, 10> u = b.chi(Jet<1, 10>::variable(0.0));
    for (int j = 0; j <= m - 2; ++j) EXPECT_NEAR(u.coeff(j), 0.0, 1e-13) << "m=" << m << " j=" << j;
    EXPECT_NEAR(factorial(m - 1) * u.coeff(m - 1), -1.0, 1e-12) << m;
  }
}

TEST(BumpFamily, ProfileJetByFiniteDifferences) {
  // Central differences of order m-1 at 0 with step s carry an O(s^2) error.
  for (int m : {3, 5}) {
    const BumpFamily b(flat(), m, 0.1, {{0.0, 0.0}});
    const double s = m == 3 ? 1e-3 : 2e-2;
    std::vector<double> nodes;
    for (int k = -4; k <= 4; ++k) nodes.push_back(k * s);
    const auto w = fornberg_weights(nodes, 0.0, m - 1);
    for (int j = 0; j <= m - 1; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < nodes.size(); ++k) d += w[j][k] * b.chi(nodes[k]);
      EXPECT_NEAR(d, j == m - 1 ? -1.0 : 0.0, 1e-5) << "m=" << m << " j=" << j;
    }
  }
}

TEST(BumpFamily, SupportAndEvenness) {
  const BumpFamily b(flat(), 5, 0.1, {{0.0, 0.0}});
  for (double u : {1.0, 1.2, -1.0, -3.0}) EXPECT_EQ(b.chi(u), 0.0);
  for (double u : {0.1, 0.5, 0.9, 0.999}) EXPECT_EQ(b.chi(u), b.chi(-u));
  EXPECT_NE(b.chi(0.5), 0.0);
  // Smooth at the edge of the support.
  EXPECT_LT(std::abs(b.chi(0.999)), 1e-200);
}

TEST(BumpFamily, ScaledDerivativesAtCenter) {
  // The j-th radial derivative at a center is delta^{m-2-j+1/m} chi^{(j)}(0).
  for (int m : {3, 5}) {
    for (double delta : {0.1, 0.05}) {
      const ChartPoint c{0.2, -0.1};
      const BumpFamily b(flat(), m, delta, {c});
      const Jet<1, 6> t = Jet<1, 6>::variable(0.0);
      const Jet<1, 6> h = b(c.x + t, Jet<1, 6>(c.y));
      const double expect = std::pow(delta, m - 2 - (m - 1) + 1.0 / m) * -1.0;
      EXPECT_NEAR(factorial(m - 1) * h.coeff(m - 1), expect, 1e-10 * std::abs(expect));
      EXPECT_NEAR(h.coeff(0), 0.0, 1e-15);
    }
  }
}

TEST(BumpFamily, RejectsBadInput) {
  EXPECT_THROW(BumpFamily(flat(), 4, 0.1, {{0.0, 0.0}}), std::invalid_argument);
  EXPECT_THROW(BumpFamily(flat(), 1, 0.1, {{0.0, 0.0}}), std::invalid_argument);
  EXPECT_THROW(BumpFamily(flat(), 3, 0.1, {{0.0, 0.0}, {0.15, 0.0}}), std::invalid_argument);
  EXPECT_THROW(BumpFamily(flat(), 3, 0.1, {{0.95, 0.0}}), std::invalid_argument);
  EXPECT_THROW(BumpFamily(flat(), 3, 0.1, {{0.0, 0.0}}, 0.95), std::invalid_argument);
  const Metric bumpy = Metric::conformal_disk([](const auto& x, const auto&) { return 0.1 * x; });
  EXPECT_THROW(BumpFamily(bumpy, 3, 0.1, {{0.0, 0.0}}), std::invalid_argument);
  EXPECT_NO_THROW(BumpFamily(flat(), 3, 0.1, {{0.0, 0.0}, {0.25, 0.0}}));
}

TEST(BumpFamily, DisjointSupportsAdd) {
  const BumpFamily two(flat(), 3, 0.1, {{0.0, 0.0}, {0.3, 0.0}});
  const BumpFamily one(flat(), 3, 0.1, {{0.3, 0.0}});
  for (const ChartPoint p : {ChartPoint{0.32, 0.01}, ChartPoint{0.01, 0.02}, ChartPoint{0.5, 0.5}}) {
    const double sum = BumpFamily(flat(), 3, 0.1, {{0.0, 0.0}})(p.x, p.y) + one(p.x, p.y);
    EXPECT_DOUBLE_EQ(two(p.x, p.y), sum);
  }
}

TEST(BumpFamily, NormScalingSlopes) {
  for (int m : {3, 5}) {
    std::vector<double> deltas, lo, hi;
    for (int k = 3; k <= 7; ++k) {
      const double delta = std::ldexp(1.0, -k);
      const BumpFamily b(flat(), m, delta, {{0.0, 0.0}, {0.5, 0.0}});
      const auto pts = b.sample_points(24, 24);
      deltas.push_back(delta);
      lo.push_back(cm_norm(flat(), b, m - 2, pts, 24));
      hi.push_back(cm_norm(flat(), b, m - 1, pts, 24));
    }
    EXPECT_NEAR(loglog_slope(deltas, lo), 1.0 / m, 0.1) << m;
    EXPECT_NEAR(loglog_slope(deltas, hi), 1.0 / m - 1.0, 0.1) << m;
  }
}

TEST(LogLogSlope, ExactPowerLaw) {
  const std::vector<double> x{0.5, 0.25, 0.125};
  EXPECT_NEAR(loglog_slope(x, {std::pow(0.5, 1.5), std::pow(0.25, 1.5), std::pow(0.125, 1.5)}), 1.5, 1e-13);
}
