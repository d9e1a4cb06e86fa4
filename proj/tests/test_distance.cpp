#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "anosov/distance.hpp"
#include "anosov/pullback.hpp"
#include "anosov/random.hpp"

using namespace anosov;

namespace {

Metric cosh_annulus() {
  return WarpedMetric{Profile::from_callable([](const auto& t) {
                        using std::cosh;
                        return cosh(t);
                      }),
                      -1.0, 1.0}
      .metric("cosh annulus");
}

Metric bumpy_disk() {
  return Metric::conformal_disk([](const auto& x, const auto& y) { return 0.15 * x * x - 0.1 * x * y + 0.05 * y; });
}

}  // namespace

TEST(Distance, FlatDiskChords) {
  const Metric disk = Metric::euclidean_disk();
  for (double sy : {0.4, 1.7, 3.0, 4.4, 6.0}) {
    const DistanceSample d = marked_distance(disk, {0, 0.9}, {0, sy}, MarkedClass::trivial());
    ASSERT_TRUE(d.ok()) << d.error;
    EXPECT_NEAR(d.length, 2.0 * std::sin(0.5 * std::abs(sy - 0.9)), 1e-8);
    EXPECT_LE(d.residual, 1e-10);
    const DistanceSample r = marked_distance(disk, {0, sy}, {0, 0.9}, MarkedClass::trivial());
    EXPECT_NEAR(r.length, d.length, 1e-9);
    EXPECT_NEAR(r.shooting_angle, -d.shooting_angle, 1e-7);
  }
  EXPECT_THROW(marked_distance(disk, {0, 1.0}, {0, 1.0}, MarkedClass::trivial()), std::invalid_argument);
  EXPECT_THROW(marked_distance(disk, {0, 1.0}, {0, 2.0}, MarkedClass::winding(1)), std::invalid_argument);
}

TEST(Distance, TableMatchesSingles) {
  const Metric m = bumpy_disk();
  const BoundaryCurve c(m, 0);
  std::vector<DistanceQuery> q;
  for (int i = 0; i < 3; ++i)
    for (int j = 1; j < 4; ++j) q.emplace_back(BoundaryPoint{0, 0.3 + i}, BoundaryPoint{0, c.wrap(0.3 + i + 1.3 * j)},
                                               MarkedClass::trivial());
  const auto t1 = distance_table(m, q, {}, 1);
  const auto t2 = distance_table(m, q, {}, 3);
  for (std::size_t i = 0; i < q.size(); ++i) {
    ASSERT_TRUE(t1[i].ok()) << t1[i].error;
    EXPECT_EQ(t1[i].length, t2[i].length);
    const auto single = marked_distance(m, std::get<0>(q[i]), std::get<1>(q[i]), MarkedClass::trivial());
    EXPECT_NEAR(single.length, t1[i].length, 1e-12);
  }
}

TEST(Distance, ClairautAgreesWithShooting) {
  const Metric m = cosh_annulus();
  DistanceOptions shoot;
  shoot.method = DistanceMethod::Shooting;
  shoot.scan = 4096;
  struct Case {
    BoundaryPoint x, y;
    int n;
  };
  const Case cases[] = {{{0, 0.5}, {0, 2.0}, 0}, {{0, 0.5}, {0, 2.0}, 1},  {{0, 0.5}, {0, 2.0}, -1},
                        {{0, 0.5}, {1, 3.0}, 0}, {{0, 0.5}, {1, 3.0}, 1},  {{1, 9.0}, {1, 0.2}, 1},
                        {{1, 1.0}, {0, 1.0}, 0}, {{0, 0.5}, {0, 0.5}, 1}};
  for (const auto& c : cases) {
    const auto a = marked_distance(m, c.x, c.y, MarkedClass::winding(c.n));
    const auto b = marked_distance(m, c.x, c.y, MarkedClass::winding(c.n), shoot);
    ASSERT_TRUE(a.ok()) << a.error;
    ASSERT_TRUE(b.ok()) << b.error;
    EXPECT_EQ(a.method, "clairaut");
    EXPECT_NEAR(a.length, b.length, 1e-7) << c.n;
    EXPECT_NEAR(a.shooting_angle, b.shooting_angle, 1e-6) << c.n;
  }
  // Radial segment.
  const auto radial = marked_distance(m, {0, 1.0}, {1, 1.0}, MarkedClass::winding(0));
  EXPECT_NEAR(radial.length, 2.0, 1e-12);
}

TEST(Distance, ReversalInvertsClass) {
  const Metric m = cosh_annulus();
  for (int n : {0, 1, 3}) {
    const auto a = marked_distance(m, {0, 0.7}, {0, 5.1}, MarkedClass::winding(n));
    const auto b = marked_distance(m, {0, 5.1}, {0, 0.7}, MarkedClass::winding(-n));
    EXPECT_NEAR(a.length, b.length, 1e-9);
  }
}

TEST(Distance, WindingSweepApproachesCore) {
  const Metric m = cosh_annulus();
  const double Lc = 2 * std::numbers::pi;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 20; ++n) {
    const auto d = marked_distance(m, {0, 0.0}, {0, 0.0}, MarkedClass::winding(n));
    ASSERT_TRUE(d.ok()) << n << ": " << d.error;
    const double gap = std::abs(d.length / n - Lc);
    EXPECT_LT(gap, prev);
    prev = gap;
    EXPECT_GE(d.length, n * Lc);
    EXPECT_LE(d.length, n * Lc + 2.0);
  }
  EXPECT_LE(prev, 2e-2 * Lc);
}

TEST(Pullback, DistancesAndLensInvariant) {
  const Metric g = bumpy_disk();
  const Metric h = pullback(g, Diffeomorphism::disk_twist(0.8));
  EXPECT_LT(boundary_metric_gap(g, h), 1e-12);
  for (double sy : {1.1, 2.9, 4.5}) {
    const auto a = marked_distance(g, {0, 0.2}, {0, sy}, MarkedClass::trivial());
    const auto b = marked_distance(h, {0, 0.2}, {0, sy}, MarkedClass::trivial());
    EXPECT_NEAR(a.length, b.length, 1e-8);
  }
  std::vector<BoundaryEntry> samples;
  for (int i = 0; i < 40; ++i) {
    SplitMix64 r = SplitMix64::stream(5, i);
    samples.push_back({0, 2 * std::numbers::pi * r.uniform(), std::asin(2 * r.uniform() - 1)});
  }
  const LensComparison rep = lens_compare(g, h, samples);
  EXPECT_EQ(rep.trapped_mismatch, 0);
  EXPECT_EQ(rep.class_mismatch, 0);
  EXPECT_LT(rep.sup(), 1e-7);
  EXPECT_TRUE(rep.to_json().contains("per_class"));

  const Metric other = Metric::conformal_disk([](const auto& x, const auto&) { return 0.1 * x; });
  EXPECT_THROW(lens_compare(g, other, samples), std::invalid_argument);
}

TEST(Pullback, CollarTwistLens) {
  const Metric g = cosh_annulus();
  const Metric h = pullback(g, Diffeomorphism::collar_twist(0.5, -1.0, 1.0));
  std::vector<BoundaryEntry> samples;
  for (int i = 0; i < 30; ++i) samples.push_back({i % 2, 0.3 * i, -1.2 + 0.08 * i});
  const LensComparison rep = lens_compare(g, h, samples, {}, 50.0);
  EXPECT_EQ(rep.trapped_mismatch, 0);
  EXPECT_LT(rep.sup(), 1e-7);
  EXPECT_FALSE(rep.per_class.empty());
}

TEST(Pullback, RejectsMapsMovingTheBoundary) {
  const auto shift = Diffeomorphism::from_callable(
      [](const auto& x, const auto& y) { return MapValue<std::decay_t<decltype(x)>>{0.9 * x, 0.9 * y}; });
  EXPECT_THROW(pullback(Metric::euclidean_disk(), shift), GeometryError);
}

TEST(JetDifference, DetectsFirstDifferingOrder) {
  for (int k = 0; k < 3; ++k) {
    const Metric a = bumpy_disk();
    const Metric b = Metric::conformal_disk([k](const auto& x, const auto& y) {
      using T = std::decay_t<decltype(x)>;
      using std::log;
      T q = 1.0 - x * x - y * y;
      T p = q;
      for (int i = 0; i < k; ++i) p = p * q;
      return 0.15 * x * x - 0.1 * x * y + 0.05 * y + 0.5 * log(1.0 + 0.3 * p);
    });
    const auto rows = jet_difference(a, b, k + 1);
    for (const auto& r : rows) {
      if (r.order <= k) {
        EXPECT_LT(r.max_abs, 1e-12) << k << " " << r.order;
      } else {
        EXPECT_GT(r.max_abs, 1e-2) << k << " " << r.order;
      }
    }
  }
  EXPECT_THROW(jet_difference(bumpy_disk(), bumpy_disk(), 7), OrderError);
}
