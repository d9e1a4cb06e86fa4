#pragma once

// Covariant C^m norms. The j-th covariant derivative in a direction X is the
// j-th t-derivative of f along the geodesic with initial velocity X, so the
// norm is the largest such derivative over sample points and unit directions.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "anosov/grid.hpp"
#include "anosov/jet.hpp"
#include "anosov/metric.hpp"

namespace anosov {

namespace detail {

/// P(p + (dx, dy)) as a univariate jet; dx and dy have zero constant term.
template <int M, int N>
Jet<1, N> compose_path(const Jet<2, M>& P, const Jet<1, N>& dx, const Jet<1, N>& dy) {
  constexpr int K = M < N ? M : N;
  std::array<Jet<1, N>, K + 1> px, py;
  px[0] = Jet<1, N>(1.0);
  py[0] = Jet<1, N>(1.0);
  for (int k = 1; k <= K; ++k) {
    px[k] = px[k - 1] * dx;
    py[k] = py[k - 1] * dy;
  }
  Jet<1, N> r(0.0);
  for (int d = 0; d <= K; ++d)
    for (int b = 0; b <= d; ++b) {
      const double c = P.coeff(d - b, b);
      if (c != 0.0) r += (px[d - b] * py[b]) * c;
    }
  return r;
}

}  // namespace detail

/// Taylor expansion to order N of the geodesic through p with velocity X.
template <int N>
std::array<Jet<1, N>, 2> geodesic_jet(const Metric& m, ChartPoint p, const Eigen::Vector2d& X,
                                      Side side = Side::Auto) {
  static_assert(N >= 1 && N <= kMaxMetricOrder + 1);
  std::array<Jet<1, N>, 2> x;
  x[0] = Jet<1, N>(p.x);
  x[1] = Jet<1, N>(p.y);
  x[0].coeff_ref(1) = X[0];
  x[1].coeff_ref(1) = X[1];
  if constexpr (N >= 2) {
    constexpr int M = N - 1;
    const auto G = m.jet<M>(p, side);
    const Jet<2, M>* comp[3] = {&G.g11, &G.g12, &G.g22};
    std::array<Jet<2, M - 1>, 3> dgx, dgy;
    for (int e = 0; e < 3; ++e) {
      dgx[e] = partial(*comp[e], 0);
      dgy[e] = partial(*comp[e], 1);
    }
    for (int iter = 0; iter < N - 1; ++iter) {
      Jet<1, N> dx = x[0], dy = x[1];
      dx.coeff_ref(0) = 0.0;
      dy.coeff_ref(0) = 0.0;
      std::array<Jet<1, N>, 3> g, gx, gy;
      for (int e = 0; e < 3; ++e) {
        g[e] = detail::compose_path(*comp[e], dx, dy);
        gx[e] = detail::compose_path(dgx[e], dx, dy);
        gy[e] = detail::compose_path(dgy[e], dx, dy);
      }
      const Jet<1, N> det = g[0] * g[2] - g[1] * g[1];
      const Jet<1, N> rdet = reciprocal(det);
      const Jet<1, N> inv[2][2] = {{g[2] * rdet, -g[1] * rdet}, {-g[1] * rdet, g[0] * rdet}};
      auto comp_of = [&](int i, int j) { return i == j ? (i == 0 ? 0 : 2) : 1; };
      auto dg = [&](int l, int i, int j) -> const Jet<1, N>& { return l == 0 ? gx[comp_of(i, j)] : gy[comp_of(i, j)]; };
      Jet<1, N> v[2];
      for (int a = 0; a < 2; ++a) {
        v[a] = Jet<1, N>(0.0);
        for (int k = 1; k <= N; ++k) v[a].coeff_ref(k - 1) = k * x[a].coeff(k);
      }
      // first-kind symbols contracted with v: c_l = sum_ij [ij, l] v^i v^j
      Jet<1, N> c[2];
      for (int l = 0; l < 2; ++l) {
        c[l] = Jet<1, N>(0.0);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) c[l] += 0.5 * (dg(i, l, j) + dg(j, l, i) - dg(l, i, j)) * v[i] * v[j];
      }
      for (int a = 0; a < 2; ++a) {
        const Jet<1, N> acc = -(inv[a][0] * c[0] + inv[a][1] * c[1]);
        for (int k = 0; k + 2 <= N; ++k) x[a].coeff_ref(k + 2) = acc.coeff(k) / ((k + 1.0) * (k + 2.0));
      }
    }
  }
  return x;
}

/// Finite-difference weights at x0 for derivative orders 0..max_order on the
/// given nodes (Fornberg's recursion).
inline std::vector<std::vector<double>> fornberg_weights(const std::vector<double>& nodes, double x0, int max_order) {
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<double>> c(static_cast<std::size_t>(max_order) + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

namespace detail {

/// Unit directions (under g at p) spaced uniformly in a g-orthonormal frame.
inline std::vector<Eigen::Vector2d> unit_directions(const Eigen::Matrix2d& g, int count) {
  const Eigen::Matrix2d L = g.llt().matrixL();
  const Eigen::Matrix2d Linv_t = L.transpose().inverse();
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double a = 2.0 * std::numbers::pi * k / count;
    out.push_back(Linv_t * Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  return out;
}

template <int N, class F>
double cm_norm_fixed(const Metric& m, F& field, const std::vector<ChartPoint>& points, int directions, int order) {
  double best = 0.0;
  for (const ChartPoint& p : points) {
    best = std::max(best, std::abs(value_of(field(p.x, p.y))));
    if (order == 0) continue;
    for (const auto& X : unit_directions(m.at(p), directions)) {
      const auto path = geodesic_jet<N>(m, p, X);
      const Jet<1, N> f = field(path[0], path[1]);
      double fact = 1.0;
      for (int j = 1; j <= order; ++j) {
        fact *= j;
        best = std::max(best, std::abs(fact * f.coeff(j)));
      }
    }
  }
  return best;
}

}  // namespace detail

/// C^m norm of an analytic field (generic callable (x, y) -> T) over sample
/// points, using exact geodesic and field jets. Supports m <= 5.
template <class F>
double cm_norm(const Metric& m, F&& field, int order, const std::vector<ChartPoint>& points, int directions = 64) {
  if (order < 0 || order > kMaxMetricOrder + 1) throw OrderError(order, kMaxMetricOrder + 1);
  switch (order) {
    case 0:
    case 1: return detail::cm_norm_fixed<1>(m, field, points, directions, order);
    case 2: return detail::cm_norm_fixed<2>(m, field, points, directions, order);
    case 3: return detail::cm_norm_fixed<3>(m, field, points, directions, order);
    case 4: return detail::cm_norm_fixed<4>(m, field, points, directions, order);
    default: return detail::cm_norm_fixed<5>(m, field, points, directions, order);
  }
}

/// C^m norm (m <= 2) of a grid field. Rays are the second-order geodesic
/// expansions at each node; the field is interpolated along the ray and
/// differentiated with a 9-point stencil of spacing `step` (default: the
/// coarsest physical grid spacing). Stencils are shifted to stay in the chart.
inline double cm_norm(const GridMetric& gm, const GridField& f, int order, int directions = 64, double step = 0.0) {
  if (order < 0 || order > 2) throw OrderError(order, 2);
  if (!gm.source()) throw std::invalid_argument("grid norm needs the metric the grid was sampled from");
  const Metric& m = *gm.source();
  double best = GridMetric::sup(f);
  if (order == 0) return best;
  if (step <= 0.0) {
    const double ang = std::sqrt(gm.g22().maxCoeff()) * gm.hphi();
    step = std::max(gm.hu() * std::sqrt(gm.g11().maxCoeff()), ang);
  }
  std::vector<std::vector<std::vector<double>>> weights;
  for (int k0 = -8; k0 <= 0; ++k0) {
    std::vector<double> nodes;
    for (int k = 0; k < 9; ++k) nodes.push_back(k0 + k);
    weights.push_back(fornberg_weights(nodes, 0.0, 2));
  }
  const int order_pref[9] = {-4, -3, -5, -2, -6, -1, -7, 0, -8};
  const Chart& chart = m.chart();
  std::array<double, 9> vals{};
  for (int i = 0; i < gm.nu(); ++i)
    for (int j = 0; j < gm.nphi(); ++j) {
      const ChartPoint p = gm.chart_point(i, j);
      const Side side = gm.boundary(i) ? (gm.kind() == GridKind::Collar && i == 0 ? Side::Right : Side::Left)
                                       : Side::Auto;
      const Christoffel c = christoffel_from(m.jet<1>(p, side));
      for (const auto& X : detail::unit_directions(m.at(p, side), directions)) {
        Eigen::Vector2d a;
        for (int k = 0; k < 2; ++k) {
          a[k] = 0.0;
          for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s) a[k] -= c(k, r, s) * X[r] * X[s];
        }
        auto at = [&](double t) {
          return ChartPoint{p.x + t * X[0] + 0.5 * t * t * a[0], p.y + t * X[1] + 0.5 * t * t * a[1]};
        };
        int chosen = 99;
        for (int k0 : order_pref) {
          bool ok = true;
          for (int k = 0; k < 9 && ok; ++k) ok = chart.inside(at((k0 + k) * step)) >= -1e-12;
          if (ok) {
            chosen = k0;
            break;
          }
        }
        if (chosen == 99) continue;
        for (int k = 0; k < 9; ++k) vals[k] = gm.interpolate(f, at((chosen + k) * step));
        const auto& w = weights[static_cast<std::size_t>(chosen + 8)];
        for (int d = 1; d <= order; ++d) {
          double s = 0.0;
          for (int k = 0; k < 9; ++k) s += w[d][k] * vals[k];
          best = std::max(best, std::abs(s) / std::pow(step, d));
        }
      }
    }
  return best;
}

}  // namespace anosov
