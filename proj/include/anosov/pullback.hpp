#pragma once

// Boundary-fixing chart self-maps, pulled-back metrics and boundary jet
// comparison between two metrics on the same chart.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "anosov/metric.hpp"

namespace anosov {

template <class T>
struct MapValue {
  T x{};
  T y{};
};

class DiffeoModel {
 public:
  virtual ~DiffeoModel() = default;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 0>>& out) const = 0;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 1>>& out) const = 0;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 2>>& out) const = 0;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 3>>& out) const = 0;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 4>>& out) const = 0;
  virtual void eval(ChartPoint p, MapValue<Jet<2, 5>>& out) const = 0;
};

namespace detail {

template <class F>
class CallableDiffeo final : public DiffeoModel {
 public:
  explicit CallableDiffeo(F f) : f_(std::move(f)) {}
  void eval(ChartPoint p, MapValue<Jet<2, 0>>& out) const override { out = local<0>(p); }
  void eval(ChartPoint p, MapValue<Jet<2, 1>>& out) const override { out = local<1>(p); }
  void eval(ChartPoint p, MapValue<Jet<2, 2>>& out) const override { out = local<2>(p); }
  void eval(ChartPoint p, MapValue<Jet<2, 3>>& out) const override { out = local<3>(p); }
  void eval(ChartPoint p, MapValue<Jet<2, 4>>& out) const override { out = local<4>(p); }
  void eval(ChartPoint p, MapValue<Jet<2, 5>>& out) const override { out = local<5>(p); }

 private:
  template <int N>
  MapValue<Jet<2, N>> local(ChartPoint p) const {
    using J = Jet<2, N>;
    return f_(J::variable(p.x, 0), J::variable(p.y, 1));
  }
  F f_;
};

}  // namespace detail

/// Smooth chart self-map given by a generic callable (x, y) -> MapValue<T>.
class Diffeomorphism {
 public:
  template <class F>
  static Diffeomorphism from_callable(F f, std::string name = "map") {
    Diffeomorphism d;
    d.model_ = std::make_shared<detail::CallableDiffeo<F>>(std::move(f));
    d.name_ = std::move(name);
    return d;
  }

  static Diffeomorphism identity() {
    return from_callable([](const auto& x, const auto& y) { return MapValue<std::decay_t<decltype(x)>>{x, y}; },
                         "identity");
  }

  /// Disk twist (r, phi) -> (r, phi + a (1 - r^2/R^2)^2); identity with identity
  /// differential on the boundary circle.
  static Diffeomorphism disk_twist(double a, double radius = 1.0) {
    return from_callable(
        [a, radius](const auto& x, const auto& y) {
          using T = std::decay_t<decltype(x)>;
          using std::cos;
          using std::sin;
          const T q = 1.0 - (x * x + y * y) / (radius * radius);
          const T w = a * q * q;
          const T c = cos(w), s = sin(w);
          return MapValue<T>{c * x - s * y, s * x + c * y};
        },
        "disk twist");
  }

  /// Collar twist (t, theta) -> (t, theta + a (t - t0)^2 (t - t1)^2 scaled to unit peak).
  static Diffeomorphism collar_twist(double a, double t_min, double t_max) {
    const double mid = 0.5 * (t_max - t_min);
    const double scale = 1.0 / (mid * mid * mid * mid);
    return from_callable(
        [a, t_min, t_max, scale](const auto& t, const auto& th) {
          using T = std::decay_t<decltype(t)>;
          const T q = (t - t_min) * (t - t_max);
          return MapValue<T>{t, th + a * scale * q * q};
        },
        "collar twist");
  }

  template <int N>
  MapValue<Jet<2, N>> jet(ChartPoint p) const {
    static_assert(N <= 5, "map jets are available up to order 5");
    MapValue<Jet<2, N>> out;
    model_->eval(p, out);
    return out;
  }

  ChartPoint operator()(ChartPoint p) const {
    const auto v = jet<0>(p);
    return {v.x.value(), v.y.value()};
  }

  Eigen::Matrix2d jacobian(ChartPoint p) const {
    const auto v = jet<1>(p);
    Eigen::Matrix2d J;
    J << v.x.d(1, 0), v.x.d(0, 1), v.y.d(1, 0), v.y.d(0, 1);
    return J;
  }

  const std::string& name() const { return name_; }

 private:
  std::shared_ptr<const DiffeoModel> model_;
  std::string name_;
};

namespace detail {

class PullbackModel final : public MetricModelBase<PullbackModel> {
 public:
  PullbackModel(Metric g, Diffeomorphism phi) : g_(std::move(g)), phi_(std::move(phi)) {}
  int max_order() const override { return std::min(g_.max_order(), 4); }

  template <int N>
  SymTensor<Jet<2, N>> local(ChartPoint p, Side side) const {
    using J = Jet<2, N>;
    const auto map = phi_.jet<N + 1>(p);
    const ChartPoint q{map.x.value(), map.y.value()};
    const auto G = g_.jet<N>(q, side);
    J du = truncate<N>(map.x), dv = truncate<N>(map.y);
    du.coeff_ref(0, 0) = 0.0;
    dv.coeff_ref(0, 0) = 0.0;
    const J G11 = compose2(G.g11, du, dv), G12 = compose2(G.g12, du, dv), G22 = compose2(G.g22, du, dv);
    const J ux = partial(map.x, 0), uy = partial(map.x, 1), vx = partial(map.y, 0), vy = partial(map.y, 1);
    return {ux * ux * G11 + 2.0 * ux * vx * G12 + vx * vx * G22,
            ux * uy * G11 + (ux * vy + uy * vx) * G12 + vx * vy * G22,
            uy * uy * G11 + 2.0 * uy * vy * G12 + vy * vy * G22};
  }

 private:
  Metric g_;
  Diffeomorphism phi_;
};

}  // namespace detail

/// phi^* g with components D phi^T (g o phi) D phi. Verifies that phi fixes the
/// boundary pointwise and that its Jacobian is nonsingular on a sample grid.
inline Metric pullback(const Metric& g, const Diffeomorphism& phi, int check_nodes = 48) {
  const Chart& c = g.chart();
  for (int comp = 0; comp < c.components(); ++comp) {
    for (int i = 0; i < 256; ++i) {
      const double u = 2.0 * std::numbers::pi * i / 256;
      ChartPoint p;
      if (c.kind == ChartKind::Disk) {
        p = {c.radius * std::cos(u), c.radius * std::sin(u)};
      } else {
        p = {comp == 0 ? c.t_min : c.t_max, c.period * i / 256};
      }
      const ChartPoint q = phi(p);
      double dy = q.y - p.y;
      if (c.kind == ChartKind::Collar) dy = std::remainder(dy, c.period);
      if (std::hypot(q.x - p.x, dy) > 1e-10) throw GeometryError("map does not fix the boundary");
    }
  }
  double sign = 0.0;
  for (int i = 0; i <= check_nodes; ++i) {
    for (int j = 0; j <= check_nodes; ++j) {
      ChartPoint p;
      if (c.kind == ChartKind::Disk) {
        p = {c.radius * (2.0 * i / check_nodes - 1.0), c.radius * (2.0 * j / check_nodes - 1.0)};
        if (c.inside(p) < 0.0) continue;
      } else {
        p = {c.t_min + (c.t_max - c.t_min) * i / check_nodes, c.period * j / check_nodes};
      }
      const double det = phi.jacobian(p).determinant();
      if (!(std::abs(det) > 1e-12) || (sign != 0.0 && det * sign < 0.0))
        throw GeometryError("Jacobian singular at node (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
      sign = det > 0.0 ? 1.0 : -1.0;
    }
  }
  return Metric(c, std::make_shared<detail::PullbackModel>(g, phi), "pullback of " + g.name());
}

struct JetDifferenceRow {
  int component = 0;
  int order = 0;
  double max_abs = 0.0;  // max over boundary nodes and components g_ij
};

namespace detail {

template <int N>
void boundary_jet_gap(const Metric& a, const Metric& b, int comp, int nodes, std::vector<double>& worst) {
  const Chart& c = a.chart();
  const Side side = c.kind == ChartKind::Disk ? Side::Left : (comp == 0 ? Side::Right : Side::Left);
  for (int i = 0; i < nodes; ++i) {
    ChartPoint p;
    Eigen::Vector2d n;  // unit chart direction pointing into the surface
    const double u = 2.0 * std::numbers::pi * i / nodes;
    if (c.kind == ChartKind::Disk) {
      p = {c.radius * std::cos(u), c.radius * std::sin(u)};
      n = {-std::cos(u), -std::sin(u)};
    } else {
      p = {comp == 0 ? c.t_min : c.t_max, c.period * i / nodes};
      n = {comp == 0 ? 1.0 : -1.0, 0.0};
    }
    const auto ga = a.jet<N>(p, side);
    const auto gb = b.jet<N>(p, side);
    const Jet<2, N>* da[3] = {&ga.g11, &ga.g12, &ga.g22};
    const Jet<2, N>* db[3] = {&gb.g11, &gb.g12, &gb.g22};
    double fact = 1.0;
    for (int j = 0; j <= N; ++j) {
      if (j > 1) fact *= j;
      for (int e = 0; e < 3; ++e) {
        // tau^j coefficient of (g_a - g_b)(p + tau n)
        double s = 0.0;
        for (int bb = 0; bb <= j; ++bb)
          s += (da[e]->coeff(j - bb, bb) - db[e]->coeff(j - bb, bb)) * std::pow(n[0], j - bb) * std::pow(n[1], bb);
        worst[j] = std::max(worst[j], std::abs(s * fact));
      }
    }
  }
}

}  // namespace detail

/// Max over boundary nodes of |d_nu^j (g1 - g2)_ij| for j = 0..k, per component.
inline std::vector<JetDifferenceRow> jet_difference(const Metric& a, const Metric& b, int k, int nodes = 128) {
  if (!a.chart().same_as(b.chart())) throw std::invalid_argument("metrics live on different charts");
  const int available = std::min({kMaxMetricOrder, a.max_order(), b.max_order()});
  if (k < 0 || k > available) throw OrderError(k, available);
  std::vector<JetDifferenceRow> rows;
  for (int comp = 0; comp < a.chart().components(); ++comp) {
    std::vector<double> worst(static_cast<std::size_t>(k) + 1, 0.0);
    switch (k) {
      case 0: detail::boundary_jet_gap<0>(a, b, comp, nodes, worst); break;
      case 1: detail::boundary_jet_gap<1>(a, b, comp, nodes, worst); break;
      case 2: detail::boundary_jet_gap<2>(a, b, comp, nodes, worst); break;
      case 3: detail::boundary_jet_gap<3>(a, b, comp, nodes, worst); break;
      default: detail::boundary_jet_gap<4>(a, b, comp, nodes, worst); break;
    }
    for (int j = 0; j <= k; ++j) rows.push_back({comp, j, worst[j]});
  }
  return rows;
}

}  // namespace anosov
