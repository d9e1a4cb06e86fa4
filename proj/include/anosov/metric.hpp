#pragma once

// Riemannian metrics on 2D charts with boundary.
//
// Two chart families are supported: a disk {x^2 + y^2 <= R^2} in Cartesian
// coordinates and a collar [t_min, t_max] x (R / period Z) in coordinates
// (t, theta). A Metric is an immutable, type-erased object that returns the
// components g_ij and their partial derivatives (as jets) at chart points.
// WarpedMetric builds the collar metric dt^2 + f(t)^2 dtheta^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "anosov/jet.hpp"
#include "anosov/profile.hpp"

namespace anosov {

struct ChartPoint {
  double x = 0.0;
  double y = 0.0;
};

template <class T>
struct SymTensor {
  T g11{};
  T g12{};
  T g22{};
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChartKind { Disk, Collar };

struct Chart {
  ChartKind kind = ChartKind::Disk;
  double radius = 1.0;
  double t_min = 0.0;
  double t_max = 1.0;
  double period = 2.0 * std::numbers::pi;

  static Chart disk(double radius = 1.0) { return {ChartKind::Disk, radius}; }
  static Chart collar(double t_min, double t_max, double period = 2.0 * std::numbers::pi) {
    if (!(t_max > t_min)) throw std::invalid_argument("collar chart needs t_min < t_max");
    if (!(period > 0.0)) throw std::invalid_argument("collar chart needs a positive period");
    return {ChartKind::Collar, 1.0, t_min, t_max, period};
  }

  /// Positive in the interior, zero on the boundary, negative outside.
  double inside(ChartPoint p) const {
    if (kind == ChartKind::Disk) return radius - std::hypot(p.x, p.y);
    return std::min(p.x - t_min, t_max - p.x);
  }
  int components() const { return kind == ChartKind::Disk ? 1 : 2; }
  int nearest_component(ChartPoint p) const {
    if (kind == ChartKind::Disk) return 0;
    return (p.x - t_min) < (t_max - p.x) ? 0 : 1;
  }
  bool same_as(const Chart& o, double tol = 1e-12) const {
    if (kind != o.kind) return false;
    if (kind == ChartKind::Disk) return std::abs(radius - o.radius) <= tol;
    return std::abs(t_min - o.t_min) <= tol && std::abs(t_max - o.t_max) <= tol && std::abs(period - o.period) <= tol;
  }
};

inline constexpr int kMaxMetricOrder = 4;

class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual int max_order() const = 0;
  virtual void eval(ChartPoint p, Side s, SymTensor<Jet<2, 0>>& out) const = 0;
  virtual void eval(ChartPoint p, Side s, SymTensor<Jet<2, 1>>& out) const = 0;
  virtual void eval(ChartPoint p, Side s, SymTensor<Jet<2, 2>>& out) const = 0;
  virtual void eval(ChartPoint p, Side s, SymTensor<Jet<2, 3>>& out) const = 0;
  virtual void eval(ChartPoint p, Side s, SymTensor<Jet<2, 4>>& out) const = 0;
};

namespace detail {

/// Implements every eval overload through Derived::template local<N>(p, side).
template <class Derived>
class MetricModelBase : public MetricModel {
 public:
  void eval(ChartPoint p, Side s, SymTensor<Jet<2, 0>>& out) const override { out = self().template local<0>(p, s); }
  void eval(ChartPoint p, Side s, SymTensor<Jet<2, 1>>& out) const override { out = self().template local<1>(p, s); }
  void eval(ChartPoint p, Side s, SymTensor<Jet<2, 2>>& out) const override { out = self().template local<2>(p, s); }
  void eval(ChartPoint p, Side s, SymTensor<Jet<2, 3>>& out) const override { out = self().template local<3>(p, s); }
  void eval(ChartPoint p, Side s, SymTensor<Jet<2, 4>>& out) const override { out = self().template local<4>(p, s); }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

template <class F>
class CallableMetric final : public MetricModelBase<CallableMetric<F>> {
 public:
  explicit CallableMetric(F f) : f_(std::move(f)) {}
  int max_order() const override { return kMaxMetricOrder; }
  template <int N>
  SymTensor<Jet<2, N>> local(ChartPoint p, Side) const {
    using J = Jet<2, N>;
    return f_(J::variable(p.x, 0), J::variable(p.y, 1));
  }

 private:
  F f_;
};

class WarpedModel final : public MetricModelBase<WarpedModel> {
 public:
  explicit WarpedModel(Profile f) : f_(std::move(f)) {}
  int max_order() const override { return std::min(kMaxMetricOrder, f_.max_order()); }
  template <int N>
  SymTensor<Jet<2, N>> local(ChartPoint p, Side side) const {
    using J = Jet<2, N>;
    const J ft = f_(J::variable(p.x, 0), side);
    return {J(1.0), J(0.0), ft * ft};
  }

 private:
  Profile f_;
};

}  // namespace detail

/// Substitutes zero-constant jets (dx, dy) into the bivariate polynomial P.
template <int N>
Jet<2, N> compose2(const Jet<2, N>& P, const Jet<2, N>& dx, const Jet<2, N>& dy) {
  std::array<Jet<2, N>, N + 1> px, py;
  px[0] = Jet<2, N>(1.0);
  py[0] = Jet<2, N>(1.0);
  for (int k = 1; k <= N; ++k) {
    px[k] = px[k - 1] * dx;
    py[k] = py[k - 1] * dy;
  }
  Jet<2, N> r(0.0);
  for (int d = 0; d <= N; ++d)
    for (int b = 0; b <= d; ++b) {
      const double c = P.coeff(d - b, b);
      if (c != 0.0) r += (px[d - b] * py[b]) * c;
    }
  return r;
}

struct WarpedMetric;

class Metric {
 public:
  Metric() = default;
  Metric(Chart chart, std::shared_ptr<const MetricModel> model, std::string name = "metric")
      : chart_(chart), model_(std::move(model)), name_(std::move(name)) {}

  /// Components given by a generic callable (x, y) -> SymTensor<T>.
  template <class F>
  static Metric from_callable(Chart chart, F components, std::string name = "metric") {
    return Metric(chart, std::make_shared<detail::CallableMetric<F>>(std::move(components)), std::move(name));
  }

  template <class F>
  static Metric disk(F components, double radius = 1.0, std::string name = "disk") {
    return from_callable(Chart::disk(radius), std::move(components), std::move(name));
  }

  /// e^{2 phi(x, y)} (dx^2 + dy^2) on the disk of the given radius.
  template <class F>
  static Metric conformal_disk(F phi, double radius = 1.0, std::string name = "conformal disk") {
    auto comp = [phi](const auto& x, const auto& y) {
      using T = std::decay_t<decltype(x)>;
      using std::exp;
      const T w = exp(2.0 * phi(x, y));
      return SymTensor<T>{w, T(0.0), w};
    };
    return disk(comp, radius, std::move(name));
  }

  static Metric euclidean_disk(double radius = 1.0) {
    auto comp = [](const auto& x, const auto&) {
      using T = std::decay_t<decltype(x)>;
      return SymTensor<T>{T(1.0), T(0.0), T(1.0)};
    };
    Metric m = disk(comp, radius, "euclidean disk");
    m.euclidean_ = true;
    return m;
  }

  /// Round metric of curvature +1 in stereographic coordinates, scaled so that
  /// the unit disk covers a cap of polar angle 2 atan(c).
  static Metric spherical_cap(double c) {
    return conformal_disk(
        [c](const auto& x, const auto& y) {
          using std::log;
          return log(2.0 * c / (1.0 + c * c * (x * x + y * y)));
        },
        1.0, "spherical cap");
  }

  const Chart& chart() const { return chart_; }
  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(model_); }
  int max_order() const { return model_->max_order(); }
  bool is_euclidean() const { return euclidean_; }
  const WarpedMetric* warped() const { return warped_.get(); }
  const std::shared_ptr<const MetricModel>& model() const { return model_; }

  /// Components and partial derivatives up to order N at p.
  template <int N>
  SymTensor<Jet<2, N>> jet(ChartPoint p, Side side = Side::Auto) const {
    if (N > max_order()) throw OrderError(N, max_order());
    SymTensor<Jet<2, N>> out;
    model_->eval(p, side, out);
    return out;
  }

  Eigen::Matrix2d at(ChartPoint p, Side side = Side::Auto) const {
    const auto g = jet<0>(p, side);
    Eigen::Matrix2d m;
    m << g.g11.value(), g.g12.value(), g.g12.value(), g.g22.value();
    return m;
  }

  double norm(ChartPoint p, const Eigen::Vector2d& v) const { return std::sqrt(v.dot(at(p) * v)); }

  void set_warped(std::shared_ptr<const WarpedMetric> w) { warped_ = std::move(w); }

 private:
  Chart chart_;
  std::shared_ptr<const MetricModel> model_;
  std::string name_;
  bool euclidean_ = false;
  std::shared_ptr<const WarpedMetric> warped_;
};

/// dt^2 + f(t)^2 dtheta^2 on [t_min, t_max] x (R / period Z).
struct WarpedMetric {
  Profile profile;
  double t_min = 0.0;
  double t_max = 1.0;
  double period = 2.0 * std::numbers::pi;

  /// Checks f > 0 on a dense sample of [t_min, t_max].
  void validate(int samples = 1001) const {
    if (!profile.valid()) throw std::invalid_argument("warped metric without profile");
    if (!(t_max > t_min)) throw std::invalid_argument("warped metric needs t_min < t_max");
    for (int i = 0; i < samples; ++i) {
      const double t = t_min + (t_max - t_min) * i / (samples - 1);
      const double f = profile(t, i == 0 ? Side::Right : Side::Left);
      if (!(f > 0.0)) throw GeometryError("warped profile not positive at t = " + std::to_string(t));
    }
  }

  Metric metric(std::string name = "warped") const {
    validate();
    Metric m(Chart::collar(t_min, t_max, period), std::make_shared<detail::WarpedModel>(profile), std::move(name));
    m.set_warped(std::make_shared<WarpedMetric>(*this));
    return m;
  }

  double clairaut(double t, double theta_dot) const {
    const double f = profile(t);
    return f * f * theta_dot;
  }
};

/// Christoffel symbols Gamma^k_ij, indexed [k][i][j].
struct Christoffel {
  std::array<std::array<std::array<double, 2>, 2>, 2> gamma{};
  double operator()(int k, int i, int j) const { return gamma[k][i][j]; }
};

template <int N>
Christoffel christoffel_from(const SymTensor<Jet<2, N>>& g) {
  static_assert(N >= 1);
  const double E = g.g11.value(), F = g.g12.value(), G = g.g22.value();
  const double det = E * G - F * F;
  if (!(det > 0.0) || !(E > 0.0)) throw GeometryError("metric is not positive definite");
  const double inv[2][2] = {{G / det, -F / det}, {-F / det, E / det}};
  // dg[l][i][j] = d_l g_ij
  double dg[2][2][2];
  const Jet<2, N>* comp[2][2] = {{&g.g11, &g.g12}, {&g.g12, &g.g22}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      dg[0][i][j] = comp[i][j]->coeff(1, 0);
      dg[1][i][j] = comp[i][j]->coeff(0, 1);
    }
  Christoffel c;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int l = 0; l < 2; ++l) s += inv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
        c.gamma[k][i][j] = 0.5 * s;
      }
  return c;
}

/// Gaussian curvature by the Brioschi formula.
template <int N>
double gauss_curvature_from(const SymTensor<Jet<2, N>>& g) {
  static_assert(N >= 2);
  const auto& e = g.g11;
  const auto& f = g.g12;
  const auto& h = g.g22;
  const double E = e.value(), F = f.value(), G = h.value();
  const double Eu = e.d(1, 0), Ev = e.d(0, 1), Fu = f.d(1, 0), Fv = f.d(0, 1), Gu = h.d(1, 0), Gv = h.d(0, 1);
  const double Evv = e.d(0, 2), Fuv = f.d(1, 1), Guu = h.d(2, 0);
  Eigen::Matrix3d A, B;
  A << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,  //
      Fv - 0.5 * Gu, E, F,                                     //
      0.5 * Gv, F, G;
  B << 0.0, 0.5 * Ev, 0.5 * Gu,  //
      0.5 * Ev, E, F,            //
      0.5 * Gu, F, G;
  const double det = E * G - F * F;
  if (!(det > 0.0)) throw GeometryError("metric is not positive definite");
  return (A.determinant() - B.determinant()) / (det * det);
}

namespace detail {
inline void require_in_chart(const Metric& m, ChartPoint p) {
  if (m.chart().inside(p) < -1e-9) throw GeometryError("point outside chart");
}
}  // namespace detail

inline Christoffel christoffel(const Metric& m, ChartPoint p, Side side = Side::Auto) {
  detail::require_in_chart(m, p);
  return christoffel_from(m.jet<1>(p, side));
}

inline double gauss_curvature(const Metric& m, ChartPoint p, Side side = Side::Auto) {
  detail::require_in_chart(m, p);
  return gauss_curvature_from(m.jet<2>(p, side));
}

inline double scalar_curvature(const Metric& m, ChartPoint p, Side side = Side::Auto) {
  return 2.0 * gauss_curvature(m, p, side);
}

/// Scalar curvature of e^{2f} g in dimension n from s_g, Delta_g f and |df|_g^2
/// (geometers' sign convention, Delta_g <= 0).
inline double conformal_scalar_curvature(double s_g, double f, double laplacian_f, double grad_f_sq, int n) {
  if (n < 2) throw std::invalid_argument("dimension must be at least 2");
  return std::exp(-2.0 * f) *
         (s_g - 2.0 * (n - 1) * laplacian_f - static_cast<double>((n - 2) * (n - 1)) * grad_f_sq);
}

/// Laplace-Beltrami operator of a generic scalar callable f(x, y) at p:
/// g^{ij} (d_ij f - Gamma^k_ij d_k f).
template <class F>
double laplacian(const Metric& m, const F& f, ChartPoint p) {
  using J = Jet<2, 2>;
  const J v = f(J::variable(p.x, 0), J::variable(p.y, 1));
  const auto g = m.jet<1>(p);
  const Christoffel c = christoffel_from(g);
  const Eigen::Matrix2d ginv = m.at(p).inverse();
  const double grad[2] = {v.d(1, 0), v.d(0, 1)};
  const double hess[2][2] = {{v.d(2, 0), v.d(1, 1)}, {v.d(1, 1), v.d(0, 2)}};
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double h = hess[i][j];
      for (int k = 0; k < 2; ++k) h -= c(k, i, j) * grad[k];
      s += ginv(i, j) * h;
    }
  return s;
}

/// Outward g-unit normal at a boundary point of the given component.
inline Eigen::Vector2d outward_normal(const Metric& m, ChartPoint p, int component) {
  const Chart& c = m.chart();
  Eigen::Vector2d db;  // differential of an outward-increasing defining function
  Side side = Side::Left;
  if (c.kind == ChartKind::Disk) {
    const double r = std::hypot(p.x, p.y);
    db = {p.x / r, p.y / r};
  } else {
    db = component == 0 ? Eigen::Vector2d(-1.0, 0.0) : Eigen::Vector2d(1.0, 0.0);
    side = component == 0 ? Side::Right : Side::Left;
  }
  const Eigen::Matrix2d g = m.at(p, side);
  const Eigen::Vector2d nu = g.inverse() * db;
  return nu / std::sqrt(nu.dot(g * nu));
}

/// A closed boundary component with arc-length parametrization under g.
class BoundaryCurve {
 public:
  BoundaryCurve(Metric metric, int component, int panels = 256)
      : metric_(std::move(metric)), component_(component) {
    const Chart& c = metric_.chart();
    if (component < 0 || component >= c.components()) throw std::out_of_range("no such boundary component");
    param_period_ = c.kind == ChartKind::Disk ? 2.0 * std::numbers::pi : c.period;
    if (c.kind == ChartKind::Collar) {
      const double tb = component == 0 ? c.t_min : c.t_max;
      const double f = std::sqrt(metric_.at({tb, 0.0}, component == 0 ? Side::Right : Side::Left)(1, 1));
      constant_speed_ = f;
      length_ = f * param_period_;
      return;
    }
    if (metric_.is_euclidean()) {
      constant_speed_ = c.radius;
      length_ = c.radius * param_period_;
      return;
    }
    cumulative_.assign(static_cast<std::size_t>(panels) + 1, 0.0);
    for (int k = 0; k < panels; ++k) {
      const double a = param_period_ * k / panels, b = param_period_ * (k + 1) / panels;
      cumulative_[k + 1] = cumulative_[k] + integrate_speed(a, b);
    }
    length_ = cumulative_.back();
  }

  int component_id() const { return component_; }
  double length() const { return length_; }
  /// Orientation sign: +1 means increasing s runs counter-clockwise (disk) or
  /// in the +theta direction (collar).
  int orientation() const { return 1; }

  double wrap(double s) const {
    double r = std::fmod(s, length_);
    if (r < 0.0) r += length_;
    return r;
  }

  ChartPoint point_of_parameter(double u) const {
    const Chart& c = metric_.chart();
    if (c.kind == ChartKind::Disk) return {c.radius * std::cos(u), c.radius * std::sin(u)};
    return {component_ == 0 ? c.t_min : c.t_max, u};
  }

  double arc_length_of_parameter(double u) const {
    double w = std::fmod(u, param_period_);
    if (w < 0.0) w += param_period_;
    if (constant_speed_) return *constant_speed_ * w;
    const int panels = static_cast<int>(cumulative_.size()) - 1;
    int k = std::min(panels - 1, static_cast<int>(w / param_period_ * panels));
    const double a = param_period_ * k / panels;
    return cumulative_[k] + integrate_speed(a, w);
  }

  double parameter_of_arc_length(double s) const {
    s = wrap(s);
    if (constant_speed_) return s / *constant_speed_;
    const int panels = static_cast<int>(cumulative_.size()) - 1;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    int k = std::clamp(static_cast<int>(it - cumulative_.begin()) - 1, 0, panels - 1);
    double u = param_period_ * (k + 0.5) / panels;
    for (int iter = 0; iter < 50; ++iter) {
      const double r = arc_length_of_parameter(u) - s;
      const double step = r / speed(u);
      u -= step;
      if (std::abs(step) < 1e-15 * param_period_) break;
    }
    return u;
  }

  /// Arc-length coordinate of a chart point lying on this component.
  double arc_length(ChartPoint p) const {
    const Chart& c = metric_.chart();
    const double u = c.kind == ChartKind::Disk ? std::atan2(p.y, p.x) : p.y;
    return arc_length_of_parameter(u);
  }

  ChartPoint point(double s) const { return point_of_parameter(parameter_of_arc_length(s)); }

  /// Chart velocity of the parameter curve.
  Eigen::Vector2d parameter_velocity(double u) const {
    const Chart& c = metric_.chart();
    if (c.kind == ChartKind::Disk) return {-c.radius * std::sin(u), c.radius * std::cos(u)};
    return {0.0, 1.0};
  }

  Eigen::Vector2d unit_tangent(double s) const {
    const double u = parameter_of_arc_length(s);
    const Eigen::Vector2d v = parameter_velocity(u);
    return v / metric_.norm(point_of_parameter(u), v);
  }

  Eigen::Vector2d outward_normal(double s) const { return outward_normal_at(point(s)); }

  Eigen::Vector2d outward_normal_at(ChartPoint p) const { return anosov::outward_normal(metric_, p, component_); }

  /// Side from which the metric is evaluated on this component.
  Side side() const {
    if (metric_.chart().kind == ChartKind::Disk) return Side::Left;
    return component_ == 0 ? Side::Right : Side::Left;
  }

  const Metric& metric() const { return metric_; }

 private:
  double speed(double u) const {
    return metric_.norm(point_of_parameter(u), parameter_velocity(u));
  }
  double integrate_speed(double a, double b) const {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss<double, 10>::integrate([this](double u) { return speed(u); }, a, b);
  }

  Metric metric_;
  int component_;
  double param_period_ = 2.0 * std::numbers::pi;
  double length_ = 0.0;
  std::optional<double> constant_speed_;
  std::vector<double> cumulative_;
};

inline std::vector<BoundaryCurve> boundary_curves(const Metric& m) {
  std::vector<BoundaryCurve> out;
  for (int c = 0; c < m.chart().components(); ++c) out.emplace_back(m, c);
  return out;
}

/// Geodesic curvature of the boundary at arc length s with respect to the
/// inward normal; positive everywhere iff the boundary is strictly convex.
inline double geodesic_curvature(const BoundaryCurve& curve, double s) {
  const Metric& m = curve.metric();
  const double u = curve.parameter_of_arc_length(s);
  const ChartPoint p = curve.point_of_parameter(u);
  const Eigen::Vector2d v = curve.parameter_velocity(u);
  Eigen::Vector2d acc;
  if (m.chart().kind == ChartKind::Disk) {
    acc = {-p.x, -p.y};
  } else {
    acc = {0.0, 0.0};
  }
  const Christoffel c = christoffel_from(m.jet<1>(p, curve.side()));
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) acc[k] += c(k, i, j) * v[i] * v[j];
  const Eigen::Matrix2d g = m.at(p, curve.side());
  const Eigen::Vector2d inward = -curve.outward_normal_at(p);
  return acc.dot(g * inward) / v.dot(g * v);
}

/// Geodesic curvature sampled at `samples` equally spaced arc-length values.
inline std::vector<double> boundary_second_fundamental_form(const BoundaryCurve& curve, int samples = 256) {
  std::vector<double> out(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) out[i] = geodesic_curvature(curve, curve.length() * i / samples);
  return out;
}

}  // namespace anosov
