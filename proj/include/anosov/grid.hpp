#pragma once

// Sampled metrics on structured grids.
//
// The first grid axis u is radial: on a disk it is cell-centred,
// u_i = (i + 1/2) h with h = R / (N - 1/2), so no node sits on the origin and the
// last node lies on the boundary circle. On a collar u_i = t_min + i h with
// boundary nodes at both ends. The second axis phi is periodic with an even
// number of nodes. Tensor components are stored in (u, phi) coordinates.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "anosov/metric.hpp"

namespace anosov {

using GridField = Eigen::ArrayXXd;  // nu x nphi, all nodes

enum class GridKind { Polar, Collar };

class GridMetric {
 public:
  /// Samples a continuous metric. Disk charts give polar grids, collar charts
  /// rectangular ones. Scalar curvature is taken from the metric's jets.
  static GridMetric sample(const Metric& m, int nu, int nphi) {
    const Chart& c = m.chart();
    GridMetric g = c.kind == ChartKind::Disk ? GridMetric(GridKind::Polar, 0.0, c.radius, nu, nphi)
                                             : GridMetric(GridKind::Collar, c.t_min, c.t_max, nu, nphi, c.period);
    g.source_ = m;
    for (int i = 0; i < nu; ++i) {
      const Side side = i == nu - 1 ? Side::Left : (i == 0 && g.kind_ == GridKind::Collar ? Side::Right : Side::Auto);
      for (int j = 0; j < nphi; ++j) {
        const ChartPoint p = g.chart_point(i, j);
        const Eigen::Matrix2d G = m.at(p, side);
        const Eigen::Matrix2d J = g.coordinate_jacobian(i, j);
        const Eigen::Matrix2d Gu = J.transpose() * G * J;
        g.g11_(i, j) = Gu(0, 0);
        g.g12_(i, j) = Gu(0, 1);
        g.g22_(i, j) = Gu(1, 1);
        g.s_(i, j) = scalar_curvature(m, p, side);
      }
    }
    g.finish();
    return g;
  }

  /// Grid from raw components in (u, phi) coordinates; scalar curvature is
  /// computed by finite differences.
  static GridMetric from_components(GridKind kind, double u_min, double u_max, const GridField& g11,
                                    const GridField& g12, const GridField& g22,
                                    double period = 2.0 * std::numbers::pi) {
    GridMetric g(kind, u_min, u_max, static_cast<int>(g11.rows()), static_cast<int>(g11.cols()), period);
    if (g12.rows() != g11.rows() || g22.rows() != g11.rows() || g12.cols() != g11.cols() || g22.cols() != g11.cols())
      throw std::invalid_argument("component arrays differ in shape");
    g.g11_ = g11;
    g.g12_ = g12;
    g.g22_ = g22;
    g.finish();
    g.s_ = g.finite_difference_curvature();
    return g;
  }

  GridKind kind() const { return kind_; }
  int nu() const { return nu_; }
  int nphi() const { return nphi_; }
  double hu() const { return hu_; }
  double hphi() const { return hphi_; }
  double period() const { return period_; }
  double u(int i) const { return kind_ == GridKind::Polar ? (i + 0.5) * hu_ : u_min_ + i * hu_; }
  double phi(int j) const { return j * hphi_; }
  double u_min() const { return u_min_; }
  double u_max() const { return u_max_; }

  bool boundary(int i) const { return i == nu_ - 1 || (kind_ == GridKind::Collar && i == 0); }
  int first_interior() const { return kind_ == GridKind::Collar ? 1 : 0; }
  int interior_rows() const { return nu_ - 1 - first_interior(); }
  int unknowns() const { return interior_rows() * nphi_; }
  int index(int i, int j) const { return (i - first_interior()) * nphi_ + j; }

  const GridField& g11() const { return g11_; }
  const GridField& g12() const { return g12_; }
  const GridField& g22() const { return g22_; }
  const GridField& sqrt_det() const { return sqrt_det_; }
  const GridField& scalar_curvature_field() const { return s_; }
  const std::optional<Metric>& source() const { return source_; }

  /// Chart coordinates of node (i, j): Cartesian on a disk, (t, theta) on a collar.
  ChartPoint chart_point(int i, int j) const { return to_chart(u(i), phi(j)); }

  ChartPoint to_chart(double u, double phi) const {
    if (kind_ == GridKind::Polar) return {u * std::cos(phi), u * std::sin(phi)};
    return {u, phi};
  }

  std::pair<double, double> from_chart(ChartPoint p) const {
    if (kind_ == GridKind::Polar) {
      double ph = std::atan2(p.y, p.x);
      if (ph < 0.0) ph += 2.0 * std::numbers::pi;
      return {std::hypot(p.x, p.y), ph};
    }
    double ph = std::fmod(p.y, period_);
    if (ph < 0.0) ph += period_;
    return {p.x, ph};
  }

  /// d(chart) / d(u, phi) at node (i, j).
  Eigen::Matrix2d coordinate_jacobian(int i, int j) const {
    Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
    if (kind_ == GridKind::Polar) {
      const double c = std::cos(phi(j)), s = std::sin(phi(j)), r = u(i);
      J << c, -r * s, s, r * c;
    }
    return J;
  }

  /// Samples f(x, y) in chart coordinates at every node.
  template <class F>
  GridField sample_field(F&& f) const {
    GridField out(nu_, nphi_);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nphi_; ++j) {
        const ChartPoint p = chart_point(i, j);
        out(i, j) = f(p.x, p.y);
      }
    return out;
  }

  GridField zeros() const { return GridField::Zero(nu_, nphi_); }

  Eigen::VectorXd restrict_interior(const GridField& f) const {
    Eigen::VectorXd v(unknowns());
    for (int i = first_interior(); i < nu_ - 1; ++i)
      for (int j = 0; j < nphi_; ++j) v[index(i, j)] = f(i, j);
    return v;
  }

  GridField extend_interior(const Eigen::VectorXd& v) const {
    GridField f = zeros();
    for (int i = first_interior(); i < nu_ - 1; ++i)
      for (int j = 0; j < nphi_; ++j) f(i, j) = v[index(i, j)];
    return f;
  }

  /// Value at node (i, j) allowing i < 0 on polar grids (reflection through the
  /// origin) and wrapping j.
  double node_value(const GridField& f, int i, int j) const {
    j = wrap_j(j);
    if (i < 0) {
      if (kind_ != GridKind::Polar) throw std::out_of_range("node below the grid");
      return f(-i - 1, wrap_j(j + nphi_ / 2));
    }
    return f(i, j);
  }

  /// Tensor-product cubic Lagrange interpolation at chart point p.
  double interpolate(const GridField& f, ChartPoint p) const {
    const auto [uu, ph] = from_chart(p);
    const double xi = kind_ == GridKind::Polar ? uu / hu_ - 0.5 : (uu - u_min_) / hu_;
    int i0 = static_cast<int>(std::floor(xi)) - 1;
    const int lo = kind_ == GridKind::Polar ? -2 : 0;
    i0 = std::clamp(i0, lo, nu_ - 4);
    const double yj = ph / hphi_;
    const int j0 = static_cast<int>(std::floor(yj)) - 1;
    double wu[4], wp[4];
    lagrange4(xi - i0, wu);
    lagrange4(yj - j0, wp);
    double out = 0.0;
    for (int a = 0; a < 4; ++a) {
      double row = 0.0;
      for (int b = 0; b < 4; ++b) row += wp[b] * node_value(f, i0 + a, j0 + b);
      out += wu[a] * row;
    }
    return out;
  }

  /// Max norm over all nodes.
  static double sup(const GridField& f) { return f.abs().maxCoeff(); }

 private:
  GridMetric(GridKind kind, double u_min, double u_max, int nu, int nphi, double period = 2.0 * std::numbers::pi)
      : kind_(kind), nu_(nu), nphi_(nphi), u_min_(u_min), u_max_(u_max), period_(period) {
    if (nu < 10 || nphi < 8) throw std::invalid_argument("grid too coarse: need at least 8 interior nodes per axis");
    if (nphi % 2 != 0) throw std::invalid_argument("angular node count must be even");
    if (!(u_max > u_min)) throw std::invalid_argument("empty grid interval");
    hu_ = kind == GridKind::Polar ? u_max / (nu - 0.5) : (u_max - u_min) / (nu - 1);
    hphi_ = period / nphi;
    g11_ = g12_ = g22_ = s_ = sqrt_det_ = GridField::Zero(nu, nphi);
  }

  int wrap_j(int j) const { return ((j % nphi_) + nphi_) % nphi_; }

  static void lagrange4(double x, double* w) {
    // nodes 0, 1, 2, 3
    w[0] = -(x - 1) * (x - 2) * (x - 3) / 6.0;
    w[1] = x * (x - 2) * (x - 3) / 2.0;
    w[2] = -x * (x - 1) * (x - 3) / 2.0;
    w[3] = x * (x - 1) * (x - 2) / 6.0;
  }

  void finish() {
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nphi_; ++j) {
        const double a = g11_(i, j), b = g12_(i, j), c = g22_(i, j);
        const double det = a * c - b * b;
        if (!(a > 0.0 && det > 0.0))
          throw GeometryError("grid metric not positive definite at node (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
        sqrt_det_(i, j) = std::sqrt(det);
      }
  }

  // First and second derivatives along u (4th order centred, 2nd order one-sided
  // at the ends) and along phi (4th order periodic). On polar grids the
  // reflection through the origin supplies ghost rows; `odd` flips the sign of
  // components that change sign under u -> -u.
  double du(const GridField& f, int i, int j, bool odd) const {
    auto v = [&](int k) { return k < 0 ? (odd ? -1.0 : 1.0) * node_value(f, k, j) : f(k, j); };
    const bool polar = kind_ == GridKind::Polar;
    if ((i >= 2 || polar) && i + 2 < nu_) return (v(i - 2) - 8 * v(i - 1) + 8 * v(i + 1) - v(i + 2)) / (12 * hu_);
    if (i == 0) return (-3 * v(0) + 4 * v(1) - v(2)) / (2 * hu_);
    if (i == nu_ - 1) return (3 * v(i) - 4 * v(i - 1) + v(i - 2)) / (2 * hu_);
    return (v(i + 1) - v(i - 1)) / (2 * hu_);
  }
  double duu(const GridField& f, int i, int j, bool odd) const {
    auto v = [&](int k) { return k < 0 ? (odd ? -1.0 : 1.0) * node_value(f, k, j) : f(k, j); };
    const bool polar = kind_ == GridKind::Polar;
    if ((i >= 2 || polar) && i + 2 < nu_)
      return (-v(i - 2) + 16 * v(i - 1) - 30 * v(i) + 16 * v(i + 1) - v(i + 2)) / (12 * hu_ * hu_);
    if (i == 0) return (2 * v(0) - 5 * v(1) + 4 * v(2) - v(3)) / (hu_ * hu_);
    if (i == nu_ - 1) return (2 * v(i) - 5 * v(i - 1) + 4 * v(i - 2) - v(i - 3)) / (hu_ * hu_);
    return (v(i + 1) - 2 * v(i) + v(i - 1)) / (hu_ * hu_);
  }
  double dp(const GridField& f, int i, int j) const {
    auto v = [&](int k) { return f(i, wrap_j(k)); };
    return (v(j - 2) - 8 * v(j - 1) + 8 * v(j + 1) - v(j + 2)) / (12 * hphi_);
  }
  double dpp(const GridField& f, int i, int j) const {
    auto v = [&](int k) { return f(i, wrap_j(k)); };
    return (-v(j - 2) + 16 * v(j - 1) - 30 * v(j) + 16 * v(j + 1) - v(j + 2)) / (12 * hphi_ * hphi_);
  }

  /// Brioschi formula with finite-difference derivatives; returns s = 2K.
  GridField finite_difference_curvature() const {
    GridField E = g11_, F = g12_, G = g22_;
    GridField Eu(nu_, nphi_), Ev(nu_, nphi_), Fu(nu_, nphi_), Fv(nu_, nphi_), Gu(nu_, nphi_), Gv(nu_, nphi_);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nphi_; ++j) {
        Eu(i, j) = du(E, i, j, false);
        Fu(i, j) = du(F, i, j, true);
        Gu(i, j) = du(G, i, j, false);
        Ev(i, j) = dp(E, i, j);
        Fv(i, j) = dp(F, i, j);
        Gv(i, j) = dp(G, i, j);
      }
    GridField s(nu_, nphi_);
    for (int i = 0; i < nu_; ++i)
      for (int j = 0; j < nphi_; ++j) {
        const double e = E(i, j), f = F(i, j), g = G(i, j);
        const double eu = Eu(i, j), ev = Ev(i, j), fu = Fu(i, j), fv = Fv(i, j), gu = Gu(i, j), gv = Gv(i, j);
        const double evv = dpp(E, i, j), guu = duu(G, i, j, false);
        // F_uv by differencing F_u along phi.
        const double fuv = dp(Fu, i, j);
        Eigen::Matrix3d A, B;
        A << -0.5 * evv + fuv - 0.5 * guu, 0.5 * eu, fu - 0.5 * ev, fv - 0.5 * gu, e, f, 0.5 * gv, f, g;
        B << 0.0, 0.5 * ev, 0.5 * gu, 0.5 * ev, e, f, 0.5 * gu, f, g;
        const double det = e * g - f * f;
        s(i, j) = 2.0 * (A.determinant() - B.determinant()) / (det * det);
      }
    return s;
  }

  GridKind kind_;
  int nu_, nphi_;
  double u_min_, u_max_, period_;
  double hu_ = 0.0, hphi_ = 0.0;
  GridField g11_, g12_, g22_, s_, sqrt_det_;
  std::optional<Metric> source_;
};

}  // namespace anosov
