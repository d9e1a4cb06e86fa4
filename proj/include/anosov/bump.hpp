#pragma once

// Scaled bump families h = sum_i delta^{m-2+1/m} chi(|x - x_i| / delta) with an
// even cutoff chi(u) = p(u^2) exp(-1/(1-u^2)) whose jet at 0 vanishes up to
// order m-2 and has chi^{(m-1)}(0) = -1.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anosov/jet.hpp"
#include "anosov/metric.hpp"

namespace anosov {

class BumpFamily {
 public:
  /// m odd >= 3. Centers must be more than 2 delta apart and at least
  /// delta + clearance inside the chart. The chart must carry a flat metric.
  BumpFamily(const Metric& metric, int m, double delta, std::vector<ChartPoint> centers, double clearance = 0.0)
      : m_(m), delta_(delta), centers_(std::move(centers)) {
    if (m < 3 || m % 2 == 0) throw std::invalid_argument("bump order m must be odd and at least 3");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!metric.is_euclidean()) throw std::invalid_argument("bump families are built on a flat chart metric");
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      if (metric.chart().inside(centers_[i]) < delta + clearance)
        throw std::invalid_argument("center " + std::to_string(i) + " violates the boundary clearance");
      for (std::size_t j = 0; j < i; ++j)
        if (std::hypot(centers_[i].x - centers_[j].x, centers_[i].y - centers_[j].y) <= 2.0 * delta)
          throw std::invalid_argument("centers " + std::to_string(j) + " and " + std::to_string(i) +
                                      " closer than 2 delta");
    }
    solve_polynomial();
    scale_ = std::pow(delta, m - 2 + 1.0 / m);
  }

  int m() const { return m_; }
  double delta() const { return delta_; }
  const std::vector<ChartPoint>& centers() const { return centers_; }
  const std::vector<double>& polynomial() const { return p_; }  // coefficients in v = u^2

  /// chi as a function of v = u^2.
  template <class T>
  T chi_of_square(const T& v) const {
    using std::exp;
    if (!(value_of(v) < 1.0)) return T(0.0);
    T poly(0.0);
    for (int k = static_cast<int>(p_.size()) - 1; k >= 0; --k) poly = poly * v + p_[k];
    return poly * exp(-1.0 / (1.0 - v));
  }

  template <class T>
  T chi(const T& u) const {
    return chi_of_square(u * u);
  }

  /// h_delta at (x, y); generic over jets.
  template <class T>
  T operator()(const T& x, const T& y) const {
    T s(0.0);
    for (const ChartPoint& c : centers_) {
      const T v = ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y)) / (delta_ * delta_);
      if (value_of(v) < 1.0) s += scale_ * chi_of_square(v);
    }
    return s;
  }

  /// Points covering every support disk: polar rings of `rings` radii and
  /// `angles` angles per center, centers included.
  std::vector<ChartPoint> sample_points(int rings = 40, int angles = 32) const {
    std::vector<ChartPoint> pts;
    for (const ChartPoint& c : centers_) {
      pts.push_back(c);
      for (int r = 1; r <= rings; ++r)
        for (int a = 0; a < angles; ++a) {
          const double rad = delta_ * r / (rings + 1.0), th = 2.0 * std::numbers::pi * (a + 0.5 * (r % 2)) / angles;
          pts.push_back({c.x + rad * std::cos(th), c.y + rad * std::sin(th)});
        }
    }
    return pts;
  }

 private:
  void solve_polynomial() {
    const int q = (m_ - 1) / 2;
    // Taylor coefficients of exp(-1/(1-v)) at v = 0.
    const Jet<1, 12> e = exp(-1.0 / (1.0 - Jet<1, 12>::variable(0.0)));
    // [v^k] of p(v) e(v): sum_i p_i e_{k-i}. Require 0 for k < q and
    // (2q)! [v^q] = -1.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q + 1, q + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q + 1);
    for (int k = 0; k <= q; ++k)
      for (int i = 0; i <= k; ++i) A(k, i) = e.coeff(k - i);
    b[q] = -1.0 / std::tgamma(2.0 * q + 1.0);
    const Eigen::VectorXd p = A.partialPivLu().solve(b);
    p_.assign(p.data(), p.data() + p.size());
  }

  int m_;
  double delta_;
  std::vector<ChartPoint> centers_;
  std::vector<double> p_;
  double scale_ = 1.0;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace anosov
