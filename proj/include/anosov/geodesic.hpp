#pragma once

// Geodesic flow on the unit tangent bundle of a chart with boundary.
//
// The flow is integrated in Hamiltonian form (x, p = g v) with an embedded Dormand-Prince 5(4)
// pair and PI step control. Boundary exits are located by bisection on the
// chart's boundary function, re-stepping from the last accepted state. On top
// of the integrator sit lens data, normal Jacobi fields, per-orbit Lyapunov
// estimates and a Monte Carlo trapped-fraction estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anosov/metric.hpp"
#include "anosov/parallel.hpp"
#include "anosov/random.hpp"

namespace anosov {

struct UnitTangent {
  ChartPoint base;
  Eigen::Vector2d direction = Eigen::Vector2d::Zero();
};

/// Rescales v to unit g-length at p.
inline UnitTangent make_unit(const Metric& m, ChartPoint p, const Eigen::Vector2d& v) {
  const double n = m.norm(p, v);
  if (!(n > 0.0)) throw std::invalid_argument("zero tangent vector");
  return {p, v / n};
}

inline UnitTangent flip(const UnitTangent& u) { return {u.base, -u.direction}; }

class StepUnderflow : public GeometryError {
 public:
  StepUnderflow(double t, double h)
      : GeometryError("step size underflow at t = " + std::to_string(t) + " (h = " + std::to_string(h) + ")"),
        time(t) {}
  double time;
};

namespace detail {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

/// One Dormand-Prince step; returns the 5th-order solution and the embedded error.
template <int D, class Rhs>
void dopri_step(const Rhs& f, const Vec<D>& y, const Vec<D>& k1, double h, Vec<D>& y5, Vec<D>& err) {
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  const Vec<D> k2 = f(y + h * a21 * k1);
  const Vec<D> k3 = f(y + h * (a31 * k1 + a32 * k2));
  const Vec<D> k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vec<D> k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vec<D> k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Vec<D> k7 = f(y5);
  err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
}

enum class FlowStatus { Reached, Exited };

template <int D>
struct FlowResult {
  FlowStatus status = FlowStatus::Reached;
  double t = 0.0;
  Vec<D> y;
  double h = 0.0;
  long steps = 0;
};

/// Integrates y' = f(y) from t0 to t_max, stopping at the first time inside(y) < 0.
/// `project` is applied after each accepted step; `observe(t, y)` records states.
template <int D, class Rhs, class Inside, class Project, class Observe>
FlowResult<D> run_flow(const Rhs& f, Vec<D> y, double t0, double t_max, double tol, double h0, const Inside& inside,
                       const Project& project, Observe&& observe, double exit_resolution = 1e-13) {
  FlowResult<D> res;
  double t = t0;
  double h = std::min(h0 > 0.0 ? h0 : 0.05, t_max - t0);
  double err_prev = 1e-4;
  Vec<D> y5, err;
  while (t < t_max) {
    h = std::min(h, t_max - t);
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
      if (t_max - t <= 1e-14 * std::max(1.0, std::abs(t))) break;
      throw StepUnderflow(t, h);
    }
    const Vec<D> k1 = f(y);
    dopri_step<D>(f, y, k1, h, y5, err);
    double en = 0.0;
    for (int i = 0; i < D; ++i) {
      const double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(y5[i])));
      en = std::max(en, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(en)) {
      h *= 0.2;
      continue;
    }
    if (en > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      continue;
    }
    ++res.steps;
    if (inside(y5) < 0.0) {
      // Bisection on the step fraction; the left end is treated as inside.
      double lo = 0.0, hi = h;
      Vec<D> ym = y5, dummy;
      for (int it = 0; it < 60 && hi - lo > exit_resolution; ++it) {
        const double mid = 0.5 * (lo + hi);
        dopri_step<D>(f, y, k1, mid, ym, dummy);
        if (inside(ym) >= 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double tau = 0.5 * (lo + hi);
      dopri_step<D>(f, y, k1, tau, ym, dummy);
      project(ym);
      observe(t + tau, ym);
      res.status = FlowStatus::Exited;
      res.t = t + tau;
      res.y = ym;
      res.h = h;
      return res;
    }
    t += h;
    y = y5;
    project(y);
    observe(t, y);
    const double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.17) * std::pow(err_prev, 0.04);
    err_prev = std::max(en, 1e-4);
    h *= std::clamp(fac, 0.2, 10.0);
  }
  res.status = FlowStatus::Reached;
  res.t = t;
  res.y = y;
  res.h = h;
  return res;
}

/// Hamiltonian geodesic field in (x, p) with p = g v:
/// x' = g^{-1} p, p_k' = (1/2) d_k g_ab v^a v^b. Returns v and p'.
inline void hamilton(const Metric& m, ChartPoint x, const Eigen::Vector2d& p, Eigen::Vector2d& v,
                     Eigen::Vector2d& dp) {
  const auto g = m.jet<1>(x);
  const double E = g.g11.value(), F = g.g12.value(), G = g.g22.value();
  const double det = E * G - F * F;
  v[0] = (G * p[0] - F * p[1]) / det;
  v[1] = (E * p[1] - F * p[0]) / det;
  for (int k = 0; k < 2; ++k) {
    const int a = k == 0 ? 1 : 0, b = k == 0 ? 0 : 1;
    dp[k] = 0.5 * (g.g11.coeff(a, b) * v[0] * v[0] + 2.0 * g.g12.coeff(a, b) * v[0] * v[1] +
                   g.g22.coeff(a, b) * v[1] * v[1]);
  }
}

/// Rescales the momentum block y[2..3] to unit g-length.
template <int D>
void normalize_momentum(const Metric& m, Vec<D>& y) {
  const Eigen::Matrix2d g = m.at({y[0], y[1]});
  const Eigen::Vector2d p(y[2], y[3]);
  const double n2 = p.dot(g.inverse() * p);
  if (n2 > 0.0) {
    const double n = std::sqrt(n2);
    y[2] /= n;
    y[3] /= n;
  }
}

template <int D>
Vec<D> pack(const Metric& m, const UnitTangent& u) {
  Vec<D> y = Vec<D>::Zero();
  const Eigen::Vector2d p = m.at(u.base) * u.direction;
  y[0] = u.base.x;
  y[1] = u.base.y;
  y[2] = p[0];
  y[3] = p[1];
  return y;
}

template <int D>
UnitTangent unpack(const Metric& m, const Vec<D>& y) {
  const ChartPoint x{y[0], y[1]};
  return {x, m.at(x).inverse() * Eigen::Vector2d(y[2], y[3])};
}

}  // namespace detail

struct GeodesicPath {
  std::vector<double> times;
  std::vector<UnitTangent> states;
  double length = 0.0;
  int winding = 0;
  bool exited = false;
  long steps = 0;
};

inline int winding_of(const Metric& m, double y0, double y1) {
  if (m.chart().kind != ChartKind::Collar) return 0;
  return static_cast<int>(std::lround((y1 - y0) / m.chart().period));
}

/// Unit-speed geodesic from `start` until t_max or the first boundary exit.
/// Exits are located to within `exit_resolution` in time.
inline GeodesicPath integrate(const Metric& m, const UnitTangent& start, double t_max, double tol = 1e-10,
                              bool record = true, double exit_resolution = 1e-13) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (m.chart().inside(start.base) < -1e-9) throw GeometryError("start point outside the surface");
  using V = detail::Vec<4>;
  const V y = detail::pack<4>(m, make_unit(m, start.base, start.direction));
  GeodesicPath path;
  auto to_state = [&m](const V& s) { return detail::unpack<4>(m, s); };
  if (record) {
    path.times.push_back(0.0);
    path.states.push_back(to_state(y));
  }
  const auto rhs = [&m](const V& s) {
    Eigen::Vector2d v, dp;
    detail::hamilton(m, {s[0], s[1]}, {s[2], s[3]}, v, dp);
    V out;
    out << v[0], v[1], dp[0], dp[1];
    return out;
  };
  const Chart chart = m.chart();
  const auto inside = [&chart](const V& s) { return chart.inside({s[0], s[1]}); };
  const auto project = [&m](V& s) { detail::normalize_momentum<4>(m, s); };
  const auto res = detail::run_flow<4>(rhs, y, 0.0, t_max, tol, 0.05, inside, project, [&](double t, const V& s) {
    if (record) {
      path.times.push_back(t);
      path.states.push_back(to_state(s));
    }
  }, exit_resolution);
  path.length = res.t;
  path.exited = res.status == detail::FlowStatus::Exited;
  path.steps = res.steps;
  path.winding = winding_of(m, y[1], res.y[1]);
  if (!record) {
    path.times = {0.0, res.t};
    path.states = {to_state(y), to_state(res.y)};
  }
  return path;
}

/// Boundary components together with a concatenated arc-length coordinate.
class BoundaryFrame {
 public:
  explicit BoundaryFrame(const Metric& m) : metric_(m), curves_(boundary_curves(m)) {
    double off = 0.0;
    for (const auto& c : curves_) {
      offsets_.push_back(off);
      off += c.length();
    }
    total_ = off;
  }

  const Metric& metric() const { return metric_; }
  const std::vector<BoundaryCurve>& curves() const { return curves_; }
  const BoundaryCurve& curve(int component) const { return curves_.at(static_cast<std::size_t>(component)); }
  double total_length() const { return total_; }
  double offset(int component) const { return offsets_.at(static_cast<std::size_t>(component)); }
  double global_s(int component, double s) const { return offset(component) + curve(component).wrap(s); }

  /// Inward state at arc length s making angle alpha with the inward normal
  /// (positive toward the positive tangent).
  UnitTangent inward_state(int component, double s, double alpha) const {
    const BoundaryCurve& c = curve(component);
    const ChartPoint p = c.point(s);
    const Eigen::Vector2d nu = c.outward_normal_at(p);
    const double u = c.parameter_of_arc_length(s);
    const Eigen::Vector2d tv = c.parameter_velocity(u);
    const Eigen::Vector2d t = tv / metric_.norm(p, tv);
    return {p, -std::cos(alpha) * nu + std::sin(alpha) * t};
  }

  int component_of(ChartPoint p) const { return metric_.chart().nearest_component(p); }
  double arc_length(ChartPoint p) const { return curve(component_of(p)).arc_length(p); }

  /// g(v, outward normal) at a boundary point.
  double normal_component(const UnitTangent& u) const {
    const BoundaryCurve& c = curve(component_of(u.base));
    const Eigen::Vector2d nu = c.outward_normal_at(u.base);
    return u.direction.dot(metric_.at(u.base, c.side()) * nu);
  }

  /// Angle from the inward normal (entry) or from the outward normal (exit).
  double angle(const UnitTangent& u, bool entry) const {
    const BoundaryCurve& c = curve(component_of(u.base));
    const Eigen::Matrix2d g = metric_.at(u.base, c.side());
    Eigen::Vector2d nu = c.outward_normal_at(u.base);
    if (entry) nu = -nu;
    const double par = metric_.chart().kind == ChartKind::Disk ? std::atan2(u.base.y, u.base.x) : u.base.y;
    const Eigen::Vector2d tv = c.parameter_velocity(par);
    const Eigen::Vector2d t = tv / std::sqrt(tv.dot(g * tv));
    return std::atan2(u.direction.dot(g * t), u.direction.dot(g * nu));
  }

 private:
  Metric metric_;
  std::vector<BoundaryCurve> curves_;
  std::vector<double> offsets_;
  double total_ = 0.0;
};

struct LensRecord {
  UnitTangent entry;
  bool trapped = false;
  UnitTangent exit;
  double travel_time = 0.0;
  int winding = 0;
  int exit_component = -1;
  std::string error;  // non-empty when the record failed
  bool ok() const { return error.empty(); }
};

inline constexpr double kBoundaryTolerance = 1e-9;

/// First boundary exit of the geodesic from `start`, or a Trapped outcome censored at t_max.
inline LensRecord exit_event(const Metric& m, const UnitTangent& start, double t_max, double tol = 1e-10,
                             double exit_resolution = 1e-13) {
  const double in = m.chart().inside(start.base);
  if (in < -kBoundaryTolerance) throw GeometryError("start point outside the surface");
  if (in <= kBoundaryTolerance) {
    const UnitTangent u = make_unit(m, start.base, start.direction);
    const int comp = m.chart().nearest_component(u.base);
    const Side side = comp == 0 && m.chart().kind == ChartKind::Collar ? Side::Right : Side::Left;
    const double vn = u.direction.dot(m.at(u.base, side) * outward_normal(m, u.base, comp));
    if (vn > 1e-12) throw GeometryError("start direction points strictly outward");
  }
  const GeodesicPath p = integrate(m, start, t_max, tol, false, exit_resolution);
  LensRecord r;
  r.entry = p.states.front();
  r.travel_time = p.length;
  r.winding = p.winding;
  if (p.exited) {
    r.exit = p.states.back();
    r.exit_component = m.chart().nearest_component(r.exit.base);
  } else {
    r.trapped = true;
    r.exit = p.states.back();
  }
  return r;
}

/// Batch of exit events; failures are recorded per entry and never abort the batch.
inline std::vector<LensRecord> lens_data(const Metric& m, const std::vector<UnitTangent>& samples, double t_max,
                                         double tol = 1e-10, int threads = 1) {
  std::vector<LensRecord> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    try {
      out[i] = exit_event(m, samples[i], t_max, tol);
    } catch (const std::exception& e) {
      out[i].entry = samples[i];
      out[i].error = e.what();
    }
  });
  return out;
}

struct JacobiSolution {
  GeodesicPath along;
  std::vector<double> times;
  std::vector<double> j_values;
  std::vector<double> j_derivatives;
  std::vector<double> curvature;  // K(gamma(t)) at the sample times
  std::vector<double> zeros;
};

/// Normal Jacobi field J'' + K(gamma) J = 0 along `path` with J(0) = j0, J'(0) = dj0.
inline JacobiSolution jacobi(const Metric& m, const GeodesicPath& path, double j0, double dj0, double tol = 1e-10) {
  if (j0 == 0.0 && dj0 == 0.0) throw std::invalid_argument("Jacobi initial condition must be nonzero");
  if (path.states.empty()) throw std::invalid_argument("empty geodesic path");
  using V = detail::Vec<6>;
  V y = detail::pack<6>(m, make_unit(m, path.states.front().base, path.states.front().direction));
  y[4] = j0;
  y[5] = dj0;
  const auto rhs = [&m](const V& s) {
    const ChartPoint p{s[0], s[1]};
    Eigen::Vector2d v, dp;
    detail::hamilton(m, p, {s[2], s[3]}, v, dp);
    V out;
    out << v[0], v[1], dp[0], dp[1], s[5], -gauss_curvature_from(m.jet<2>(p)) * s[4];
    return out;
  };
  JacobiSolution sol;
  sol.along = path;
  auto push = [&](double t, const V& s) {
    sol.times.push_back(t);
    sol.j_values.push_back(s[4]);
    sol.j_derivatives.push_back(s[5]);
    sol.curvature.push_back(gauss_curvature_from(m.jet<2>({s[0], s[1]})));
  };
  push(0.0, y);
  const auto never = [](const V&) { return 1.0; };
  const auto project = [&m](V& s) { detail::normalize_momentum<6>(m, s); };
  std::vector<V> states{y};
  detail::run_flow<6>(rhs, y, 0.0, path.length, tol, 0.05, never, project, [&](double t, const V& s) {
    push(t, s);
    states.push_back(s);
  });
  // Zeros for t > 0 by sign change, refined by bisection with re-stepping.
  for (std::size_t i = 1; i < sol.times.size(); ++i) {
    const double a = sol.j_values[i - 1], b = sol.j_values[i];
    if (i == 1 && a == 0.0) continue;
    if (b == 0.0) {
      sol.zeros.push_back(sol.times[i]);
      continue;
    }
    if (a == 0.0 || (a > 0.0) == (b > 0.0)) continue;
    const V& ys = states[i - 1];
    const V k1 = rhs(ys);
    double lo = 0.0, hi = sol.times[i] - sol.times[i - 1];
    V ym, err;
    for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      detail::dopri_step<6>(rhs, ys, k1, mid, ym, err);
      if ((ym[4] > 0.0) == (a > 0.0)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    sol.zeros.push_back(sol.times[i - 1] + 0.5 * (lo + hi));
  }
  return sol;
}

/// First conjugate point along the geodesic from `start` within length t_max, if any.
inline std::optional<double> first_conjugate_point(const Metric& m, const UnitTangent& start, double t_max,
                                                   double tol = 1e-10) {
  const GeodesicPath p = integrate(m, start, t_max, tol, false);
  const JacobiSolution j = jacobi(m, p, 0.0, 1.0, tol);
  if (j.zeros.empty()) return std::nullopt;
  return j.zeros.front();
}

struct LyapunovEstimate {
  double exponent = 0.0;
  double time_used = 0.0;
  bool exited = false;
};

/// (1/T) log of the largest singular value of the Jacobi fundamental matrix,
/// renormalized every unit of time.
inline LyapunovEstimate lyapunov_estimate(const Metric& m, const UnitTangent& start, double T, double tol = 1e-10) {
  if (!(T > 0.0)) throw std::invalid_argument("Lyapunov horizon must be positive");
  using V = detail::Vec<8>;
  V y = detail::pack<8>(m, make_unit(m, start.base, start.direction));
  // Fundamental matrix [[J1, J2], [J1', J2']] stored row-major in y[4..7].
  y[4] = 1.0;
  y[7] = 1.0;
  const auto rhs = [&m](const V& s) {
    const ChartPoint p{s[0], s[1]};
    const double K = gauss_curvature_from(m.jet<2>(p));
    Eigen::Vector2d v, dp;
    detail::hamilton(m, p, {s[2], s[3]}, v, dp);
    V out;
    out << v[0], v[1], dp[0], dp[1], s[6], s[7], -K * s[4], -K * s[5];
    return out;
  };
  const Chart chart = m.chart();
  const auto inside = [&chart](const V& s) { return chart.inside({s[0], s[1]}); };
  const auto project = [&m](V& s) { detail::normalize_momentum<8>(m, s); };
  LyapunovEstimate est;
  double log_sum = 0.0, t = 0.0, h = 0.05;
  auto sigma = [](const V& s) {
    Eigen::Matrix2d F;
    F << s[4], s[5], s[6], s[7];
    return Eigen::JacobiSVD<Eigen::Matrix2d>(F).singularValues()[0];
  };
  while (t < T - 1e-12) {
    const double t_next = std::min(T, std::floor(t + 1.0 + 1e-12));
    const auto res = detail::run_flow<8>(rhs, y, t, t_next, tol, h, inside, project, [](double, const V&) {});
    y = res.y;
    h = res.h;
    t = res.t;
    const double sg = sigma(y);
    log_sum += std::log(sg);
    for (int i = 4; i < 8; ++i) y[i] /= sg;
    if (res.status == detail::FlowStatus::Exited) {
      est.exited = true;
      break;
    }
  }
  est.time_used = t;
  est.exponent = t > 0.0 ? std::max(0.0, log_sum / t) : 0.0;
  return est;
}

struct TrappedFraction {
  double horizon = 0.0;
  double fraction = 0.0;
  double half_width = 0.0;  // binomial 95% half-width
  long trapped = 0;
  long samples = 0;
  long failures = 0;
};

/// Liouville influx sample number `index`: component and arc length uniform in
/// boundary length, sin(alpha) uniform in (-1, 1).
inline UnitTangent liouville_sample(const BoundaryFrame& frame, std::uint64_t seed, std::uint64_t index) {
  SplitMix64 rng = SplitMix64::stream(seed, index);
  const double g = rng.uniform() * frame.total_length();
  int comp = 0;
  while (comp + 1 < static_cast<int>(frame.curves().size()) && g >= frame.offset(comp + 1)) ++comp;
  const double s = g - frame.offset(comp);
  const double alpha = std::asin(2.0 * rng.uniform() - 1.0);
  return frame.inward_state(comp, s, alpha);
}

/// Trapped fractions for several horizons from one set of samples, so the
/// estimates are monotone in the horizon by construction.
inline std::vector<TrappedFraction> trapped_measure(const Metric& m, const std::vector<double>& horizons, long N,
                                                    std::uint64_t seed, double tol = 1e-9, int threads = 1) {
  if (N < 100) throw std::invalid_argument("trapped_measure needs at least 100 samples");
  if (horizons.empty()) throw std::invalid_argument("no horizons given");
  const double t_max = *std::max_element(horizons.begin(), horizons.end());
  const BoundaryFrame frame(m);
  std::vector<double> exit_time(static_cast<std::size_t>(N));
  std::vector<char> failed(static_cast<std::size_t>(N), 0);
  parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t i) {
    try {
      const UnitTangent u = liouville_sample(frame, seed, i);
      const LensRecord r = exit_event(m, u, t_max, tol);
      exit_time[i] = r.trapped ? std::numeric_limits<double>::infinity() : r.travel_time;
    } catch (const std::exception&) {
      failed[i] = 1;
    }
  });
  std::vector<TrappedFraction> out;
  for (double T : horizons) {
    TrappedFraction f;
    f.horizon = T;
    for (long i = 0; i < N; ++i) {
      if (failed[i]) {
        ++f.failures;
        continue;
      }
      ++f.samples;
      if (exit_time[i] > T) ++f.trapped;
    }
    const double n = static_cast<double>(std::max<long>(f.samples, 1));
    f.fraction = f.trapped / n;
    f.half_width = 1.96 * std::sqrt(f.fraction * (1.0 - f.fraction) / n);
    out.push_back(f);
  }
  return out;
}

inline TrappedFraction trapped_measure(const Metric& m, double T, long N, std::uint64_t seed, double tol = 1e-9,
                                       int threads = 1) {
  return trapped_measure(m, std::vector<double>{T}, N, seed, tol, threads).front();
}

}  // namespace anosov
