#pragma once

// Marked boundary distances, distance tables and lens-data comparison.
//
// Two solvers are provided. The shooting solver scans entry angles at x,
// brackets the terminal miss by exit component and winding, and polishes the
// bracket with TOMS 748. The Clairaut solver applies to warped annuli with a
// single nondegenerate core circle: geodesics are parametrized by the distance
// of their Clairaut constant from the core value, and the angular advance and
// length are evaluated by quadrature after a substitution that removes the
// turning-point singularity. This reaches winding classes whose Clairaut
// constants lie far closer to the core value than double precision resolves.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <nlohmann/json.hpp>

#include "anosov/geodesic.hpp"
#include "anosov/metric.hpp"
#include "anosov/parallel.hpp"

namespace anosov {

struct BoundaryPoint {
  int component = 0;
  double s = 0.0;
};

struct MarkedClass {
  bool has_winding = false;
  int n = 0;

  static MarkedClass trivial() { return {}; }
  static MarkedClass winding(int n) { return {true, n}; }
  MarkedClass inverse() const { return {has_winding, -n}; }
  std::string label() const { return has_winding ? "w" + std::to_string(n) : "trivial"; }
};

enum class DistanceMethod { Auto, Shooting, Clairaut };

struct DistanceOptions {
  double tol = 1e-10;      // terminal miss, arc length
  int scan = 2048;         // entry angles in the bracketing scan
  double t_max = 100.0;    // censoring horizon of each shot
  double ode_tol = 1e-12;  // integrator tolerance for polishing shots
  DistanceMethod method = DistanceMethod::Auto;
};

struct DistanceSample {
  BoundaryPoint x, y;
  MarkedClass cls;
  double length = std::numeric_limits<double>::quiet_NaN();
  double shooting_angle = std::numeric_limits<double>::quiet_NaN();  // from the inward normal at x
  double residual = std::numeric_limits<double>::quiet_NaN();        // terminal miss, arc length
  double clairaut = std::numeric_limits<double>::quiet_NaN();        // warped metrics only
  double core_gap = std::numeric_limits<double>::quiet_NaN();        // ||c| - f(core)|, resolved below rounding of c
  std::string method;
  std::string error;
  bool ok() const { return error.empty(); }

  static DistanceSample of(BoundaryPoint x, BoundaryPoint y, MarkedClass c) {
    DistanceSample d;
    d.x = x;
    d.y = y;
    d.cls = c;
    return d;
  }
};

class NoBracket : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shooting solver with a cached angle scan for one source point.
class ShootingSolver {
 public:
  ShootingSolver(const Metric& m, BoundaryPoint x, DistanceOptions opt = {})
      : metric_(m), frame_(m), x_(x), opt_(opt) {
    const BoundaryCurve& cx = frame_.curve(x.component);
    x_param_ = cx.parameter_of_arc_length(x.s);
    alphas_.resize(static_cast<std::size_t>(opt_.scan));
    scan_.resize(alphas_.size());
    for (int i = 0; i < opt_.scan; ++i) {
      alphas_[i] = -std::numbers::pi / 2 + std::numbers::pi * (i + 0.5) / opt_.scan;
      scan_[i] = shoot(alphas_[i], false);
    }
    refine_transitions();
  }

  DistanceSample solve(BoundaryPoint y, MarkedClass cls) const {
    DistanceSample out = DistanceSample::of(x_, y, cls);
    out.method = "shooting";
    const bool annulus = metric_.chart().kind == ChartKind::Collar;
    if (!annulus && cls.has_winding) throw std::invalid_argument("winding classes need an annulus");
    if (!annulus && y.component != 0) throw std::out_of_range("disk has one boundary component");
    const BoundaryCurve& cy = frame_.curve(y.component);
    const double y_param = cy.parameter_of_arc_length(y.s);
    double target;
    double scale = 1.0;
    if (annulus) {
      const double P = metric_.chart().period;
      target = std::remainder(y_param - x_param_, P) + cls.n * P;
      scale = cy.length() / P;
      if (y.component == x_.component && target == 0.0) throw std::invalid_argument("constant loop is not a geodesic");
    } else {
      target = cy.wrap(y.s - x_.s);
      if (target == 0.0) throw std::invalid_argument("x = y has no chord in the trivial class");
    }
    auto miss = [&](const Shot& s) { return annulus ? (s.advance - target) * scale : s.advance - target; };
    // Unwrapped advance is continuous on the annulus; on the disk the wrap at x
    // shows up as a jump of about one boundary length.
    const double jump = annulus ? std::numeric_limits<double>::infinity() : 0.5 * cy.length();

    std::vector<std::pair<double, double>> brackets;
    for (std::size_t i = 0; i + 1 < scan_.size(); ++i) {
      const Shot& a = scan_[i];
      const Shot& b = scan_[i + 1];
      if (!a.valid || !b.valid || a.component != y.component || b.component != y.component) continue;
      const double fa = miss(a), fb = miss(b);
      if ((fa > 0.0) == (fb > 0.0) && fa != 0.0 && fb != 0.0) continue;
      if (std::abs(fa - fb) > jump) continue;
      brackets.emplace_back(alphas_[i], alphas_[i + 1]);
    }
    std::optional<DistanceSample> best;
    for (const auto& [a0, b0] : brackets) {
      bool broken = false;
      Shot last;
      auto F = [&](double alpha) {
        last = shoot(alpha, true);
        if (!last.valid || last.component != y.component) {
          broken = true;
          return 0.0;
        }
        return miss(last);
      };
      const double fa = F(a0);
      if (broken) continue;
      const double fb = F(b0);
      if (broken) continue;
      double alpha = fa == 0.0 ? a0 : b0;
      if (fa != 0.0 && fb != 0.0) {
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(
            F, a0, b0, fa, fb, [](double lo, double hi) { return std::abs(hi - lo) <= 1e-15; }, iters);
        if (broken) continue;
        alpha = 0.5 * (r.first + r.second);
      }
      const double f = F(alpha);
      if (broken || std::abs(f) > std::max(opt_.tol, 1e-3)) continue;
      DistanceSample cand = out;
      cand.length = last.time;
      cand.shooting_angle = alpha;
      cand.residual = std::abs(f);
      if (!best || cand.residual < best->residual) best = cand;
    }
    if (!best) {
      std::string range = annulus ? " (scanned windings " + scanned_windings() + ")" : "";
      throw NoBracket("no bracket found for class " + cls.label() + range);
    }
    if (best->residual > opt_.tol) best->error = "terminal miss above tolerance";
    return *best;
  }

  const BoundaryFrame& frame() const { return frame_; }

 private:
  struct Shot {
    bool valid = false;
    int component = -1;
    double advance = 0.0;  // disk: arc length from x in [0, L); annulus: unwrapped theta advance
    double time = 0.0;
    int winding = 0;
  };

  Shot shoot(double alpha, bool precise) const {
    Shot s;
    try {
      const UnitTangent u = frame_.inward_state(x_.component, x_.s, alpha);
      const LensRecord r = precise ? exit_event(metric_, u, opt_.t_max, opt_.ode_tol, 1e-14)
                                   : exit_event(metric_, u, opt_.t_max, 1e-7, 1e-8);
      if (r.trapped) return s;
      s.valid = true;
      s.component = r.exit_component;
      s.time = r.travel_time;
      s.winding = r.winding;
      if (metric_.chart().kind == ChartKind::Collar) {
        s.advance = r.exit.base.y - u.base.y;
      } else {
        const BoundaryCurve& c = frame_.curve(0);
        s.advance = c.wrap(c.arc_length(r.exit.base) - x_.s);
      }
    } catch (const std::exception&) {
      s.valid = false;
    }
    return s;
  }

  // Where the exit component changes or shots become trapped, the advance
  // diverges; bisect towards the transition so that brackets exist for large
  // advances on both sides.
  void refine_transitions(int depth = 48) {
    std::vector<double> a2;
    std::vector<Shot> s2;
    auto key = [](const Shot& s) { return s.valid ? s.component : -1; };
    for (std::size_t i = 0; i < scan_.size(); ++i) {
      a2.push_back(alphas_[i]);
      s2.push_back(scan_[i]);
      if (i + 1 == scan_.size() || key(scan_[i]) == key(scan_[i + 1])) continue;
      double lo = alphas_[i], hi = alphas_[i + 1];
      Shot slo = scan_[i];
      std::vector<std::pair<double, Shot>> inserted;
      for (int d = 0; d < depth && hi - lo > 1e-15; ++d) {
        const double mid = 0.5 * (lo + hi);
        const Shot sm = shoot(mid, false);
        inserted.emplace_back(mid, sm);
        if (key(sm) == key(slo)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      std::sort(inserted.begin(), inserted.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
      for (const auto& [a, sh] : inserted) {
        a2.push_back(a);
        s2.push_back(sh);
      }
    }
    alphas_ = std::move(a2);
    scan_ = std::move(s2);
  }

  std::string scanned_windings() const {
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& s : scan_)
      if (s.valid) {
        lo = std::min(lo, s.winding);
        hi = std::max(hi, s.winding);
      }
    if (lo > hi) return "none";
    return std::to_string(lo) + ".." + std::to_string(hi);
  }

  Metric metric_;
  BoundaryFrame frame_;
  BoundaryPoint x_;
  DistanceOptions opt_;
  double x_param_ = 0.0;
  std::vector<double> alphas_;
  std::vector<Shot> scan_;
};

/// Quadrature solver for warped annuli dt^2 + f(t)^2 dtheta^2 whose profile has
/// a single nondegenerate interior minimum (the core closed geodesic).
class ClairautSolver {
 public:
  explicit ClairautSolver(const WarpedMetric& w) : w_(w) {
    const double a = w.t_min, b = w.t_max;
    const auto& f = w.profile;
    const double fa = f.derivative(a, 1, Side::Right), fb = f.derivative(b, 1, Side::Left);
    if (!(fa < 0.0 && fb > 0.0)) return;
    // Locate f' = 0 by bisection, then Newton.
    double lo = a, hi = b;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      const double mid = 0.5 * (lo + hi);
      (f.derivative(mid, 1) < 0.0 ? lo : hi) = mid;
    }
    double tc = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
      const double d2 = f.derivative(tc, 2);
      if (d2 > 0.0) tc -= f.derivative(tc, 1) / d2;
    }
    // Monotone on both sides of the core.
    for (int i = 1; i < 400; ++i) {
      const double t = a + (b - a) * i / 400;
      const double d = f.derivative(t, 1);
      if (std::abs(t - tc) > 1e-6 * (b - a) && (t < tc ? d >= 0.0 : d <= 0.0)) return;
    }
    tc_ = tc;
    fc_ = f(tc);
    const int order = std::min(6, f.max_order());
    const auto tay = f.taylor(tc, order);
    a_.assign(7, 0.0);
    for (int k = 2; k <= order; ++k) a_[k] = tay[k];
    if (!(a_[2] > 0.0)) return;
    taylor_order_ = order;
    applicable_ = true;
  }

  bool applicable() const { return applicable_; }
  double core() const { return tc_; }
  double core_value() const { return fc_; }
  double core_length() const { return fc_ * w_.period; }

  struct Orbit {
    double dtheta = 0.0;  // angular advance for a positive Clairaut constant
    double length = 0.0;
  };

  /// Orbit from boundary component `comp` turning back with |c| = f_c + excess.
  Orbit turning(int comp, double excess) const {
    const int s = comp == 0 ? -1 : 1;
    const double tb = comp == 0 ? w_.t_min : w_.t_max;
    const double tau_end = s * (tb - tc_);
    const double c = fc_ + excess;
    const double tau_star = solve_tau(s, excess, tau_end);
    std::vector<double> b;  // Taylor coefficients at the turning point
    if (tau_star > kZone) b = w_.profile.taylor(tc_ + s * tau_star, std::min(6, w_.profile.max_order()));
    auto f_minus_c = [&](double tau, double gap) {
      // gap = tau - tau_star >= 0, supplied without cancellation
      if (tau <= kZone) {
        double sum = 0.0;
        for (int k = 2; k <= taylor_order_; ++k) {
          double inner = 0.0;
          for (int j = 0; j < k; ++j) inner += std::pow(tau, k - 1 - j) * std::pow(tau_star, j);
          sum += a_[k] * std::pow(static_cast<double>(s), k) * inner;
        }
        return gap * sum;
      }
      if (!b.empty() && gap <= kZone) {
        double sum = 0.0, p = 1.0;
        for (std::size_t k = 1; k < b.size(); ++k) {
          p *= s * gap;
          sum += b[k] * p;
        }
        return sum;
      }
      return w_.profile(tc_ + s * tau) - c;
    };
    const double W = std::acosh(tau_end / tau_star);
    Orbit o;
    integrate_w(W, [&](double wv, double& dth, double& len) {
      const double tau = tau_star * std::cosh(wv);
      const double sh = std::sinh(0.5 * wv);
      const double gap = 2.0 * tau_star * sh * sh;
      const double f = w_.profile(tc_ + s * tau);
      const double root = std::sqrt(f_minus_c(tau, gap) * (f + c));
      const double jac = tau_star * std::sinh(wv);
      dth = jac * c / (f * root);
      len = jac * f / root;
    }, o);
    o.dtheta *= 2.0;
    o.length *= 2.0;
    return o;
  }

  /// Orbit crossing from one boundary component to the other with |c| = f_c - deficit.
  Orbit crossing(double deficit) const {
    const double c = fc_ - deficit;
    Orbit total;
    if (deficit >= fc_) {
      total.length = w_.t_max - w_.t_min;
      return total;
    }
    const double sigma = std::sqrt(deficit / a_[2]);
    for (int s : {-1, 1}) {
      const double tau_end = s * ((s < 0 ? w_.t_min : w_.t_max) - tc_);
      const double W = std::asinh(tau_end / sigma);
      Orbit o;
      integrate_w(W, [&](double wv, double& dth, double& len) {
        const double tau = sigma * std::sinh(wv);
        const double f = w_.profile(tc_ + s * tau);
        const double fmc = tau <= kZone ? core_offset(s, tau) + deficit : f - c;
        const double root = std::sqrt(fmc * (f + c));
        const double jac = sigma * std::cosh(wv);
        dth = jac * c / (f * root);
        len = jac * f / root;
      }, o);
      total.dtheta += o.dtheta;
      total.length += o.length;
    }
    return total;
  }

  DistanceSample solve(BoundaryPoint x, BoundaryPoint y, MarkedClass cls, double tol = 1e-10) const {
    if (!applicable_) throw std::invalid_argument("profile has no single nondegenerate core");
    DistanceSample out = DistanceSample::of(x, y, cls);
    out.method = "clairaut";
    const double P = w_.period;
    const double fx = w_.profile(x.component == 0 ? w_.t_min : w_.t_max);
    const double fy = w_.profile(y.component == 0 ? w_.t_min : w_.t_max);
    const double theta_x = x.s / fx, theta_y = y.s / fy;
    const double target = std::remainder(theta_y - theta_x, P) + cls.n * P;
    const double sign = target < 0.0 ? -1.0 : 1.0;
    const bool same = x.component == y.component;
    if (same && target == 0.0) throw std::invalid_argument("constant loop is not a geodesic");
    double c_abs;
    Orbit orbit;
    if (!same && target == 0.0) {
      orbit = crossing(fc_);
      c_abs = 0.0;
    } else {
      const double goal = std::abs(target);
      const double max_excess = fx - fc_;
      auto advance = [&](double u) {
        const double e = std::exp(u);
        return (same ? turning(x.component, e) : crossing(e)).dtheta;
      };
      const double u_lo = std::log(1e-300);
      const double u_hi = std::log(same ? max_excess * (1.0 - 1e-12) : fc_ * (1.0 - 1e-15));
      const double g_lo = advance(u_lo) - goal;
      if (g_lo < 0.0) throw NoBracket("class " + cls.label() + " lies beyond the resolvable Clairaut range");
      const double g_hi = advance(u_hi) - goal;
      double u;
      if (g_hi >= 0.0) {
        u = u_hi;
      } else {
        std::uintmax_t iters = 300;
        const auto r = boost::math::tools::toms748_solve(
            [&](double v) { return advance(v) - goal; }, u_lo, u_hi, g_lo, g_hi,
            [](double lo, double hi) { return std::abs(hi - lo) <= 4e-16 * std::max(1.0, std::abs(lo)); }, iters);
        u = 0.5 * (r.first + r.second);
      }
      const double e = std::exp(u);
      orbit = same ? turning(x.component, e) : crossing(e);
      c_abs = same ? fc_ + e : fc_ - e;
      out.core_gap = e;
      out.residual = std::abs(orbit.dtheta - goal) * fy;
    }
    if (std::isnan(out.residual)) out.residual = 0.0;
    out.length = orbit.length;
    out.clairaut = sign * c_abs;
    out.shooting_angle = std::asin(std::clamp(sign * c_abs / fx, -1.0, 1.0));
    if (out.residual > tol) out.error = "terminal miss above tolerance";
    return out;
  }

 private:
  static constexpr double kZone = 1e-3;

  /// f(t_c + s tau) - f_c.
  double core_offset(int s, double tau) const {
    if (tau <= kZone) {
      const double st = s * tau;
      double sum = 0.0, p = st;
      for (int k = 2; k <= taylor_order_; ++k) {
        p *= st;
        sum += a_[k] * p;
      }
      return sum;
    }
    return w_.profile(tc_ + s * tau) - fc_;
  }

  double solve_tau(int s, double excess, double tau_end) const {
    double lo = 0.0, hi = tau_end;
    double tau = std::min(std::sqrt(excess / a_[2]), 0.5 * tau_end);
    for (int it = 0; it < 200; ++it) {
      const double g = core_offset(s, tau) - excess;
      (g < 0.0 ? lo : hi) = tau;
      const double d = s * w_.profile.derivative(tc_ + s * tau, 1);
      const double dd = tau <= kZone ? 2.0 * a_[2] * tau : d;
      double next = dd > 0.0 ? tau - g / dd : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - tau) <= 1e-16 * tau) return next;
      tau = next;
    }
    return tau;
  }

  template <class F>
  void integrate_w(double W, F&& integrand, Orbit& o) const {
    const int panels = std::max(4, static_cast<int>(std::ceil(W / 0.25)));
    using GL = boost::math::quadrature::gauss<double, 10>;
    const auto& x = GL::abscissa();
    const auto& wts = GL::weights();
    for (int p = 0; p < panels; ++p) {
      const double a = W * p / panels, b = W * (p + 1) / panels;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (int sgn : {-1, 1}) {
          if (i == 0 && sgn < 0 && x[0] == 0.0) continue;
          double dth, len;
          integrand(mid + sgn * half * x[i], dth, len);
          o.dtheta += half * wts[i] * dth;
          o.length += half * wts[i] * len;
        }
      }
    }
  }

  WarpedMetric w_;
  bool applicable_ = false;
  double tc_ = 0.0, fc_ = 0.0;
  int taylor_order_ = 2;
  std::vector<double> a_;
};

/// Length of the geodesic from x to y in the marked class c.
inline DistanceSample marked_distance(const Metric& m, BoundaryPoint x, BoundaryPoint y, MarkedClass c,
                                      DistanceOptions opt = {}) {
  const bool annulus = m.chart().kind == ChartKind::Collar;
  if (annulus && !c.has_winding) c = MarkedClass::winding(0);
  if ((opt.method == DistanceMethod::Auto || opt.method == DistanceMethod::Clairaut) && annulus && m.warped()) {
    const ClairautSolver cs(*m.warped());
    if (cs.applicable()) return cs.solve(x, y, c, opt.tol);
    if (opt.method == DistanceMethod::Clairaut) throw std::invalid_argument("Clairaut solver not applicable");
  }
  return ShootingSolver(m, x, opt).solve(y, c);
}

using DistanceQuery = std::tuple<BoundaryPoint, BoundaryPoint, MarkedClass>;

/// Elementwise marked distances in input order; shooting scans are shared
/// between queries with the same source point.
inline std::vector<DistanceSample> distance_table(const Metric& m, const std::vector<DistanceQuery>& grid,
                                                  DistanceOptions opt = {}, int threads = 1) {
  std::vector<DistanceSample> out(grid.size());
  const bool annulus = m.chart().kind == ChartKind::Collar;
  std::optional<ClairautSolver> clairaut;
  if (annulus && m.warped() && opt.method != DistanceMethod::Shooting) {
    clairaut.emplace(*m.warped());
    if (!clairaut->applicable()) clairaut.reset();
  }
  std::map<std::pair<int, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const BoundaryPoint& x = std::get<0>(grid[i]);
    groups[{x.component, x.s}].push_back(i);
  }
  std::vector<std::vector<std::size_t>> work;
  for (auto& [key, idx] : groups) work.push_back(idx);
  parallel_for(work.size(), threads, [&](std::size_t g) {
    const auto& idx = work[g];
    std::optional<ShootingSolver> shooter;
    for (std::size_t i : idx) {
      auto [x, y, c] = grid[i];
      if (annulus && !c.has_winding) c = MarkedClass::winding(0);
      try {
        if (clairaut) {
          out[i] = clairaut->solve(x, y, c, opt.tol);
        } else {
          if (!shooter) shooter.emplace(m, x, opt);
          out[i] = shooter->solve(y, c);
        }
      } catch (const std::exception& e) {
        out[i] = DistanceSample::of(x, y, c);
        out[i].error = e.what();
      }
    }
  });
  return out;
}

/// Entry of a lens sample: boundary component, arc length, angle from the inward normal.
struct BoundaryEntry {
  int component = 0;
  double s = 0.0;
  double alpha = 0.0;
};

struct ClassDiscrepancy {
  int winding = 0;
  long samples = 0;
  double exit_position = 0.0;
  double exit_angle = 0.0;
  double travel_time = 0.0;
};

struct LensComparison {
  long samples = 0;
  long trapped_mismatch = 0;
  long class_mismatch = 0;
  long failures = 0;
  double exit_position = 0.0;
  double exit_angle = 0.0;
  double travel_time = 0.0;
  std::vector<ClassDiscrepancy> per_class;

  double sup() const { return std::max({exit_position, exit_angle, travel_time}); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["samples"] = samples;
    j["trapped_mismatch"] = trapped_mismatch;
    j["class_mismatch"] = class_mismatch;
    j["failures"] = failures;
    j["sup_exit_position"] = exit_position;
    j["sup_exit_angle"] = exit_angle;
    j["sup_travel_time"] = travel_time;
    j["per_class"] = nlohmann::json::array();
    for (const auto& c : per_class)
      j["per_class"].push_back({{"winding", c.winding},
                                {"samples", c.samples},
                                {"sup_exit_position", c.exit_position},
                                {"sup_exit_angle", c.exit_angle},
                                {"sup_travel_time", c.travel_time}});
    return j;
  }
};

/// Largest entry difference |g1 - g2| over boundary sample points.
inline double boundary_metric_gap(const Metric& a, const Metric& b, int nodes = 256) {
  if (!a.chart().same_as(b.chart())) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  const Chart& c = a.chart();
  for (int comp = 0; comp < c.components(); ++comp) {
    const Side side = c.kind == ChartKind::Collar && comp == 0 ? Side::Right : Side::Left;
    for (int i = 0; i < nodes; ++i) {
      const double u = 2.0 * std::numbers::pi * i / nodes;
      const ChartPoint p = c.kind == ChartKind::Disk
                               ? ChartPoint{c.radius * std::cos(u), c.radius * std::sin(u)}
                               : ChartPoint{comp == 0 ? c.t_min : c.t_max, c.period * i / nodes};
      gap = std::max(gap, (a.at(p, side) - b.at(p, side)).cwiseAbs().maxCoeff());
    }
  }
  return gap;
}

/// Compares exit point, exit angle and travel time of both metrics per sample
/// and winding class. Refuses when the metrics differ on the boundary.
inline LensComparison lens_compare(const Metric& m1, const Metric& m2, const std::vector<BoundaryEntry>& samples,
                                   const std::vector<int>& classes = {}, double t_max = 100.0, double tol = 1e-11,
                                   int threads = 1, double boundary_tol = 1e-10) {
  const double gap = boundary_metric_gap(m1, m2);
  if (!(gap <= boundary_tol))
    throw std::invalid_argument("boundary metrics differ by " + std::to_string(gap) + "; refusing comparison");
  const BoundaryFrame f1(m1), f2(m2);
  std::vector<UnitTangent> in1, in2;
  for (const auto& e : samples) {
    in1.push_back(f1.inward_state(e.component, e.s, e.alpha));
    in2.push_back(f2.inward_state(e.component, e.s, e.alpha));
  }
  const auto r1 = lens_data(m1, in1, t_max, tol, threads);
  const auto r2 = lens_data(m2, in2, t_max, tol, threads);
  LensComparison rep;
  std::map<int, ClassDiscrepancy> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LensRecord& a = r1[i];
    const LensRecord& b = r2[i];
    if (!a.ok() || !b.ok()) {
      ++rep.failures;
      continue;
    }
    if (!classes.empty() && std::find(classes.begin(), classes.end(), a.winding) == classes.end()) continue;
    ++rep.samples;
    if (a.trapped != b.trapped) {
      ++rep.trapped_mismatch;
      continue;
    }
    if (a.trapped) continue;
    if (a.winding != b.winding || a.exit_component != b.exit_component) {
      ++rep.class_mismatch;
      continue;
    }
    const BoundaryCurve& c = f1.curve(a.exit_component);
    const double ds = std::abs(std::remainder(c.arc_length(a.exit.base) - c.arc_length(b.exit.base), c.length()));
    const double da = std::abs(f1.angle(a.exit, false) - f2.angle(b.exit, false));
    const double dt = std::abs(a.travel_time - b.travel_time);
    ClassDiscrepancy& cd = by_class[a.winding];
    cd.winding = a.winding;
    ++cd.samples;
    cd.exit_position = std::max(cd.exit_position, ds);
    cd.exit_angle = std::max(cd.exit_angle, da);
    cd.travel_time = std::max(cd.travel_time, dt);
    rep.exit_position = std::max(rep.exit_position, ds);
    rep.exit_angle = std::max(rep.exit_angle, da);
    rep.travel_time = std::max(rep.travel_time, dt);
  }
  for (auto& [w, cd] : by_class) rep.per_class.push_back(cd);
  return rep;
}

}  // namespace anosov
