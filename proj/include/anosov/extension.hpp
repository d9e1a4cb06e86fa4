#pragma once

// Rotationally symmetric collar attached to a strictly convex boundary circle.
// The metric is dt^2 + w(t) ds^2 on [-delta0, 4] x S^1 with
//   [-delta0, 0]       equidistant band, w = f^2 for the continued input profile
//   [0, 1 + eps]       w = rho(t - eps) r0^2 + f_l(t) c
//   [1 + eps, 2 + 2eps] w = f_l(t) (rho(t - 1 - eps) c + 1 - rho(t - 1 - eps))
//   [2 + 2eps, 4]      w = (sinh(kappa (t + r)) / kappa)^2
// where c = 2 kappa0 r0^2 and f_l(t) = (e^{l t} - 1) / l.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include "anosov/jet.hpp"
#include "anosov/metric.hpp"
#include "anosov/parallel.hpp"
#include "anosov/profile.hpp"

namespace anosov {

inline constexpr int kCollarOrder = kMaxProfileOrder;
using CollarJet = Jet<1, kCollarOrder>;
using CollarTaylor = std::array<double, kCollarOrder + 1>;

/// Smooth nonincreasing step, 1 on (-inf, 0] and 0 on [1, inf).
template <class T>
T smooth_step(const T& x) {
  using std::exp;
  // exp(-700) is below double resolution relative to 1.
  constexpr double kFlat = 1.0 / 700.0;
  const double v = value_of(x);
  if (v <= kFlat) return T(1.0);
  if (v >= 1.0 - kFlat) return T(0.0);
  const T a = exp(-1.0 / (1.0 - x));
  const T b = exp(-1.0 / x);
  return a / (a + b);
}

/// (e^{l t} - 1) / l, evaluated through expm1.
template <class T>
T f_ell(double ell, const T& t) {
  using std::expm1;
  if (!(ell > 0.0)) throw std::invalid_argument("f_ell needs ell > 0");
  return expm1(ell * t) / ell;
}

struct CollarSpec {
  double delta0 = 0.05;
  double epsilon = 0.1;
  double ell = 8.0;
  double delta = 0.04;
  double r0 = 1.0;
  double kappa0 = 1.0;
  double period = 2.0 * std::numbers::pi;

  double tail_joint() const { return 2.0 + 2.0 * epsilon; }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("collar spec: ") + what);
    };
    need(delta0 > 0.0, "delta0 must be positive");
    need(epsilon > 0.0, "epsilon must be positive");
    need(ell > 0.0, "ell must be positive");
    need(delta > 0.0, "delta must be positive");
    need(delta < 0.5 * epsilon, "delta must be below epsilon / 2");
    need(r0 > 0.0, "r0 must be positive");
    need(kappa0 > 0.0, "kappa0 must be positive (strictly convex boundary)");
    need(period > 0.0, "period must be positive");
    need(tail_joint() + delta < 4.0, "tail joint plus delta must stay below t = 4");
  }
};

struct TailParams {
  double kappa = 0.0;
  double r_tilde = 0.0;
  int iterations = 0;
  double value_residual = 0.0;  // relative
  double slope_residual = 0.0;  // relative
};

class TailMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvexityLost : public std::runtime_error {
 public:
  ConvexityLost(double t, double max_delta0)
      : std::runtime_error("equidistant circles lose convexity at t = " + std::to_string(t) +
                           "; largest admissible delta0 = " + std::to_string(max_delta0)),
        max_delta0(max_delta0) {}
  double max_delta0;
};

/// Matches sinh(kappa (T + r)) / kappa = value and cosh(kappa (T + r)) = slope
/// by damped Newton iteration in (kappa, r).
inline TailParams solve_tail(double value, double slope, double T, double tol = 1e-15, int max_iter = 100) {
  if (!(value > 0.0)) throw TailMismatch("tail matching needs a positive profile value, got " + std::to_string(value));
  if (!(slope > 1.0))
    throw TailMismatch("no hyperbolic funnel matches: profile slope " + std::to_string(slope) +
                       " must exceed 1 (value " + std::to_string(value) + ")");
  auto residual = [&](double k, double r) {
    const double x = k * (T + r);
    return std::array<double, 2>{(std::sinh(x) / k - value) / value, (std::cosh(x) - slope) / slope};
  };
  auto size = [](const std::array<double, 2>& F) { return std::max(std::abs(F[0]), std::abs(F[1])); };
  TailParams p;
  double k = slope / value;
  double r = std::asinh(k * value) / k - T;
  auto F = residual(k, r);
  for (int it = 1; it <= max_iter && size(F) > tol; ++it) {
    const double x = k * (T + r), s = std::sinh(x), c = std::cosh(x);
    // rows scaled like the residual
    const double a11 = (c * x / k / k - s / (k * k)) / value, a12 = c / value;
    const double a21 = s * x / k / slope, a22 = s * k / slope;
    const double det = a11 * a22 - a12 * a21;
    if (!(std::abs(det) > 0.0)) throw TailMismatch("singular tail Jacobian");
    const double dk = (-F[0] * a22 + F[1] * a12) / det;
    const double dr = (-F[1] * a11 + F[0] * a21) / det;
    double lam = 1.0;
    for (int b = 0; b < 60; ++b, lam *= 0.5) {
      const double kn = k + lam * dk;
      if (!(kn > 0.0)) continue;
      const auto Fn = residual(kn, r + lam * dr);
      if (std::isfinite(size(Fn)) && size(Fn) < size(F)) {
        k = kn;
        r += lam * dr;
        F = Fn;
        break;
      }
    }
    p.iterations = it;
    if (lam < 1e-16) break;
  }
  if (!(size(F) <= 1e-12))
    throw TailMismatch("tail Newton iteration stalled at relative residual " + std::to_string(size(F)));
  if (!(r > -T)) throw TailMismatch("tail offset " + std::to_string(r) + " violates r > -T");
  p.kappa = k;
  p.r_tilde = r;
  p.value_residual = std::abs(F[0]);
  p.slope_residual = std::abs(F[1]);
  return p;
}

namespace detail {

inline const std::vector<std::pair<double, double>>& gauss_rule() {
  static const std::vector<std::pair<double, double>> rule = [] {
    using G = boost::math::quadrature::gauss<double, 30>;
    std::vector<std::pair<double, double>> r;
    for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
      r.emplace_back(G::abscissa()[i], G::weights()[i]);
      if (G::abscissa()[i] != 0.0) r.emplace_back(-G::abscissa()[i], G::weights()[i]);
    }
    return r;
  }();
  return rule;
}

inline CollarJet jet_from(const CollarTaylor& c) {
  CollarJet j;
  for (int k = 0; k <= kCollarOrder; ++k) j.coeff_ref(k) = c[static_cast<std::size_t>(k)];
  return j;
}

// Polynomial mollifier (1 - (s/r)^2)^p; C^{p-1} with compact support.
inline constexpr int kMollifierPower = 10;

}  // namespace detail

/// Piecewise definition of w(t) with tagged joints. Pieces must be evaluable a
/// little beyond their interval so that joint mollification can read them.
struct PiecewiseProfile {
  std::vector<double> breakpoints;
  std::vector<Profile> pieces;
  std::vector<JointTag> tags;  // one per interior breakpoint
  double mollifier = 0.0;      // neighborhood half-width for Mollified joints

  double t_min() const { return breakpoints.front(); }
  double t_max() const { return breakpoints.back(); }

  std::size_t piece_at(double t, Side side) const {
    const double scale = 1e-12 * std::max(1.0, t_max() - t_min());
    for (std::size_t j = 1; j + 1 < breakpoints.size(); ++j)
      if (std::abs(t - breakpoints[j]) <= scale) return side == Side::Left ? j - 1 : j;
    std::size_t k = 0;
    while (k + 1 < pieces.size() && t >= breakpoints[k + 1]) ++k;
    return k;
  }

  /// Taylor coefficients of the unmollified piece at t.
  CollarTaylor raw_taylor(double t, Side side = Side::Auto) const {
    const Profile& p = pieces[piece_at(t, side)];
    const auto c = p.taylor(t, std::min(kCollarOrder, p.max_order()), side);
    CollarTaylor out{};
    std::copy(c.begin(), c.end(), out.begin());
    return out;
  }

  /// Taylor coefficients of w at t, mollified near tagged joints.
  CollarTaylor taylor(double t, Side side = Side::Auto) const {
    const CollarTaylor raw = raw_taylor(t, side);
    for (std::size_t j = 0; j < tags.size(); ++j) {
      if (tags[j] != JointTag::Mollified) continue;
      const double b = breakpoints[j + 1], d = t - b;
      if (std::abs(d) >= mollifier) continue;
      const double half = 0.5 * mollifier;
      const CollarJet x = CollarJet::variable(t);
      const CollarJet beta = smooth_step(((d >= 0.0 ? x - b : b - x) - half) / half);
      if (beta.value() == 0.0) continue;
      const CollarJet r = detail::jet_from(raw);
      const CollarJet m = detail::jet_from(convolve(t, b, half));
      return (r + beta * (m - r)).coefficients();
    }
    return raw;
  }

  double w(double t, Side side = Side::Auto) const { return taylor(t, side)[0]; }
  double dw(double t, Side side = Side::Auto) const { return taylor(t, side)[1]; }
  double d2w(double t, Side side = Side::Auto) const {
    check_side(t, side);
    return 2.0 * taylor(t, side)[2];
  }

  /// Gaussian curvature -f''/f with f = sqrt(w).
  double curvature(double t, Side side = Side::Auto) const {
    check_side(t, side);
    const CollarJet f = sqrt(detail::jet_from(taylor(t, side)));
    return -2.0 * f.coeff(2) / f.coeff(0);
  }

  /// Interior joints that are only C^{1,1}.
  std::vector<double> rough_joints() const {
    std::vector<double> out;
    for (std::size_t j = 0; j < tags.size(); ++j)
      if (tags[j] == JointTag::C11) out.push_back(breakpoints[j + 1]);
    return out;
  }

  /// The circumference profile f = sqrt(w).
  Profile circumference() const;

  WarpedMetric warped(double period = 2.0 * std::numbers::pi) const {
    return WarpedMetric{circumference(), t_min(), t_max(), period};
  }

 private:
  void check_side(double t, Side side) const {
    if (side != Side::Auto) return;
    const double scale = 1e-12 * std::max(1.0, t_max() - t_min());
    for (double b : rough_joints())
      if (std::abs(t - b) <= scale) throw JointError(b);
  }

  /// Coefficients of (w * eta)(t) with eta supported in [-r, r], reading the
  /// pieces on either side of the joint b. Derivatives beyond the second are
  /// moved onto the kernel since w is only C^{1,1} at b.
  CollarTaylor convolve(double t, double b, double r) const {
    using KJet = Jet<1, kCollarOrder>;
    const double split = std::clamp(t - b, -r, r);
    CollarTaylor acc{};
    double norm = 0.0;
    // s in [lo, hi]; t - s lies right of b when s < t - b.
    auto segment = [&](double lo, double hi, Side side) {
      if (!(hi > lo)) return;
      for (const auto& [x, wq] : detail::gauss_rule()) {
        const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
        const double q = 0.5 * (hi - lo) * wq;
        const KJet u = KJet::variable(s) / r;
        const KJet eta = pow(1.0 - u * u, static_cast<double>(detail::kMollifierPower));
        const double eta0 = std::pow(std::max(0.0, 1.0 - (s / r) * (s / r)), detail::kMollifierPower);
        const CollarTaylor c = raw_taylor(t - s, side);
        norm += q * eta0;
        // k! c_k = sum over j = min(k, 2): j! a_j (k - j)! e_{k-j}
        double kf = 1.0;
        for (int k = 0; k <= kCollarOrder; ++k) {
          if (k > 0) kf *= k;
          const int j = std::min(k, 2);
          double jf = j == 2 ? 2.0 : 1.0, mf = 1.0;
          for (int i = 2; i <= k - j; ++i) mf *= i;
          const double e = k - j == 0 ? eta0 : eta.coeff(k - j);
          acc[static_cast<std::size_t>(k)] += q * jf * c[static_cast<std::size_t>(j)] * mf * e / kf;
        }
      }
    };
    segment(-r, split, Side::Right);
    segment(split, r, Side::Left);
    for (double& v : acc) v /= norm;
    return acc;
  }
};

namespace detail {

class CircumferenceModel final : public ProfileModel {
 public:
  explicit CircumferenceModel(::anosov::PiecewiseProfile w) : w_(std::move(w)) {}
  void taylor(double t, int order, Side side, std::span<double> out) const override {
    if (order >= 2 && side == Side::Auto) {
      const double scale = 1e-12 * std::max(1.0, w_.t_max() - w_.t_min());
      for (double b : w_.rough_joints())
        if (std::abs(t - b) <= scale) throw JointError(b);
    }
    const CollarJet f = sqrt(jet_from(w_.taylor(t, side)));
    for (int k = 0; k <= order; ++k) out[static_cast<std::size_t>(k)] = f.coeff(k);
  }
  int max_order() const override { return kCollarOrder; }

 private:
  ::anosov::PiecewiseProfile w_;
};

}  // namespace detail

inline Profile PiecewiseProfile::circumference() const {
  return Profile::from_model(std::make_shared<detail::CircumferenceModel>(*this), rough_joints());
}

/// Marks every C^{1,1} joint as mollified with neighborhood half-width delta.
/// Values outside the neighborhoods are left untouched.
inline PiecewiseProfile mollify_joints(const PiecewiseProfile& p, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("mollification width must be positive");
  PiecewiseProfile out = p;
  for (std::size_t j = 0; j < p.tags.size(); ++j) {
    if (p.tags[j] != JointTag::C11) continue;
    const double b = p.breakpoints[j + 1];
    for (std::size_t i = 0; i < p.breakpoints.size(); ++i)
      if (i != j + 1 && std::abs(p.breakpoints[i] - b) <= delta)
        throw std::invalid_argument("mollification neighborhood of joint t = " + std::to_string(b) +
                                    " reaches breakpoint t = " + std::to_string(p.breakpoints[i]));
    out.tags[j] = JointTag::Mollified;
  }
  out.mollifier = delta;
  return out;
}

/// Continues the profile past t_max by solving f'' = -K f with K replaced by
/// its Taylor polynomial at t_max, then checks that the circles in the new
/// band stay strictly convex with geodesic curvature at least half the
/// boundary value.
inline WarpedMetric equidistant_extend(const WarpedMetric& m, double delta0) {
  if (!(delta0 > 0.0)) throw std::invalid_argument("delta0 must be positive");
  const double b = m.t_max;
  const int order = std::min(kCollarOrder, m.profile.max_order());
  const auto fc = m.profile.taylor(b, order, Side::Left);
  if (!(fc[0] > 0.0)) throw GeometryError("profile not positive at the boundary");
  if (!(fc[1] > 0.0))
    throw std::invalid_argument("boundary circle is not strictly convex: f'(t_max) = " + std::to_string(fc[1]));
  // K = -f''/f as a series in s = t - b, degree order - 2.
  const int kdeg = std::max(0, order - 2);
  std::vector<double> K(static_cast<std::size_t>(kdeg) + 1, 0.0);
  {
    CollarJet F, D2;
    for (int k = 0; k <= order; ++k) F.coeff_ref(k) = fc[static_cast<std::size_t>(k)];
    for (int k = 0; k + 2 <= order; ++k) D2.coeff_ref(k) = (k + 2.0) * (k + 1.0) * fc[static_cast<std::size_t>(k + 2)];
    const CollarJet q = D2 / F;
    for (int k = 0; k <= kdeg; ++k) K[static_cast<std::size_t>(k)] = -q.coeff(k);
  }
  constexpr int kTerms = 80;
  std::vector<double> c(kTerms + 1, 0.0);
  c[0] = fc[0];
  c[1] = fc[1];
  for (int n = 0; n + 2 <= kTerms; ++n) {
    double s = 0.0;
    for (int j = 0; j <= std::min(n, kdeg); ++j) s += K[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(n - j)];
    c[static_cast<std::size_t>(n + 2)] = -s / ((n + 2.0) * (n + 1.0));
  }
  auto continuation = Profile::from_callable([c, b](const auto& t) {
    using T = std::decay_t<decltype(t)>;
    const T s = t - b;
    T r(c.back());
    for (int k = static_cast<int>(c.size()) - 2; k >= 0; --k) r = r * s + c[static_cast<std::size_t>(k)];
    return r;
  });
  const double kappa_b = fc[1] / fc[0];
  auto margin = [&](double t) {
    const auto v = continuation.taylor(t, 1);
    return std::min(v[1], v[1] / v[0] - 0.5 * kappa_b);
  };
  constexpr int kSamples = 2000;
  double good = b;
  for (int i = 1; i <= kSamples; ++i) {
    const double t = b + delta0 * i / kSamples;
    if (!(margin(t) >= 0.0) || !(continuation(t) > 0.0)) {
      double lo = good, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (margin(mid) >= 0.0 ? lo : hi) = mid;
      }
      throw ConvexityLost(t, lo - b);
    }
    good = t;
  }
  WarpedMetric out = m;
  out.profile = Profile::piecewise({m.t_min, b, b + delta0}, {m.profile, continuation}, {JointTag::Smooth});
  out.t_max = b + delta0;
  return out;
}

struct Collar {
  CollarSpec spec;
  TailParams tail;
  PiecewiseProfile profile;
  Profile band;  // circumference on [-delta0, 0]

  WarpedMetric warped() const { return profile.warped(spec.period); }
};

/// Assembles w on [-delta0, 4]. `band` is the circumference profile on the
/// equidistant band in collar coordinates (boundary of the band at t = 0).
inline Collar build_collar(const CollarSpec& spec, const Profile& band) {
  spec.validate();
  const auto bc = band.taylor(0.0, 1, Side::Left);
  if (std::abs(bc[0] - spec.r0) > 1e-10 * std::max(1.0, spec.r0))
    throw std::invalid_argument("band profile value at t = 0 does not match r0");
  if (std::abs(bc[1] / bc[0] - spec.kappa0) > 1e-10 * std::max(1.0, spec.kappa0))
    throw std::invalid_argument("band profile curvature at t = 0 does not match kappa0");
  const double eps = spec.epsilon, ell = spec.ell, r0sq = spec.r0 * spec.r0;
  const double c = 2.0 * spec.kappa0 * r0sq;
  const double T = spec.tail_joint();

  Collar out;
  out.spec = spec;
  out.band = band;
  auto w1 = Profile::from_callable(
      [band](const auto& t) {
        const auto f = band(t);
        return f * f;
      },
      band.max_order());
  auto w2 = Profile::from_callable([=](const auto& t) { return smooth_step(t - eps) * r0sq + f_ell(ell, t) * c; });
  auto w3 = Profile::from_callable([=](const auto& t) {
    const auto r = smooth_step(t - 1.0 - eps);
    return f_ell(ell, t) * (r * c + (1.0 - r));
  });
  const auto t3 = w3.taylor(T, 1);
  const double value = std::sqrt(t3[0]);
  out.tail = solve_tail(value, t3[1] / (2.0 * value), T);
  const double kappa = out.tail.kappa, rt = out.tail.r_tilde;
  auto w4 = Profile::from_callable([=](const auto& t) {
    using std::sinh;
    const auto s = sinh(kappa * (t + rt)) / kappa;
    return s * s;
  });

  PiecewiseProfile& p = out.profile;
  p.breakpoints = {-spec.delta0, 0.0, 1.0 + eps, T, 4.0};
  p.pieces = {w1, w2, w3, w4};
  p.tags.assign(3, JointTag::Smooth);
  for (std::size_t j = 0; j < 3; ++j) {
    const double b = p.breakpoints[j + 1];
    const double jump = std::abs(p.raw_taylor(b, Side::Left)[2] - p.raw_taylor(b, Side::Right)[2]);
    if (jump > 1e-9 * std::max(1.0, std::abs(p.raw_taylor(b, Side::Right)[2]))) p.tags[j] = JointTag::C11;
  }
  for (int i = 0; i <= 4000; ++i) {
    const double t = p.t_min() + (p.t_max() - p.t_min()) * i / 4000.0;
    if (!(p.raw_taylor(t, Side::Right)[0] > 0.0)) throw GeometryError("collar profile not positive at t = " + std::to_string(t));
  }
  return out;
}

/// Collar over the exponential band f = r0 e^{kappa0 t}, whose circles all have
/// geodesic curvature kappa0.
inline Collar build_collar(const CollarSpec& spec) {
  const double r0 = spec.r0, k0 = spec.kappa0;
  return build_collar(spec, Profile::from_callable([=](const auto& t) {
                        using std::exp;
                        return r0 * exp(k0 * t);
                      }));
}

/// Collar over an extended warped metric whose outer circle (t_max) is the
/// boundary of the enlarged surface.
inline Collar collar_from_extension(const WarpedMetric& extended, double delta0, double epsilon, double ell,
                                    double delta) {
  const double b = extended.t_max;
  const auto fc = extended.profile.taylor(b, 1, Side::Left);
  CollarSpec spec{delta0, epsilon, ell, delta, fc[0], fc[1] / fc[0], extended.period};
  const Profile f = extended.profile;
  auto band = Profile::from_callable([f, b](const auto& t) { return f(t + b); }, f.max_order());
  return build_collar(spec, band);
}

struct JointResidual {
  double t = 0.0;
  double value = 0.0;  // |w(b-) - w(b+)| / max(1, |w(b)|)
  double slope = 0.0;  // |w'(b-) - w'(b+)| / max(1, |w'(b)|)
  double second_jump = 0.0;
  JointTag tag = JointTag::Smooth;
};

struct CollarCertificate {
  double ell = 0.0;
  double kappa = 0.0;
  double r_tilde = 0.0;
  bool mollified = false;
  std::vector<double> t, K;  // samples on [0, 4]
  double k_min = 0.0, k_max = 0.0;
  double k_max_outer = 0.0;  // max K on [epsilon, 4]
  bool negative_outer = false;
  double region4_defect = 0.0;  // max |K + kappa^2| on the tail away from mollification
  double band_min_slope = 0.0;  // min f' on [-delta0, 0]
  double band_min_ratio = 0.0;  // min (f'/f) / kappa0 on the band
  bool band_convex = false;
  double w_min = 0.0;
  std::vector<JointResidual> joints;

  double max_c1_residual() const {
    double r = 0.0;
    for (const auto& j : joints) r = std::max({r, j.value, j.slope});
    return r;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["ell"] = ell;
    j["kappa"] = kappa;
    j["r_tilde"] = r_tilde;
    j["mollified"] = mollified;
    j["K_min"] = k_min;
    j["K_max"] = k_max;
    j["K_max_outer"] = k_max_outer;
    j["negative_outer"] = negative_outer;
    j["region4_defect"] = region4_defect;
    j["band_min_slope"] = band_min_slope;
    j["band_min_ratio"] = band_min_ratio;
    j["band_convex"] = band_convex;
    j["w_min"] = w_min;
    j["max_c1_residual"] = max_c1_residual();
    for (const auto& r : joints)
      j["joints"].push_back({{"t", r.t}, {"value", r.value}, {"slope", r.slope}, {"second_jump", r.second_jump}});
    return j;
  }

  std::string text() const {
    std::ostringstream os;
    os.precision(6);
    os << "ell " << ell << ": kappa " << kappa << ", r_tilde " << r_tilde << "\n"
       << "  K on [0,4]: min " << k_min << ", max " << k_max << "; on [eps,4] max " << k_max_outer
       << (negative_outer ? " (negative)" : " (NOT negative)") << "\n"
       << "  tail |K + kappa^2| max " << region4_defect << "\n"
       << "  band: min f' " << band_min_slope << ", min curvature ratio " << band_min_ratio
       << (band_convex ? " (convex)" : " (NOT convex)") << "\n"
       << "  C1 joint residual max " << max_c1_residual() << ", w min " << w_min << "\n";
    return os.str();
  }
};

inline CollarCertificate certify(const Collar& collar, int samples = 4000) {
  const PiecewiseProfile& p = collar.profile;
  const CollarSpec& s = collar.spec;
  CollarCertificate c;
  c.ell = s.ell;
  c.kappa = collar.tail.kappa;
  c.r_tilde = collar.tail.r_tilde;
  c.mollified = p.mollifier > 0.0;
  const double T = s.tail_joint();
  c.k_min = std::numeric_limits<double>::infinity();
  c.k_max = -c.k_min;
  c.k_max_outer = -c.k_min;
  for (int i = 0; i <= samples; ++i) {
    const double t = 4.0 * i / samples;
    const double K = p.curvature(t, Side::Right);
    c.t.push_back(t);
    c.K.push_back(K);
    c.k_min = std::min(c.k_min, K);
    c.k_max = std::max(c.k_max, K);
    if (t >= s.epsilon) c.k_max_outer = std::max(c.k_max_outer, K);
  }
  c.negative_outer = c.k_max_outer < 0.0;
  const double tail_start = T + (c.mollified ? p.mollifier : 0.0);
  for (int i = 0; i <= samples / 4; ++i) {
    const double t = tail_start + (4.0 - tail_start) * i / (samples / 4);
    c.region4_defect = std::max(c.region4_defect, std::abs(p.curvature(t, Side::Right) + c.kappa * c.kappa));
  }
  c.band_min_slope = c.band_min_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples / 4; ++i) {
    const double t = -s.delta0 * (1.0 - static_cast<double>(i) / (samples / 4));
    const auto f = collar.band.taylor(t, 1, Side::Left);
    c.band_min_slope = std::min(c.band_min_slope, f[1]);
    c.band_min_ratio = std::min(c.band_min_ratio, f[1] / f[0] / s.kappa0);
  }
  c.band_convex = c.band_min_slope > 0.0 && c.band_min_ratio >= 0.5;
  c.w_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const double t = p.t_min() + (p.t_max() - p.t_min()) * i / samples;
    c.w_min = std::min(c.w_min, p.w(t, Side::Right));
  }
  for (std::size_t j = 0; j < p.tags.size(); ++j) {
    const double b = p.breakpoints[j + 1];
    const auto L = p.raw_taylor(b, Side::Left), R = p.raw_taylor(b, Side::Right);
    c.joints.push_back({b, std::abs(L[0] - R[0]) / std::max(1.0, std::abs(R[0])),
                        std::abs(L[1] - R[1]) / std::max(1.0, std::abs(R[1])), 2.0 * std::abs(L[2] - R[2]),
                        p.tags[j]});
  }
  return c;
}

struct CollarSweep {
  std::vector<CollarCertificate> certificates;  // ordered by ell
  std::optional<double> ell0;                   // smallest ell from which K < 0 on [eps, 4] throughout
  bool kappa_increasing = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& c : certificates) j["certificates"].push_back(c.to_json());
    j["ell0"] = ell0 ? nlohmann::json(*ell0) : nlohmann::json(nullptr);
    j["kappa_increasing"] = kappa_increasing;
    return j;
  }
};

/// Certifies the collar for each ell; `band` defaults to the exponential band.
inline CollarSweep collar_sweep(const CollarSpec& base, std::vector<double> ells, bool mollify = true,
                                const std::optional<Profile>& band = std::nullopt, int threads = 1) {
  std::sort(ells.begin(), ells.end());
  CollarSweep out;
  out.certificates.resize(ells.size());
  parallel_for(ells.size(), threads, [&](std::size_t i) {
    CollarSpec s = base;
    s.ell = ells[i];
    Collar c = band ? build_collar(s, *band) : build_collar(s);
    if (mollify) c.profile = mollify_joints(c.profile, s.delta);
    out.certificates[i] = certify(c);
  });
  for (std::size_t i = ells.size(); i-- > 0;) {
    if (!out.certificates[i].negative_outer) break;
    out.ell0 = ells[i];
  }
  out.kappa_increasing = true;
  for (std::size_t i = 1; i < ells.size(); ++i)
    if (!(out.certificates[i].kappa > out.certificates[i - 1].kappa)) out.kappa_increasing = false;
  return out;
}

}  // namespace anosov
