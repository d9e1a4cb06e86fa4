#pragma once

// Univariate profiles f(t) of warped-product metrics dt^2 + f(t)^2 dtheta^2.
//
// A Profile is a type-erased smooth (or piecewise smooth) function that
// reports truncated Taylor coefficients at a point. Joints between pieces are
// stored explicitly; asking for second or higher derivatives exactly at a
// C^{1,1} joint without choosing a side throws JointError.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "anosov/expression.hpp"
#include "anosov/jet.hpp"

namespace anosov {

enum class Side { Auto, Left, Right };

enum class JointTag { Smooth, C11, Mollified };

class JointError : public std::domain_error {
 public:
  explicit JointError(double t)
      : std::domain_error("second derivative requested at C^{1,1} joint t = " + std::to_string(t) +
                          " without a one-sided flag"),
        joint(t) {}
  double joint;
};

class OrderError : public std::domain_error {
 public:
  OrderError(int requested, int available)
      : std::domain_error("derivative order " + std::to_string(requested) + " exceeds resolvable order " +
                          std::to_string(available)) {}
};

inline constexpr int kMaxProfileOrder = 6;

class ProfileModel {
 public:
  virtual ~ProfileModel() = default;
  /// Writes f^{(k)}(t)/k! for k = 0..order into out.
  virtual void taylor(double t, int order, Side side, std::span<double> out) const = 0;
  virtual int max_order() const = 0;
};

namespace detail {

template <class F>
class CallableProfile final : public ProfileModel {
 public:
  CallableProfile(F f, int max_order) : f_(std::move(f)), max_order_(max_order) {}
  void taylor(double t, int order, Side, std::span<double> out) const override {
    switch (order) {
      case 0: out[0] = f_(t); return;
      case 1: copy<1>(t, out); return;
      case 2: copy<2>(t, out); return;
      case 3: copy<3>(t, out); return;
      case 4: copy<4>(t, out); return;
      case 5: copy<5>(t, out); return;
      default: copy<kMaxProfileOrder>(t, out); return;
    }
  }
  int max_order() const override { return max_order_; }

 private:
  template <int N>
  void copy(double t, std::span<double> out) const {
    const auto c = taylor_coefficients<N>(f_, t);
    for (std::size_t k = 0; k < out.size() && k <= static_cast<std::size_t>(N); ++k) out[k] = c[k];
  }
  F f_;
  int max_order_;
};

class SplineProfile final : public ProfileModel {
 public:
  SplineProfile(std::vector<double> values, double t0, double dt)
      : spline_(values.begin(), values.end(), t0, dt) {}
  void taylor(double t, int order, Side, std::span<double> out) const override {
    out[0] = spline_(t);
    if (order >= 1) out[1] = spline_.prime(t);
    if (order >= 2) out[2] = spline_.double_prime(t) / 2.0;
    for (int k = 3; k <= order; ++k) out[k] = 0.0;
  }
  int max_order() const override { return 2; }

 private:
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

}  // namespace detail

class Profile {
 public:
  Profile() = default;

  /// Wraps a generic callable usable on double and on Jet<1, N>.
  template <class F>
  static Profile from_callable(F f, int max_order = kMaxProfileOrder) {
    Profile p;
    p.model_ = std::make_shared<detail::CallableProfile<F>>(std::move(f), max_order);
    return p;
  }

  static Profile from_expression(const Expression& e) {
    return from_callable([e](const auto& t) { return e(t); });
  }

  /// Uniformly sampled values f(t0 + i dt) with cubic B-spline interpolation.
  static Profile from_samples(std::vector<double> values, double t0, double dt) {
    if (values.size() < 4) throw std::invalid_argument("sampled profile needs at least 4 values");
    Profile p;
    p.model_ = std::make_shared<detail::SplineProfile>(std::move(values), t0, dt);
    return p;
  }

  /// Wraps a model directly; `joints` lists points where only C^{1,1} holds.
  static Profile from_model(std::shared_ptr<const ProfileModel> model, std::vector<double> joints = {}) {
    Profile p;
    p.model_ = std::move(model);
    p.joints_ = std::move(joints);
    return p;
  }

  /// Piecewise profile: pieces[k] is used on [breakpoints[k], breakpoints[k+1]].
  static Profile piecewise(std::vector<double> breakpoints, std::vector<Profile> pieces, std::vector<JointTag> tags);

  bool valid() const { return static_cast<bool>(model_); }
  int max_order() const { return model_->max_order(); }

  /// Taylor coefficients f^{(k)}(t)/k!, k = 0..order.
  std::vector<double> taylor(double t, int order, Side side = Side::Auto) const {
    if (order > max_order()) throw OrderError(order, max_order());
    std::vector<double> out(static_cast<std::size_t>(order) + 1, 0.0);
    model_->taylor(t, order, side, out);
    return out;
  }

  double operator()(double t, Side side = Side::Auto) const { return taylor(t, 0, side)[0]; }

  double derivative(double t, int k, Side side = Side::Auto) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return taylor(t, k, side)[static_cast<std::size_t>(k)] * f;
  }

  /// Composes the profile with a jet argument.
  template <int V, int N>
  Jet<V, N> operator()(const Jet<V, N>& t, Side side = Side::Auto) const {
    const auto c = taylor(t.value(), N, side);
    std::array<double, N + 1> a{};
    std::copy(c.begin(), c.end(), a.begin());
    return t.compose(a);
  }

  const std::vector<double>& joints() const { return joints_; }
  const std::shared_ptr<const ProfileModel>& model() const { return model_; }

 private:
  std::shared_ptr<const ProfileModel> model_;
  std::vector<double> joints_;
};

namespace detail {

class PiecewiseProfile final : public ProfileModel {
 public:
  PiecewiseProfile(std::vector<double> b, std::vector<Profile> pieces, std::vector<JointTag> tags)
      : breaks_(std::move(b)), pieces_(std::move(pieces)), tags_(std::move(tags)) {
    max_order_ = kMaxProfileOrder;
    for (const auto& p : pieces_) max_order_ = std::min(max_order_, p.max_order());
  }

  void taylor(double t, int order, Side side, std::span<double> out) const override {
    const std::size_t k = piece_index(t, order, side);
    const auto c = pieces_[k].taylor(t, order, side);
    std::copy(c.begin(), c.end(), out.begin());
  }
  int max_order() const override { return max_order_; }

  std::size_t piece_index(double t, int order, Side side) const {
    const double scale = 1e-12 * std::max(1.0, std::abs(breaks_.back() - breaks_.front()));
    for (std::size_t j = 1; j + 1 < breaks_.size(); ++j) {
      if (std::abs(t - breaks_[j]) <= scale) {
        if (side == Side::Auto && order >= 2 && tags_[j - 1] == JointTag::C11) throw JointError(breaks_[j]);
        return side == Side::Left ? j - 1 : j;
      }
    }
    std::size_t k = 0;
    while (k + 1 < pieces_.size() && t >= breaks_[k + 1]) ++k;
    return k;
  }

 private:
  std::vector<double> breaks_;
  std::vector<Profile> pieces_;
  std::vector<JointTag> tags_;
  int max_order_ = 0;
};

}  // namespace detail

inline Profile Profile::piecewise(std::vector<double> breakpoints, std::vector<Profile> pieces,
                                  std::vector<JointTag> tags) {
  if (breakpoints.size() != pieces.size() + 1 || tags.size() + 1 != pieces.size())
    throw std::invalid_argument("piecewise profile: need n pieces, n+1 breakpoints and n-1 joint tags");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()))
    throw std::invalid_argument("piecewise profile: breakpoints must be increasing");
  Profile p;
  for (std::size_t j = 0; j < tags.size(); ++j)
    if (tags[j] == JointTag::C11) p.joints_.push_back(breakpoints[j + 1]);
  p.model_ = std::make_shared<detail::PiecewiseProfile>(std::move(breakpoints), std::move(pieces), std::move(tags));
  return p;
}

}  // namespace anosov
