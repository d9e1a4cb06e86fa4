#include <cmath>

#include <gtest/gtest.h>

#include "anosov/expression.hpp"
#include "anosov/jet.hpp"
#include "anosov/profile.hpp"

using namespace anosov;

TEST(Jet, UnivariateElementaryDerivatives) {
  const double t0 = 0.3;
  const auto j = Jet<1, 4>::variable(t0);
  const auto e = exp(sin(j));
  // d/dt e^{sin t} = cos t e^{sin t}; second derivative (cos^2 - sin) e^{sin t}
  const double es = std::exp(std::sin(t0));
  EXPECT_NEAR(e.d(1), std::cos(t0) * es, 1e-14);
  EXPECT_NEAR(e.d(2), (std::cos(t0) * std::cos(t0) - std::sin(t0)) * es, 1e-14);

  const auto th = tanh(j);
  const double T = std::tanh(t0);
  EXPECT_NEAR(th.d(1), 1 - T * T, 1e-14);
  EXPECT_NEAR(th.d(2), -2 * T * (1 - T * T), 1e-14);
  EXPECT_NEAR(th.d(3), (1 - T * T) * (6 * T * T - 2), 1e-13);

  const auto l = log(j) / j;
  EXPECT_NEAR(l.d(1), (1 - std::log(t0)) / (t0 * t0), 1e-12);
  const auto s = sqrt(j * j + 1.0);
  EXPECT_NEAR(s.d(2), std::pow(t0 * t0 + 1, -1.5), 1e-14);
}

TEST(Jet, BivariateMixedPartials) {
  const auto x = Jet<2, 3>::variable(0.4, 0);
  const auto y = Jet<2, 3>::variable(-0.7, 1);
  const auto f = x * x * y + exp(x * y);
  const double xv = 0.4, yv = -0.7, ex = std::exp(xv * yv);
  EXPECT_NEAR(f.d(1, 0), 2 * xv * yv + yv * ex, 1e-14);
  EXPECT_NEAR(f.d(0, 1), xv * xv + xv * ex, 1e-14);
  EXPECT_NEAR(f.d(1, 1), 2 * xv + ex + xv * yv * ex, 1e-14);
  EXPECT_NEAR(f.d(2, 1), 2 + 2 * yv * ex + xv * yv * yv * ex, 1e-13);
  const auto fx = partial(f, 0);
  EXPECT_NEAR(fx.d(1, 1), f.d(2, 1), 1e-13);
}

TEST(Expression, EvaluatesOnDoublesAndJets) {
  const auto e = Expression::parse("cosh(t)^2 - sinh(t)^2 + 2*t", {"t"});
  EXPECT_NEAR(e(0.8), 1.0 + 1.6, 1e-13);
  const auto j = e(Jet<1, 3>::variable(0.8));
  EXPECT_NEAR(j.d(1), 2.0, 1e-12);
  EXPECT_NEAR(j.d(2), 0.0, 1e-11);
  const auto g = Expression::parse("pow(x, 3) + -y/2 + pi", {"x", "y"});
  EXPECT_NEAR(g(2.0, 4.0), 8.0 - 2.0 + M_PI, 1e-14);
}

TEST(Expression, ReportsErrorColumn) {
  try {
    Expression::parse("1 + foo(t)", {"t"});
    FAIL();
  } catch (const ExpressionError& err) {
    EXPECT_EQ(err.column, 5u);
  }
  EXPECT_THROW(Expression::parse("(t + 1", {"t"}), ExpressionError);
  EXPECT_THROW(Expression::parse("t t", {"t"}), ExpressionError);
}

TEST(Profile, CallableAndSplineAgree) {
  const auto f = Profile::from_callable([](const auto& t) {
    using std::cosh;
    return cosh(t);
  });
  EXPECT_NEAR(f.derivative(0.5, 2), std::cosh(0.5), 1e-14);
  std::vector<double> v;
  for (int i = 0; i <= 400; ++i) v.push_back(std::cosh(-1.0 + i * 0.005));
  const auto s = Profile::from_samples(v, -1.0, 0.005);
  EXPECT_NEAR(s(0.31), std::cosh(0.31), 1e-8);
  EXPECT_NEAR(s.derivative(0.31, 1), std::sinh(0.31), 1e-5);
  EXPECT_THROW(s.taylor(0.3, 3), OrderError);
}

TEST(Profile, C11JointNeedsSide) {
  const auto left = Profile::from_callable([](const auto& t) { return 1.0 + t * 0.0; });
  const auto right = Profile::from_callable([](const auto& t) { return 1.0 + t * t; });
  const auto p = Profile::piecewise({-1.0, 0.0, 1.0}, {left, right}, {JointTag::C11});
  EXPECT_NEAR(p(0.0), 1.0, 1e-15);
  EXPECT_NEAR(p.derivative(0.0, 1), 0.0, 1e-15);
  EXPECT_THROW(p.derivative(0.0, 2), JointError);
  EXPECT_NEAR(p.derivative(0.0, 2, Side::Left), 0.0, 1e-15);
  EXPECT_NEAR(p.derivative(0.0, 2, Side::Right), 2.0, 1e-15);
  EXPECT_NEAR(p.derivative(0.5, 2), 2.0, 1e-15);
}
