#include <doctest.h>

#include <cmath>

#include "nlhom/expression.hpp"

using namespace nlhom;

TEST_SUITE("expression") {

TEST_CASE("power is right associative") {
  CHECK(Expression::parse("2^3^2").evaluate({}) == 512.0);
}

TEST_CASE("unary minus binds looser than power") {
  CHECK(Expression::parse("-2^2").evaluate({}) == -4.0);
  CHECK(Expression::parse("2^-1").evaluate({}) == 0.5);
  CHECK(Expression::parse("--3").evaluate({}) == 3.0);
}

TEST_CASE("precedence and parentheses") {
  CHECK(Expression::parse("1 + 2*3").evaluate({}) == 7.0);
  CHECK(Expression::parse("(1 + 2)*3").evaluate({}) == 9.0);
  CHECK(Expression::parse("8/4/2").evaluate({}) == 1.0);
  CHECK(Expression::parse("1e-3*2.5E2").evaluate({}) == doctest::Approx(0.25));
}

TEST_CASE("functions and pi") {
  CHECK(Expression::parse("sin(pi/2)").evaluate({}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(Expression::parse("cos(0) + exp(0) + sqrt(16) + abs(-2)").evaluate({}) == 8.0);
}

TEST_CASE("variables") {
  Bindings b;
  b[Variable::xi1] = 3;
  b[Variable::xi2] = 4;
  b[Variable::xi3] = 0;
  b[Variable::r] = 5;
  const auto e = Expression::parse("xi1/r");
  CHECK(e.evaluate(b) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(e.variables_used() ==
        ((1u << unsigned(Variable::xi1)) | (1u << unsigned(Variable::r))));

  Bindings z;
  z[Variable::z1] = 0.25;
  CHECK(Expression::parse("1 + 0.5*sin(2*pi*z1)").evaluate(z) == doctest::Approx(1.5));
}

TEST_CASE("unclosed parenthesis reports the span") {
  try {
    Expression::parse("1 + 0.5*sin(2*pi*z1", kAllVariables, "coefficients.a.expression");
    FAIL("expected ExpressionError");
  } catch (const ExpressionError& e) {
    CHECK(e.offset() == 11);
    CHECK(e.field() == "coefficients.a.expression");
    CHECK(std::string(e.what()).find("unclosed") != std::string::npos);
  }
}

TEST_CASE("syntax errors") {
  CHECK_THROWS_AS(Expression::parse(""), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("1 +"), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("1 2"), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("foo(1)"), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("1 $ 2"), ExpressionError);
}

TEST_CASE("variables outside the allowed set are rejected") {
  try {
    Expression::parse("1 + x1", kCoefficientVariables);
    FAIL("expected ExpressionError");
  } catch (const ExpressionError& e) {
    CHECK(e.offset() == 4);
    CHECK(e.length() == 2);
  }
  CHECK_NOTHROW(Expression::parse("z1 + zp3", kCoefficientVariables));
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(Expression::parse("1/(z1 - z1)").evaluate({}), ExpressionError);
  CHECK_THROWS_AS(Expression::parse("sqrt(-1)").evaluate({}), ExpressionError);
}

TEST_CASE("evaluation is repeatable") {
  const auto e = Expression::parse("exp(-r^2/0.18)*xi3 + sin(3*xi1)");
  Bindings b;
  b[Variable::xi1] = 0.3;
  b[Variable::xi3] = -0.2;
  b[Variable::r] = std::sqrt(0.13);
  const double v = e.evaluate(b);
  for (int i = 0; i < 5; ++i) CHECK(e.evaluate(b) == v);
  CHECK(e.source() == "exp(-r^2/0.18)*xi3 + sin(3*xi1)");
}

}
