#include <cmath>

#include "doctest.h"
#include "metalab/errors.hpp"
#include "metalab/expr.hpp"

using metalab::SchemaError;
using metalab::expr::Expr;

TEST_CASE("expression evaluation") {
  double x[3] = {3.0, 4.0, -2.0};
  CHECK(Expr::parse("x1^2 + 2*x2", 3).eval(x) == doctest::Approx(17.0));
  CHECK(Expr::parse("-x1^2", 3).eval(x) == doctest::Approx(-9.0));
  CHECK(Expr::parse("2^3^2", 3).eval(x) == doctest::Approx(512.0));
  CHECK(Expr::parse("6/3/2", 3).eval(x) == doctest::Approx(1.0));
  CHECK(Expr::parse("2+3*4", 3).eval(x) == doctest::Approx(14.0));
  CHECK(Expr::parse("sin(pi/2)", 3).eval(x) == doctest::Approx(1.0));
  CHECK(Expr::parse("sqrt(x1^2+x2^2)", 3).eval(x) == doctest::Approx(5.0));
  CHECK(Expr::parse("(x1 - 1) * (x2 + 1)", 3).eval(x) == doctest::Approx(10.0));
  CHECK(Expr::parse("exp(0) + abs(x3)", 3).eval(x) == doctest::Approx(3.0));
  CHECK(Expr::parse(" 1.5e2 ", 3).eval(x) == doctest::Approx(150.0));
}

TEST_CASE("expression errors") {
  CHECK_THROWS_AS(Expr::parse("x3", 2), SchemaError);
  CHECK_THROWS_AS(Expr::parse("1+", 2), SchemaError);
  CHECK_THROWS_AS(Expr::parse("foo(1)", 2), SchemaError);
  CHECK_THROWS_AS(Expr::parse("(1", 2), SchemaError);
  CHECK_THROWS_AS(Expr::parse("1 2", 2), SchemaError);
  CHECK_THROWS_AS(Expr::parse("", 2), SchemaError);
}
