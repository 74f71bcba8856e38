#include "homog/error.hpp"
#include "homog/expr.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace homog;
using Catch::Matchers::WithinAbs;

namespace {
const std::vector<std::string> kVars2 = cell_variables(2);
}

TEST_CASE("expression parser evaluates sum of constant and sine", "[expr]") {
    auto e = parse_expr("2+sin(2*pi*y1)", kVars2);
    for (double y1 : {0.0, 0.1, 0.25, 0.7}) {
        std::vector<double> y{y1, 0.3};
        CHECK_THAT(e.eval(y), WithinAbs(2.0 + std::sin(2.0 * M_PI * y1), 1e-15));
    }
}

TEST_CASE("expression parser recognises constants", "[expr]") {
    auto e = parse_expr("1", kVars2);
    CHECK(e.is_constant());
    CHECK(e.constant_value() == 1.0);
    CHECK_FALSE(parse_expr("y2", kVars2).is_constant());
    CHECK(parse_expr("0*1", kVars2).is_zero());
}

TEST_CASE("expression parser rejects out-of-scope variables", "[expr]") {
    try {
        parse_expr("sin(y3)", kVars2);
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::UnknownIdentifier);
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("expression parser reports syntax errors and arity", "[expr]") {
    auto kind_of = [](const char* src) {
        try {
            parse_expr(src, kVars2);
        } catch (const ParseError& e) {
            return e.kind();
        }
        FAIL("expected an error for " << src);
        return ParseError::Kind::Syntax;
    };
    CHECK(kind_of("1+") == ParseError::Kind::Syntax);
    CHECK(kind_of("(1") == ParseError::Kind::Syntax);
    CHECK(kind_of("") == ParseError::Kind::Syntax);
    CHECK(kind_of("sin(1,2)") == ParseError::Kind::WrongArity);
    CHECK(kind_of("sin()") == ParseError::Kind::WrongArity);
    CHECK(kind_of("foo(1)") == ParseError::Kind::UnknownIdentifier);
    try {
        parse_expr("1 + * 2", kVars2);
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("expression precedence follows arithmetic convention", "[expr]") {
    std::vector<double> y{0.0, 0.0};
    CHECK(parse_expr("2+3*4", kVars2).eval(y) == 14.0);
    CHECK(parse_expr("2^3^2", kVars2).eval(y) == 512.0);
    CHECK(parse_expr("-2^2", kVars2).eval(y) == -4.0);
    CHECK(parse_expr("2^-1", kVars2).eval(y) == 0.5);
    CHECK(parse_expr("8/4/2", kVars2).eval(y) == 1.0);
    CHECK(parse_expr("10-4-3", kVars2).eval(y) == 3.0);
    CHECK_THAT(parse_expr("exp(1)+sqrt(4)+abs(-3)+log(1)", kVars2).eval(y), WithinAbs(std::exp(1.0) + 5.0, 1e-15));
    CHECK_THAT(parse_expr("1.5e-3*1E3", kVars2).eval(y), WithinAbs(1.5, 1e-15));
}

TEST_CASE("printing and reparsing gives an identical tree", "[expr]") {
    for (const char* src : {"2+sin(2*pi*y1)", "-(y1-y2)^2/3", "0.1*cos(2*pi*(y1+2*y2)+0.7)", "-y1^-2", "exp(-y2)*abs(y1-0.5)"}) {
        auto e = parse_expr(src, kVars2);
        auto again = parse_expr(e.str(), kVars2);
        CHECK(again == e);
        CHECK(again.str() == e.str());
    }
}
