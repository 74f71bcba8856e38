#include "homog/coefficients.hpp"
#include "homog/config.hpp"
#include "homog/error.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace homog;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CoefficientSet diag_A(const std::string& a11, const std::string& a22) {
    auto s = CoefficientSet::zeros(2, 1);
    const auto vars = cell_variables(2);
    s.A[s.a_index(0, 0, 0, 0)] = parse_expr(a11, vars);
    s.A[s.a_index(1, 1, 0, 0)] = parse_expr(a22, vars);
    return s;
}

}  // namespace

TEST_CASE("sampling a constant gives a constant array", "[coeff]") {
    CellGrid g{2, 8};
    auto f = sample_field(ScalarFieldExpr::constant(1.0, cell_variables(2)), g);
    REQUIRE(f.size() == 64);
    for (double v : f) CHECK(v == 1.0);
}

TEST_CASE("sampling the sine reproduces exact lattice values", "[coeff]") {
    // N=4 is below the production minimum; sample on N=8 and read every other point.
    CellGrid g{2, 8};
    auto f = sample_field(parse_expr("sin(2*pi*y1)", cell_variables(2)), g);
    const double expected[4] = {0.0, 1.0, 0.0, -1.0};
    for (int k = 0; k < 4; ++k) CHECK_THAT(f[g.index(2 * k, 3)], WithinAbs(expected[k], 1e-15));
}

TEST_CASE("sampling rejects poles on the grid", "[coeff]") {
    CellGrid g{2, 8};
    CHECK_THROWS_AS(sample_field(parse_expr("1/(y1-0.25)", cell_variables(2)), g), ValidationError);
}

TEST_CASE("sampling is linear", "[coeff]") {
    CellGrid g{2, 16};
    const auto vars = cell_variables(2);
    auto a = sample_field(parse_expr("sin(2*pi*y1)*y2", vars), g);
    auto b = sample_field(parse_expr("cos(2*pi*y2)+3", vars), g);
    auto s = sample_field(parse_expr("sin(2*pi*y1)*y2+(cos(2*pi*y2)+3)", vars), g);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK_THAT(s[i], WithinAbs(a[i] + b[i], 1e-14));
}

TEST_CASE("grid checks its resolution", "[coeff]") {
    CHECK_THROWS_AS((CellGrid{2, 4}.check()), ValidationError);
    CHECK_THROWS_AS((CellGrid{2, 24}.check()), ValidationError);
    CHECK_NOTHROW((CellGrid{2, 8}.check()));
}

TEST_CASE("validate reports identity constants", "[coeff]") {
    auto r = validate(preset("identity"), CellGrid{2, 16});
    CHECK_THAT(r.mu_observed, WithinAbs(1.0, 1e-14));
    CHECK(r.kappa_observed == 0.0);
    CHECK(r.symmetric_A_observed);
}

TEST_CASE("validate finds the minimum of an oscillating diagonal", "[coeff]") {
    auto s = diag_A("2+sin(2*pi*y1)", "2+sin(2*pi*y1)");
    auto r = validate(s, CellGrid{2, 16});
    CHECK_THAT(r.mu_observed, WithinAbs(1.0, 1e-14));
}

TEST_CASE("validate rejects a sign-changing leading coefficient", "[coeff]") {
    auto s = diag_A("sin(2*pi*y1)", "1");
    CHECK_THROWS_AS(validate(s, CellGrid{2, 16}), ValidationError);
}

TEST_CASE("validate enforces the configured bound on lower-order terms", "[coeff]") {
    auto s = preset("smooth-trig");
    s.kappa_bound = 0.1;
    CHECK_THROWS_AS(validate(s, CellGrid{2, 16}), ValidationError);
    s.kappa_bound = 10.0;
    auto r = validate(s, CellGrid{2, 16});
    CHECK(r.kappa_observed <= 0.8 + 1e-12);
    CHECK(r.detail.count("V") == 1);
}

TEST_CASE("validate is homogeneous under scaling of A", "[coeff]") {
    auto s = preset("smooth-trig");
    const double mu = validate(s, CellGrid{2, 16}).mu_observed;
    const double mu3 = validate(scale_A(s, 3.0), CellGrid{2, 16}).mu_observed;
    CHECK_THAT(mu3, WithinRel(3.0 * mu, 1e-12));
}

TEST_CASE("every preset validates and random-trig depends on the seed", "[coeff]") {
    for (const auto& name : preset_names()) CHECK(validate(preset(name, 7), CellGrid{2, 32}).mu_observed > 0.5);
    CHECK(preset("random-trig", 1).A[0].str() == preset("random-trig", 1).A[0].str());
    CHECK(preset("random-trig", 1).A[0].str() != preset("random-trig", 2).A[0].str());
}

TEST_CASE("config builds coefficients from entries", "[coeff][config]") {
    auto cfg = Config::from_string(
        "[problem]\ndim = 2\nm = 1\nlambda = 1/2\n\n[A]\na11 = 2+sin(2*pi*y1)\na22 = 3\n; comment\n[V]\nv1 = 0.5\n[c]\nc = 1\n[grid]\nN = 32\n");
    auto s = coefficients_from_config(cfg);
    CHECK(s.lambda == 0.5);
    CHECK(s.A[s.a_index(1, 1, 0, 0)].constant_value() == 3.0);
    CHECK(s.V[s.v_index(0, 0, 0)].constant_value() == 0.5);
    CHECK(s.c[0].constant_value() == 1.0);
    CHECK(grid_from_config(cfg).N == 32);
    CHECK(cfg.get_list("problem.lambda", {}) == std::vector<double>{0.5});
}

TEST_CASE("config rejects malformed entries", "[coeff][config]") {
    CHECK_THROWS_AS(coefficients_from_config(Config::from_string("[A]\na13 = 1\n")), ConfigError);
    CHECK_THROWS_AS(coefficients_from_config(Config::from_string("[A]\na11 = sin(\n")), ConfigError);
    CHECK_THROWS_AS(Config::from_string("[problem]\nlambda = x\n").get_double("problem.lambda", 0), ConfigError);
    CHECK_THROWS_AS(coefficients_from_config(Config::from_string("[problem]\npreset = nope\n")), ConfigError);
}
