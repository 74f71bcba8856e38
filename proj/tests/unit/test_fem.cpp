#include "homog/error.hpp"
#include "homog/fem.hpp"
#include "homog/norms.hpp"
#include "homog/recovery.hpp"

#include <Eigen/Dense>
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace homog;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HomogenizedTensors tensors(double a11, double a22, std::vector<double> V, std::vector<double> B, double c, double lambda) {
    HomogenizedTensors t;
    t.dim = 2;
    t.m = 1;
    t.lambda = lambda;
    t.A = {a11, 0.0, 0.0, a22};
    t.V = std::move(V);
    t.B = std::move(B);
    t.c = {c};
    return t;
}

// Truncated double sine series of -Lap u + u = 1 on the unit square with zero boundary values.
double series_center_value() {
    double s = 0.0;
    for (int m = 1; m < 4000; m += 2)
        for (int n = 1; n < 4000; n += 2) {
            const double term = 16.0 / (M_PI * M_PI * m * n * (M_PI * M_PI * (m * m + n * n) + 1.0));
            s += term * std::sin(m * M_PI / 2) * std::sin(n * M_PI / 2);
        }
    return s;
}

}  // namespace

TEST_CASE("pure diffusion with reaction assembles a symmetric positive definite matrix", "[fem]") {
    auto sq = PolygonDomain::from_name("square");
    auto mesh = triangulate(sq, 1.0 / 16);
    ConstantCoefficients cc(tensors(1, 1, {0, 0}, {0, 0}, 0, 1));
    ProblemData data;
    data.F = constant_function({1.0});
    auto sys = assemble(cc, mesh, data);
    CHECK(sys.symmetric);
    CHECK(asymmetry(sys.matrix) == 0.0);
    Eigen::MatrixXd D(sys.matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("first-order terms break symmetry and the adjoint assembly is the transpose", "[fem]") {
    auto sq = PolygonDomain::from_name("square");
    auto mesh = triangulate(sq, 1.0 / 16);
    ConstantCoefficients cc(tensors(1, 2, {0.3, 0}, {0, 0.2}, 0.1, 1));
    CHECK_FALSE(cc.symmetric());
    auto K = assemble_matrix(cc, mesh);
    CHECK(asymmetry(K) > 1e-3);
    AssembleOptions adj;
    adj.adjoint = true;
    auto Ks = assemble_matrix(cc, mesh, adj);
    SparseMatrix diff = SparseMatrix(K.transpose()) - Ks;
    double dmax = 0.0, kmax = 0.0;
    for (Eigen::Index k = 0; k < diff.nonZeros(); ++k) dmax = std::max(dmax, std::abs(diff.valuePtr()[k]));
    for (Eigen::Index k = 0; k < K.nonZeros(); ++k) kmax = std::max(kmax, std::abs(K.valuePtr()[k]));
    CHECK(dmax <= 1e-12 * kmax);

    auto osc = OscillatingCoefficients(preset("smooth-trig"), 1.0 / 4);
    auto chk = adjoint_check(osc, mesh, 3);
    CHECK(chk.defect <= 1e-12);
}

TEST_CASE("row sums of the Neumann matrix give the compatibility integral", "[fem]") {
    auto sq = PolygonDomain::from_name("square");
    auto mesh = triangulate(sq, 1.0 / 8);
    ConstantCoefficients cc(tensors(1, 1, {0.4, -0.1}, {0.3, -0.2}, 0.5, 1));
    auto K = assemble_matrix(cc, mesh);
    auto u = FemFunction::interpolate(mesh, 1, [](Point p, double* o) { o[0] = p.x * p.x + p.y; });
    Vec ones(u.values.size(), 1.0);
    const double row_sum = bilinear_form(K, u.values, ones);
    // Independent evaluation: elementwise exact integrals of a P1 function and its constant gradient.
    double expected = 0.0;
    for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
        const Point g = u.gradient(t, 0);
        const auto& T = mesh.tris[t];
        const double mean = (u.values[T[0]] + u.values[T[1]] + u.values[T[2]]) / 3.0;
        expected += mesh.area(t) * (0.3 * g.x - 0.2 * g.y + 1.5 * mean);
    }
    CHECK_THAT(row_sum, WithinAbs(expected, 1e-13));
}

TEST_CASE("homogeneous data gives the zero solution", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 16);
    ConstantCoefficients cc(tensors(1, 1, {0.2, 0}, {0, 0}, 0, 1));
    auto u = solve(assemble(cc, mesh, ProblemData{}));
    for (double v : u.values) CHECK(v == 0.0);
}

TEST_CASE("reaction-diffusion on the square matches the sine series", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 128);
    ConstantCoefficients cc(tensors(1, 1, {0, 0}, {0, 0}, 0, 1));
    ProblemData data;
    data.F = constant_function({1.0});
    SolveStats st;
    auto u = solve(assemble(cc, mesh, data), {}, &st);
    CHECK(st.relative_residual <= 1e-10);
    double center = 0.0;
    u.evaluate({0.5, 0.5}, &center);
    CHECK_THAT(center, WithinAbs(series_center_value(), 1e-3));
}

TEST_CASE("multigrid and diagonal scaling give the same solution", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("L-shape"), 1.0 / 32);
    OscillatingCoefficients osc(preset("smooth-trig"), 1.0 / 4);
    ProblemData data;
    data.F = constant_function({1.0});
    data.g = expression_function({"x1+x2"});
    auto sys = assemble(osc, mesh, data);
    SolveOptions mg, jac;
    mg.preconditioner = Preconditioner::Multigrid;
    jac.preconditioner = Preconditioner::Jacobi;
    SolveStats s1, s2;
    auto u1 = solve(sys, mg, &s1);
    auto u2 = solve(sys, jac, &s2);
    CHECK(s1.method == "bicgstab");
    CHECK(s1.iterations < s2.iterations);
    for (std::size_t i = 0; i < u1.values.size(); ++i) CHECK_THAT(u1.values[i], WithinAbs(u2.values[i], 1e-8));
}

TEST_CASE("identity coefficients at scale epsilon reproduce the homogenized solve", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 64);
    auto s = preset("identity");
    OscillatingCoefficients osc(s, 1.0 / 8);
    ConstantCoefficients hom(tensors(1, 1, {0, 0}, {0, 0}, 0, s.lambda));
    ProblemData data;
    data.F = expression_function({"sin(3*x1)+x2"});
    data.g = expression_function({"x1"});
    SolveOptions tight;
    tight.tol = 1e-12;
    auto ue = solve(assemble(osc, mesh, data), tight);
    auto u0 = solve(assemble(hom, mesh, data), tight);
    for (std::size_t i = 0; i < ue.values.size(); ++i) CHECK_THAT(ue.values[i], WithinAbs(u0.values[i], 1e-10));
}

TEST_CASE("oscillation scale below two mesh sizes is refused", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 16);
    CHECK_THROWS_AS(assemble_matrix(OscillatingCoefficients(preset("laminate"), 1.0 / 16), mesh), ValidationError);
    std::vector<std::string> warnings;
    assemble_matrix(OscillatingCoefficients(preset("laminate"), 3.0 / 16), mesh, {}, &warnings);
    CHECK(warnings.size() == 1);
}

TEST_CASE("lambda0 estimate", "[fem]") {
    CHECK(estimate_lambda0(preset("laminate")).lambda0 == 0.0);
    auto s = preset("identity");
    s.V[0] = parse_expr("1", cell_variables(2));
    auto e = estimate_lambda0(s);
    CHECK_THAT(e.analytic, WithinAbs(2.0, 1e-14));
    auto st = estimate_lambda0(preset("smooth-trig"), 7, 100);
    CHECK(st.samples == 100);
    CHECK(st.min_rayleigh >= 1e-6);
    CHECK(st.lambda0 <= preset("smooth-trig").lambda);
}

TEST_CASE("Neumann solutions satisfy compatibility and the Green identity", "[fem]") {
    auto mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 64);
    for (const auto& name : preset_names()) {
        INFO(name);
        OscillatingCoefficients osc(preset(name, 2), 1.0 / 8);
        ProblemData du;
        du.bc = BcKind::Neumann;
        du.F = expression_function({"1+x1*x2"});
        du.flux = expression_function({"x1-0.3"});
        ProblemData dv;
        dv.bc = BcKind::Neumann;
        dv.F = expression_function({"cos(x2)"});
        dv.flux = constant_function({0.7});
        SolveOptions tight;
        tight.tol = 1e-13;
        auto u = solve(assemble(osc, mesh, du), tight);
        AssembleOptions adj;
        adj.adjoint = true;
        auto v = solve(assemble(osc, mesh, dv, adj), tight);
        CHECK(compatibility_check(osc, du, u).defect <= 1e-8);
        CHECK(green_check(du, u, dv, v).defect <= 1e-10);
    }
}

TEST_CASE("Galerkin errors converge at orders one and two", "[fem]") {
    auto sq = PolygonDomain::from_name("square");
    ConstantCoefficients cc(tensors(1, 1, {0, 0}, {0, 0}, 0, 1));
    ProblemData data;
    data.F = expression_function({"(2*pi^2+1)*sin(pi*x1)*sin(pi*x2)"});
    std::vector<double> e0, e1;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        auto mesh = triangulate(sq, h);
        auto u = solve(assemble(cc, mesh, data));
        double l2 = 0, h1 = 0;
        const auto r = subdivided_rule(tri_rule_degree4(), 1);
        for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
            const Point g = u.gradient(t, 0);
            for (const auto& q : r) {
                const Point x = map_point(mesh, t, q.l);
                const double ex = std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
                const double gx = M_PI * std::cos(M_PI * x.x) * std::sin(M_PI * x.y), gy = M_PI * std::sin(M_PI * x.x) * std::cos(M_PI * x.y);
                const double d = u.eval(t, q.l, 0) - ex;
                l2 += q.w * mesh.area(t) * d * d;
                h1 += q.w * mesh.area(t) * ((g.x - gx) * (g.x - gx) + (g.y - gy) * (g.y - gy));
            }
        }
        e0.push_back(std::sqrt(l2));
        e1.push_back(std::sqrt(l2 + h1));
    }
    for (int k = 0; k < 2; ++k) {
        CHECK_THAT(e1[k] / e1[k + 1], WithinRel(2.0, 0.2));
        CHECK_THAT(e0[k] / e0[k + 1], WithinRel(4.0, 0.2));
    }
}

TEST_CASE("norm examples", "[fem][norms]") {
    auto sq = PolygonDomain::from_name("square");
    auto mesh = triangulate(sq, 1.0 / 100);
    auto one = FemFunction::interpolate(mesh, 1, constant_function({1.0}));
    CHECK_THAT(norm_l2(one, sq), WithinAbs(1.0, 1e-13));
    CHECK_THAT(norm(one, sq, {NormKind::L2, 2, {Region::Layer, 0.1, 0}}), WithinAbs(0.6, 1e-3));
    // Distance-weighted integral over [0.1,0.9]^2: 0.1 * 0.64 + s^3/6 with s = 0.8.
    const double exact = std::sqrt(0.1 * 0.64 + 0.8 * 0.8 * 0.8 / 6.0);
    CHECK_THAT(norm(one, sq, {NormKind::L2, 2, {Region::Inside, 0.1, 1}}), WithinRel(exact, 0.01));
    CHECK_THROWS_AS(norm(one, sq, {NormKind::L2, 2, {Region::Layer, 0.1, -1}}), ValidationError);
    auto lin = FemFunction::interpolate(mesh, 1, [](Point p, double* o) { o[0] = 2 * p.x - p.y; });
    CHECK_THAT(norm(lin, sq, {NormKind::H1Semi, 2, {}}), WithinAbs(std::sqrt(5.0), 1e-12));
    CHECK_THAT(norm_lp(one, sq, 4.0), WithinAbs(1.0, 1e-13));
    // Off-grid radius: cut elements are subdivided.
    CHECK_THAT(region_area(mesh, sq, {Region::Inside, 0.1234, 0}), WithinRel(std::pow(1 - 2 * 0.1234, 2), 1e-3));
}

TEST_CASE("Hessian recovery", "[fem][recovery]") {
    auto sq = PolygonDomain::from_name("square");
    auto mesh = triangulate(sq, 1.0 / 64);
    auto quad = FemFunction::interpolate(mesh, 1, [](Point p, double* o) { o[0] = p.x * p.x; });
    auto H = recover_hessian(quad);
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        REQUIRE(H.valid[n]);
        CHECK_THAT(H.H[n][0], WithinAbs(2.0, 1e-8));
        CHECK_THAT(H.H[n][1], WithinAbs(0.0, 1e-8));
    }
    auto s = second_derivative_seminorm(quad, sq, 0.1, false);
    CHECK_THAT(s.value, WithinRel(2.0 * 0.8, 0.01));
    auto lin = FemFunction::interpolate(mesh, 1, [](Point p, double* o) { o[0] = 3 * p.x - p.y; });
    CHECK(second_derivative_seminorm(lin, sq, 0.1, false).value < 1e-8);
    CHECK_THROWS_AS(second_derivative_seminorm(lin, sq, 1.0 / 64, false), ValidationError);
    auto g = recovered_gradient(quad);
    CHECK_THAT(g.at(mesh.grid.node_of_vertex[32 + 32 * 65], 0), WithinAbs(1.0, 1e-12));
}
