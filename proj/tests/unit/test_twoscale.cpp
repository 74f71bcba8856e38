#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "homog/recovery.hpp"
#include "homog/twoscale.hpp"

#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace homog;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

CellGrid grid_of(int N) {
    CellGrid g;
    g.dim = 2;
    g.N = N;
    return g;
}

// Lattice samples of f, with y = (k1/N, k2/N) at index k1*N + k2.
template <class F>
PeriodicArray lattice(const CellGrid& g, F f) {
    PeriodicArray a(g.size());
    for (int k1 = 0; k1 < g.N; ++k1)
        for (int k2 = 0; k2 < g.N; ++k2) a[g.index(k1, k2)] = f(static_cast<double>(k1) / g.N, static_cast<double>(k2) / g.N);
    return a;
}

double smooth_cell_field(double y1, double y2) {
    return std::sin(2 * kPi * y1) * std::cos(2 * kPi * y2) + 0.3 * std::cos(4 * kPi * y1) + 0.2 * std::sin(2 * kPi * (y1 + y2));
}

// Largest interpolation error of the periodic sampler over seeded random cell points.
double sampler_error(int N, int upsample) {
    const CellGrid g = grid_of(N);
    const PeriodicSampler s(lattice(g, smooth_cell_field), g, upsample);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    double err = 0.0;
    for (int i = 0; i < 400; ++i) {
        const double y1 = U(rng), y2 = U(rng);
        err = std::max(err, std::abs(s(y1, y2) - smooth_cell_field(y1, y2)));
    }
    return err;
}

struct Pair {
    TriMesh mesh;
    FemFunction ue, u0;
};

Pair solve_pair(const CoefficientSet& coeffs, const CellData& cell, const PolygonDomain& dom, double eps, double h,
                const ProblemData& data) {
    Pair p;
    p.mesh = triangulate(dom, h);
    const OscillatingCoefficients osc(coeffs, eps);
    p.ue = solve(assemble(osc, p.mesh, data));
    const ConstantCoefficients hom(cell.hats);
    p.u0 = solve(assemble(hom, p.mesh, data));
    return p;
}

ProblemData default_data() {
    ProblemData d;
    d.F = constant_function({1.0});
    d.g = expression_function({"x1 + 0.5*x2"});
    return d;
}

const CellData& identity_cell() {
    static const CellData c = build_cell_data(preset("identity"), grid_of(32));
    return c;
}

const CellData& laminate_cell() {
    static const CellData c = build_cell_data(preset("laminate"), grid_of(64));
    return c;
}

}  // namespace

TEST_CASE("periodic sampling of a constant is the constant", "[twoscale]") {
    const CellGrid g = grid_of(16);
    const PeriodicArray c(g.size(), 2.5);
    const std::vector<Point> pts{{0.0, 0.0}, {0.37, -1.2}, {5.01, 3.3}};
    for (double eps : {1.0 / 8, 1.0 / 64})
        for (double v : sample_periodic_at_scale(c, g, eps, pts, 4)) CHECK_THAT(v, WithinAbs(2.5, 1e-14));
}

TEST_CASE("periodic sampling hits the lattice value of a sine", "[twoscale]") {
    const CellGrid g = grid_of(32);
    const PeriodicArray s = lattice(g, [](double y1, double) { return std::sin(2 * kPi * y1); });
    const auto v = sample_periodic_at_scale(s, g, 1.0 / 8, {{1.0 / 16, 0.0}, {1.0 / 32, 0.0}}, 1);
    CHECK_THAT(v[0], WithinAbs(0.0, 1e-14));
    CHECK_THAT(v[1], WithinAbs(1.0, 1e-14));
}

TEST_CASE("periodic sampling converges at second order and upsampling helps", "[twoscale]") {
    const double e32 = sampler_error(32, 1), e64 = sampler_error(64, 1);
    // Bilinear interpolation error is at most (h^2/8)(max|f_11| + max|f_22|) with h = 1/N.
    const double f11 = 4 * kPi * kPi * (1.0 + 0.3 * 4.0 + 0.2), f22 = 4 * kPi * kPi * (1.0 + 0.2);
    CHECK(e32 <= (f11 + f22) / (8.0 * 32 * 32));
    CHECK(e32 / e64 > 3.5);
    CHECK(e32 / e64 < 4.5);
    // Band-limited fields are upsampled exactly, so four-fold upsampling divides the error by about 16.
    CHECK(sampler_error(32, 4) < e32 / 10.0);
}

TEST_CASE("identity coefficients give w equal to the plain difference", "[twoscale]") {
    const auto coeffs = preset("identity");
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 8;
    const Pair p = solve_pair(coeffs, identity_cell(), dom, eps, eps / 8, default_data());
    const TwoScaleState st = build_w(p.ue, p.u0, identity_cell(), coeffs, dom, eps, TwoScaleVariant::h1_corrector());
    for (std::size_t i = 0; i < p.ue.values.size(); ++i) CHECK_THAT(st.w().values[i], WithinAbs(p.ue.values[i] - p.u0.values[i], 1e-14));

    const ResidualFields rf = residual_fields(st);
    CHECK(rf.f_tilde < 1e-12);
    CHECK(rf.F_tilde < 1e-12);

    const WeakIdentityReport wi = check_weak_identity(st);
    CHECK(wi.max_relative_defect <= 1e-8);
    CHECK(wi.tests == 20);

    const FemFunction phi = solve_adjoint(st, constant_function({1.0}));
    const DualityResult one = duality_pairing(st, phi, constant_function({1.0}));
    CHECK(std::abs(one.lhs - one.rhs) <= 1e-8);
    const FemFunction zero_phi = solve_adjoint(st, constant_function({0.0}));
    const DualityResult zero = duality_pairing(st, zero_phi, constant_function({0.0}));
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);
}

TEST_CASE("homogenized coefficients on both sides leave only the corrector term", "[twoscale]") {
    const auto coeffs = preset("laminate");
    const CellData& cell = laminate_cell();
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 16;
    TriMesh mesh = triangulate(dom, eps / 16);
    const ConstantCoefficients hom(cell.hats);
    const FemFunction u0 = solve(assemble(hom, mesh, default_data()));
    const TwoScaleState st = build_w(u0, u0, cell, coeffs, dom, eps, TwoScaleVariant::h1_corrector());

    // w = -eps chi_k phi_k with |phi| bounded by the smoothed magnitudes of u0 and grad u0.
    double chi_max = 0.0;
    for (const auto& f : cell.chi)
        for (const auto& a : f) for (double v : a) chi_max = std::max(chi_max, std::abs(v));
    const FemFunction g0 = recovered_gradient(u0);
    double u_max = 0.0;
    for (double v : u0.values) u_max = std::max(u_max, std::abs(v));
    for (double v : g0.values) u_max = std::max(u_max, std::abs(v));
    double w_max = 0.0;
    for (double v : st.w().values) w_max = std::max(w_max, std::abs(v));
    CHECK(w_max <= 3.0 * eps * chi_max * u_max * (1 + 1e-9));
    CHECK(w_max > 0.0);
    CHECK(w_norm_l2(st) <= eps * chi_max * u_max * 3.0 * std::sqrt(dom.area()));
}

TEST_CASE("the corrector halves the gradient error for an interior load", "[twoscale][slow]") {
    // Side 4 keeps the 8 eps boundary layer of the cutoff thin relative to the domain.
    const auto coeffs = preset("laminate");
    const CellData& cell = laminate_cell();
    const PolygonDomain dom("square-4", {{0, 0}, {4, 0}, {4, 4}, {0, 4}});
    const double eps = 1.0 / 16;
    ProblemData data;
    data.F = expression_function({"10*exp(-4*((x1-2)^2+(x2-2)^2))"});
    const Pair p = solve_pair(coeffs, cell, dom, eps, eps / 16, data);
    const TwoScaleState st = build_w(p.ue, p.u0, cell, coeffs, dom, eps, TwoScaleVariant::h1_corrector());
    FemFunction diff = p.ue;
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= p.u0.values[i];
    const double plain = norm_h1(diff, dom);
    const double corrected = w_norm_h1(st);
    CHECK(corrected < plain / 2.0);
}

TEST_CASE("residual fields cancel for the uncut phi", "[twoscale]") {
    const auto coeffs = preset("smooth-trig");
    const CellData cell = build_cell_data(coeffs, grid_of(32));
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 8;
    const Pair p = solve_pair(coeffs, cell, dom, eps, eps / 8, default_data());
    const FemFunction& u0 = p.u0;
    const TwoScaleState st = build_w_with_phi(p.ue, u0, cell, coeffs, dom, eps,
        [&](std::size_t t, const std::array<double, 3>& l, Point, double* v, double* g) {
            v[0] = u0.eval(t, l, 0);
            const Point d = u0.gradient(t, 0);
            g[0] = d.x;
            g[1] = d.y;
            v[1] = d.x;
            v[2] = d.y;
            for (int i = 2; i < 6; ++i) g[i] = 0.0;
        });
    TwoScaleWorkspace ws = st.workspace();
    ResidualPoint rp;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> T(0, p.mesh.num_tris() - 1);
    double biggest = 0.0;
    for (int s = 0; s < 50; ++s) {
        const std::size_t t = T(rng);
        const std::array<double, 3> l{0.2, 0.3, 0.5};
        st.evaluate(t, l, map_point(p.mesh, t, l), ws);
        residual_at(st, ws, rp);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK_THAT(rp.f[i], WithinAbs(rp.K[i] - eps * (rp.I[i] + rp.J[i]), 1e-12));
            biggest = std::max(biggest, std::abs(rp.f[i]));
        }
        CHECK_THAT(rp.F[0], WithinAbs(-eps * (rp.M[0] + rp.N[0]), 1e-12));
    }
    CHECK(biggest > 0.0);
}

TEST_CASE("laminate residual, support and flux-corrector checks", "[twoscale]") {
    const auto coeffs = preset("laminate");
    const CellData& cell = laminate_cell();
    const auto dom = PolygonDomain::from_name("square");
    std::vector<double> f_norms;
    for (double eps : {1.0 / 8, 1.0 / 16}) {
        const Pair p = solve_pair(coeffs, cell, dom, eps, eps / 16, default_data());
        const TwoScaleState st = build_w(p.ue, p.u0, cell, coeffs, dom, eps, TwoScaleVariant::l2_corrector());
        const ResidualFields rf = residual_fields(st);
        CHECK(std::isfinite(rf.f_tilde));
        CHECK(rf.f_tilde > 0.0);
        f_norms.push_back(rf.f_tilde);

        const SupportCheck sc = check_support(st);
        CHECK(sc.ok);
        CHECK(sc.points_checked > 0);
        CHECK_THAT(sc.radius, WithinRel(eps, 1e-12));

        const AntisymmetryCheck ac = check_antisymmetry(st, 5);
        CHECK(ac.flux_term != 0.0);
        CHECK(ac.defect < 1e-6);

        const EnergyBound eb = energy_bound(st);
        CHECK(eb.constant > 0.0);
        CHECK(eb.constant < 1e3);
    }
    CHECK(f_norms[1] < f_norms[0]);
}

TEST_CASE("weak identity defect is first order in h", "[twoscale]") {
    const auto coeffs = preset("laminate");
    const CellData& cell = laminate_cell();
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 8;
    std::vector<double> d;
    for (double h : {eps / 16, eps / 32}) {
        const Pair p = solve_pair(coeffs, cell, dom, eps, h, default_data());
        const TwoScaleState st = build_w(p.ue, p.u0, cell, coeffs, dom, eps, TwoScaleVariant::l2_corrector());
        const WeakIdentityReport r = check_weak_identity(st);
        CHECK(r.max_relative_defect >= r.max_random_defect);
        CHECK(r.max_relative_defect_analytic < r.max_relative_defect);
        d.push_back(r.max_relative_defect);
    }
    CHECK(d[1] <= 1e-2);
    CHECK(d[0] / d[1] > 1.5);
    CHECK(d[0] / d[1] < 2.5);
}

TEST_CASE("two-scale construction validates its inputs", "[twoscale]") {
    const auto coeffs = preset("laminate");
    CellData cell = laminate_cell();
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 8;
    const Pair p = solve_pair(coeffs, cell, dom, eps, eps / 4, default_data());
    CHECK_THROWS_AS(build_w(p.ue, p.u0, cell, coeffs, dom, eps / 4, TwoScaleVariant::h1_corrector()), ValidationError);

    const TriMesh other = triangulate(dom, eps / 4);
    FemFunction foreign = FemFunction::zeros(other, 1);
    CHECK_THROWS_AS(build_w(p.ue, foreign, cell, coeffs, dom, eps, TwoScaleVariant::h1_corrector()), ValidationError);

    cell.dchi.clear();
    CHECK_THROWS_AS(build_w(p.ue, p.u0, cell, coeffs, dom, eps, TwoScaleVariant::h1_corrector()), ValidationError);

    const TwoScaleState st = build_w(p.ue, p.u0, laminate_cell(), coeffs, dom, eps, TwoScaleVariant::h1_corrector());
    FemFunction bad = FemFunction::interpolate(p.mesh, 1, constant_function({1.0}));
    CHECK_THROWS_AS(duality_pairing(st, bad, constant_function({1.0})), ValidationError);
}

TEST_CASE("defect records serialize every field", "[twoscale]") {
    const std::string text = defect_record_json("laminate", 0.125, 0.125 / 32, 3.5e-3, {{"energy", 0.17}, {"antisymmetry", 1e-9}});
    const auto j = nlohmann::json::parse(text);
    CHECK(j.at("preset") == "laminate");
    CHECK(j.at("eps").get<double>() == 0.125);
    CHECK(j.at("h").get<double>() == 0.125 / 32);
    CHECK(j.at("defect").get<double>() == 3.5e-3);
    CHECK(j.at("observed_constants").at("energy").get<double>() == 0.17);
    CHECK(j.at("observed_constants").size() == 2);
}
