#include "homog/error.hpp"
#include "homog/parallel.hpp"
#include "homog/smoothing.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace homog;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Mass of exp(-1/(1-4|x|^2)) over the disc of radius 1/2: substituting s = 1 - 4r^2 gives
// (pi/4) * int_0^1 exp(-1/s) ds = (pi/4) * (exp(-1) - E1(1)).
double unnormalized_mass() {
    const double e1 = -boost::math::expint(-1.0);  // E1(1) = -Ei(-1)
    return std::numbers::pi / 4.0 * (std::exp(-1.0) - e1);
}

// Fourier multiplier of zeta_eps at the wave vector (2 pi, 0): int zeta(r) J0(2 pi eps r) 2 pi r dr.
double sine_multiplier(double eps) {
    const double C = 1.0 / unnormalized_mass();
    auto f = [&](double r) {
        const double t = 1.0 - 4.0 * r * r;
        const double z = t > 0.0 ? C * std::exp(-1.0 / t) : 0.0;
        return 2.0 * std::numbers::pi * r * z * boost::math::cyl_bessel_j(0, 2.0 * std::numbers::pi * eps * r);
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 0.5, 15, 1e-14);
}

GridFunction box_grid(double s, double lo, double hi) {
    const int n = static_cast<int>(std::lround((hi - lo) / s)) + 1;
    return GridFunction::zeros(lo, lo, s, n, n, 1);
}

template <class F>
void fill(GridFunction& g, F f) {
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) g.at(i, j) = f(g.point(i, j));
}

}  // namespace

TEST_CASE("mollifier normalization matches the exponential-integral closed form", "[smoothing]") {
    const Mollifier& z = mollifier();
    CHECK_THAT(z.normalization() * unnormalized_mass(), WithinAbs(1.0, 1e-12));
    CHECK_THAT(z.mass(), WithinAbs(1.0, 1e-10));
    CHECK(z(0.5, 0.0) == 0.0);
    CHECK(z(0.4, 0.4) == 0.0);
    CHECK(z(0.1, -0.2) > 0.0);
    CHECK(z(0.1, -0.2) == z(-0.1, 0.2));
    CHECK_THAT(z.scaled(0.01, 0.0, 0.1), WithinRel(z(0.1, 0.0) * 100.0, 1e-14));
}

TEST_CASE("lattice weights integrate the mollifier to unit mass", "[smoothing]") {
    // Eight lattice points per radius resolve the mass to a few 1e-4; doubling gives ~1e-5.
    CHECK_THAT(stencil_raw_sum(1.0 / 16, 1.0 / 256), WithinAbs(1.0, 1e-3));
    CHECK_THAT(stencil_raw_sum(1.0 / 8, 1.0 / 256), WithinAbs(1.0, 2e-5));
}

TEST_CASE("smoothing a constant returns the constant away from the grid edge", "[smoothing]") {
    const double eps = 1.0 / 8, s = eps / 16;
    GridFunction f = box_grid(s, -0.5, 1.5);
    fill(f, [](Point) { return 3.0; });
    const GridFunction g = smooth(f, eps);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Point p = g.point(i, j);
            if (p.x > -0.5 + eps / 2 && p.x < 1.5 - eps / 2 && p.y > -0.5 + eps / 2 && p.y < 1.5 - eps / 2)
                REQUIRE_THAT(g.at(i, j), WithinAbs(3.0, 1e-13));
        }
}

TEST_CASE("smoothing reproduces affine functions inside their plateau", "[smoothing]") {
    const double eps = 1.0 / 16, s = eps / 16;
    GridFunction f = box_grid(s, 0.0, 1.0);
    auto affine = [](Point p) { return 2.0 + p.x - 3.0 * p.y; };
    fill(f, affine);
    const GridFunction g = smooth(f, eps);
    double worst = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Point p = g.point(i, j);
            if (std::min({p.x, p.y, 1 - p.x, 1 - p.y}) >= eps / 2) worst = std::max(worst, std::abs(g.at(i, j) - affine(p)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("smoothing a plane wave multiplies it by the Fourier symbol", "[smoothing]") {
    const double eps = 1.0 / 16, s = eps / 16;
    GridFunction f = box_grid(s, -0.25, 1.25);
    auto wave = [](Point p) { return std::sin(2.0 * std::numbers::pi * p.x); };
    fill(f, wave);
    const GridFunction g = smooth(f, eps);
    const double mult = sine_multiplier(eps);
    double num = 0.0, den = 0.0, worst = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Point p = g.point(i, j);
            if (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1) continue;
            worst = std::max(worst, std::abs(g.at(i, j) - mult * wave(p)));
            const double diff = g.at(i, j) - wave(p);
            const double grad = 2.0 * std::numbers::pi * std::cos(2.0 * std::numbers::pi * p.x);
            num += diff * diff;
            den += grad * grad;
        }
    CHECK(worst < 1e-5);
    const double observed = std::sqrt(num / den) / eps;
    CHECK(observed <= 1.0);
    CHECK_THAT(observed, WithinRel((1.0 - mult) / (2.0 * std::numbers::pi * eps), 1e-2));
}

TEST_CASE("smoothing dilates the support by at most eps/2 and is an L-infinity contraction", "[smoothing]") {
    const double eps = 1.0 / 8, s = eps / 16;
    GridFunction f = box_grid(s, 0.0, 1.0);
    const Point c{0.5, 0.5};
    fill(f, [&](Point p) {
        const double r = std::hypot(p.x - c.x, p.y - c.y);
        return r < 0.2 ? std::cos(9.0 * p.x) - 2.0 * p.y : 0.0;
    });
    const GridFunction g = smooth(f, eps);
    CHECK(g.max_abs() <= f.max_abs());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Point p = g.point(i, j);
            if (std::hypot(p.x - c.x, p.y - c.y) >= 0.2 + eps / 2) REQUIRE(g.at(i, j) == 0.0);
        }
}

TEST_CASE("smoothing refuses grids coarser than eps/16", "[smoothing]") {
    GridFunction f = box_grid(1.0 / 64, 0.0, 1.0);
    CHECK_THROWS_AS(smooth(f, 1.0 / 8), ValidationError);
    CHECK_NOTHROW(smooth(f, 1.0 / 4));
}

TEST_CASE("smoothing is identical for every worker count", "[smoothing]") {
    const double eps = 1.0 / 16;
    GridFunction f = box_grid(eps / 16, 0.0, 1.0);
    fill(f, [](Point p) { return std::exp(p.x) * std::sin(5 * p.y); });
    set_default_workers(1);
    const GridFunction a = smooth(f, eps);
    set_default_workers(3);
    const GridFunction b = smooth(f, eps);
    set_default_workers(1);
    CHECK(a.values == b.values);
}

TEST_CASE("bilinear grid interpolation reproduces bilinear functions", "[smoothing]") {
    GridFunction f = box_grid(0.1, 0.0, 1.0);
    auto bl = [](Point p) { return 1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.y; };
    fill(f, bl);
    for (Point p : {Point{0.13, 0.77}, Point{0.5, 0.5}, Point{0.91, 0.02}}) {
        CHECK_THAT(f.interpolate(p), WithinAbs(bl(p), 1e-13));
        const Point g = f.interpolate_gradient(p);
        CHECK_THAT(g.x, WithinAbs(2.0 + 3.0 * p.y, 1e-12));
        CHECK_THAT(g.y, WithinAbs(-1.0 + 3.0 * p.x, 1e-12));
    }
    CHECK(f.interpolate({-0.5, 0.5}) == 0.0);
}

TEST_CASE("to_grid respects the support hint and reproduces linears", "[smoothing]") {
    const auto dom = PolygonDomain::from_name("L-shape");
    const TriMesh mesh = triangulate(dom, 1.0 / 32);
    const double eps = 1.0 / 16;

    const FemFunction one = FemFunction::interpolate(mesh, 1, constant_function({1.0}));
    const GridFunction g1 = to_grid(one, dom, eps / 16, RegionSpec{Region::Inside, eps, 0});
    for (int j = 0; j < g1.ny; ++j)
        for (int i = 0; i < g1.nx; ++i) {
            const Point p = g1.point(i, j);
            const bool in = dom.contains(p) && dom.distance(p) > eps;
            REQUIRE(g1.at(i, j) == (in ? 1.0 : 0.0));
        }

    auto lin = [](Point p, double* o) { o[0] = 0.5 + 2.0 * p.x - 1.5 * p.y; };
    const FemFunction u = FemFunction::interpolate(mesh, 1, lin);
    const GridFunction g2 = to_grid(u, dom, 1.0 / 100, RegionSpec{}, 0.05);
    std::size_t outside = 0;
    for (int j = 0; j < g2.ny; ++j)
        for (int i = 0; i < g2.nx; ++i) {
            const Point p = g2.point(i, j);
            if (!dom.contains(p)) {
                ++outside;
                REQUIRE(g2.at(i, j) == 0.0);
                continue;
            }
            double v = 0.0;
            lin(p, &v);
            REQUIRE_THAT(g2.at(i, j), WithinAbs(v, 1e-12));
        }
    CHECK(outside > 0);
}

TEST_CASE("weighted smoothing bounds on the unit square", "[smoothing]") {
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 32;
    const auto rep = verify_weighted_bounds(dom, eps, 50, 7);
    CHECK(rep.pointwise_ok);
    CHECK(rep.grid_points > 1000);
    CHECK(rep.random_points == 50);
    CHECK(rep.max_ratio_delta <= 2.0);
    CHECK(rep.max_ratio_inv_delta <= 2.0);
    // The distance is affine on most balls, where S(delta) = delta.
    CHECK(rep.max_ratio_delta >= 1.0 - 1e-12);
    REQUIRE(rep.products.size() == 2);
    CHECK(rep.products[0].g == "1");
    CHECK(rep.products[0].c_inv <= 2.0);
    CHECK(rep.products[0].c_delta <= 2.0);
    CHECK(rep.products[0].c_plain <= 1.0 + 1e-12);
    CHECK(std::isfinite(rep.products[1].c_inv));
    CHECK(rep.products[1].c_inv > 0.0);
    CHECK(std::isfinite(rep.commutator_constant));
    CHECK(rep.commutator_constant > 0.0);
    CHECK(rep.outside_layer_range);
}

TEST_CASE("S(delta) equals delta where the distance is affine on the whole ball", "[smoothing]") {
    const auto dom = PolygonDomain::from_name("square");
    const double eps = 1.0 / 16;
    // Near the left edge, away from the corners and the diagonals, delta = x.
    const Point p{0.2, 0.5};
    const double v = convolve_at([&](Point q) { return dom.distance(q); }, p, eps, eps / 32);
    CHECK_THAT(v, WithinAbs(0.2, 1e-12));
}

TEST_CASE("grid CSV export writes one row per sample", "[smoothing]") {
    GridFunction f = box_grid(0.25, 0.0, 1.0);
    fill(f, [](Point p) { return p.x + p.y; });
    const auto dir = std::filesystem::temp_directory_path() / "homog_grid_csv";
    std::filesystem::create_directories(dir);
    write_grid_csv(f, (dir / "g.csv").string());
    write_grid_slice_csv(f, 0.5, (dir / "s.csv").string());
    std::ifstream a(dir / "g.csv"), b(dir / "s.csv");
    std::string line;
    std::size_t na = 0, nb = 0;
    while (std::getline(a, line)) ++na;
    while (std::getline(b, line)) ++nb;
    CHECK(na == 26);
    CHECK(nb == 6);
}
