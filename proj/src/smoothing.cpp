#include "homog/smoothing.hpp"

#include "homog/error.hpp"
#include "homog/expr.hpp"
#include "homog/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace homog {

namespace {

double raw_profile(double r2) {
    // exp(-1/(1 - 4 r^2)) on r < 1/2, written in terms of r^2.
    const double t = 1.0 - 4.0 * r2;
    if (t <= 0.0) return 0.0;
    return std::exp(-1.0 / t);
}

double radial_mass(double C) {
    auto integrand = [C](double r) { return 2.0 * std::numbers::pi * r * C * raw_profile(r * r); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 0.5, 15, 1e-14);
}

struct Stencil {
    int R = 0;
    // Per stencil row b in [-R, R]: the offsets a and weights.
    std::vector<std::vector<std::pair<int, double>>> rows;
    double raw_sum = 0.0;
};

Stencil build_stencil(double eps, double s) {
    const Mollifier& z = mollifier();
    Stencil st;
    const double rad = 0.5 * eps / s;
    st.R = static_cast<int>(std::floor(rad));
    st.rows.resize(static_cast<std::size_t>(2 * st.R + 1));
    const double cell = s * s;
    for (int b = -st.R; b <= st.R; ++b) {
        for (int a = -st.R; a <= st.R; ++a) {
            const double w = z.scaled(a * s, b * s, eps) * cell;
            if (w <= 0.0) continue;
            st.rows[static_cast<std::size_t>(b + st.R)].emplace_back(a, w);
            st.raw_sum += w;
        }
    }
    for (auto& row : st.rows)
        for (auto& [a, w] : row) w /= st.raw_sum;
    return st;
}

}  // namespace

Mollifier::Mollifier() { C_ = 1.0 / radial_mass(1.0); }

double Mollifier::operator()(double x, double y) const { return C_ * raw_profile(x * x + y * y); }

double Mollifier::scaled(double x, double y, double eps) const { return (*this)(x / eps, y / eps) / (eps * eps); }

double Mollifier::mass() const { return radial_mass(C_); }

const Mollifier& mollifier() {
    static const Mollifier z;
    return z;
}

GridFunction GridFunction::zeros(double x0, double y0, double s, int nx, int ny, int m) {
    if (!(s > 0.0) || nx <= 0 || ny <= 0 || m <= 0) throw ValidationError("grid function needs positive spacing and sizes");
    GridFunction g;
    g.x0 = x0;
    g.y0 = y0;
    g.s = s;
    g.nx = nx;
    g.ny = ny;
    g.m = m;
    g.values.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(m), 0.0);
    return g;
}

GridFunction GridFunction::covering(const PolygonDomain& domain, double s, double pad, int m, Point anchor) {
    if (!(s > 0.0)) throw ValidationError("grid spacing must be positive");
    const auto bb = domain.bounding_box();
    const double tol = 1e-9;
    const double x0 = anchor.x + std::floor((bb[0] - pad - anchor.x) / s + tol) * s;
    const double y0 = anchor.y + std::floor((bb[1] - pad - anchor.y) / s + tol) * s;
    const int nx = static_cast<int>(std::ceil((bb[2] + pad - x0) / s - tol)) + 1;
    const int ny = static_cast<int>(std::ceil((bb[3] + pad - y0) / s - tol)) + 1;
    const double count = static_cast<double>(nx) * ny * m;
    if (count > 2.5e8) throw ResourceError("grid function would hold " + std::to_string(count) + " samples");
    return zeros(x0, y0, s, nx, ny, m);
}

bool GridFunction::same_layout(const GridFunction& o) const {
    return nx == o.nx && ny == o.ny && std::abs(s - o.s) <= 1e-12 * s && std::abs(x0 - o.x0) <= 1e-9 * s &&
           std::abs(y0 - o.y0) <= 1e-9 * s;
}

double GridFunction::interpolate(Point p, int c) const {
    const double u = (p.x - x0) / s, v = (p.y - y0) / s;
    const double fu = std::floor(u), fv = std::floor(v);
    const int i = static_cast<int>(fu), j = static_cast<int>(fv);
    const double tx = u - fu, ty = v - fv;
    auto val = [&](int a, int b) { return (a < 0 || b < 0 || a >= nx || b >= ny) ? 0.0 : at(a, b, c); };
    return (1 - tx) * (1 - ty) * val(i, j) + tx * (1 - ty) * val(i + 1, j) + (1 - tx) * ty * val(i, j + 1) +
           tx * ty * val(i + 1, j + 1);
}

Point GridFunction::interpolate_gradient(Point p, int c) const {
    const double u = (p.x - x0) / s, v = (p.y - y0) / s;
    const double fu = std::floor(u), fv = std::floor(v);
    const int i = static_cast<int>(fu), j = static_cast<int>(fv);
    const double tx = u - fu, ty = v - fv;
    auto val = [&](int a, int b) { return (a < 0 || b < 0 || a >= nx || b >= ny) ? 0.0 : at(a, b, c); };
    const double f00 = val(i, j), f10 = val(i + 1, j), f01 = val(i, j + 1), f11 = val(i + 1, j + 1);
    return {((1 - ty) * (f10 - f00) + ty * (f11 - f01)) / s, ((1 - tx) * (f01 - f00) + tx * (f11 - f10)) / s};
}

double GridFunction::max_abs(int c) const {
    double out = 0.0;
    const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    for (std::size_t k = 0; k < n; ++k) out = std::max(out, std::abs(values[static_cast<std::size_t>(c) * n + k]));
    return out;
}

namespace {

bool accepted(const PolygonDomain& domain, const RegionSpec& support, Point p, double& delta) {
    if (!domain.contains(p)) return false;
    delta = domain.distance(p);
    if (support.region == Region::Inside) return delta > support.r;
    if (support.region == Region::Layer) return delta <= support.r;
    return true;
}

}  // namespace

GridFunction sample_to_grid(const GridFunction& layout, const PolygonDomain& domain, const RegionSpec& support, int m,
                            const VectorFunction& f) {
    GridFunction g = GridFunction::zeros(layout.x0, layout.y0, layout.s, layout.nx, layout.ny, m);
    parallel_for(static_cast<std::size_t>(g.ny), [&](std::size_t jb, std::size_t je) {
        std::vector<double> buf(static_cast<std::size_t>(m));
        for (std::size_t jj = jb; jj < je; ++jj) {
            const int j = static_cast<int>(jj);
            for (int i = 0; i < g.nx; ++i) {
                const Point p = g.point(i, j);
                double delta = 0.0;
                if (!accepted(domain, support, p, delta)) continue;
                f(p, buf.data());
                for (int c = 0; c < m; ++c) g.at(i, j, c) = buf[static_cast<std::size_t>(c)];
            }
        }
    });
    return g;
}

GridFunction to_grid(const FemFunction& u, const PolygonDomain& domain, double s, const RegionSpec& support_hint, double pad,
                     Point anchor) {
    if (!(s > 0.0)) throw ValidationError("to_grid: spacing must be positive");
    const GridFunction layout = GridFunction::covering(domain, s, pad, 1, anchor);
    const TriMesh& mesh = *u.mesh;
    return sample_to_grid(layout, domain, support_hint, u.m, [&](Point p, double* out) {
        std::array<double, 3> l{};
        const int t = mesh.locate(p, l);
        for (int c = 0; c < u.m; ++c) out[c] = t < 0 ? 0.0 : u.eval(static_cast<std::size_t>(t), l, c);
    });
}

double stencil_raw_sum(double eps, double s) { return build_stencil(eps, s).raw_sum; }

GridFunction smooth(const GridFunction& f, double eps) {
    if (!(eps > 0.0)) throw ValidationError("smooth: epsilon must be positive");
    if (f.s > eps / 16.0 * (1.0 + 1e-12))
        throw ValidationError("smooth: grid spacing " + std::to_string(f.s) + " is coarser than eps/16 = " + std::to_string(eps / 16.0));
    const Stencil st = build_stencil(eps, f.s);
    GridFunction out = GridFunction::zeros(f.x0, f.y0, f.s, f.nx, f.ny, f.m);
    const int nx = f.nx, ny = f.ny;
    for (int c = 0; c < f.m; ++c) {
        // Rows that are identically zero contribute nothing.
        std::vector<std::uint8_t> nonzero(static_cast<std::size_t>(ny), 0);
        for (int j = 0; j < ny; ++j) {
            const double* row = &f.values[f.index(0, j, c)];
            for (int i = 0; i < nx; ++i)
                if (row[i] != 0.0) {
                    nonzero[static_cast<std::size_t>(j)] = 1;
                    break;
                }
        }
        parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jb, std::size_t je) {
            for (std::size_t jj = jb; jj < je; ++jj) {
                const int j = static_cast<int>(jj);
                double* dst = &out.values[out.index(0, j, c)];
                for (int b = -st.R; b <= st.R; ++b) {
                    const int src_j = j + b;
                    if (src_j < 0 || src_j >= ny || !nonzero[static_cast<std::size_t>(src_j)]) continue;
                    const double* src = &f.values[f.index(0, src_j, c)];
                    for (const auto& [a, w] : st.rows[static_cast<std::size_t>(b + st.R)]) {
                        const int i0 = std::max(0, -a), i1 = std::min(nx, nx - a);
                        for (int i = i0; i < i1; ++i) dst[i] += w * src[i + a];
                    }
                }
            }
        });
    }
    return out;
}

GridFunction smooth_twice(const GridFunction& f, double eps) { return smooth(smooth(f, eps), eps); }

double convolve_at(const std::function<double(Point)>& f, Point x, double eps, double s) {
    const Mollifier& z = mollifier();
    const int R = static_cast<int>(std::floor(0.5 * eps / s));
    double num = 0.0, den = 0.0;
    for (int b = -R; b <= R; ++b)
        for (int a = -R; a <= R; ++a) {
            const double w = z.scaled(a * s, b * s, eps);
            if (w <= 0.0) continue;
            num += w * f({x.x - a * s, x.y - b * s});
            den += w;
        }
    return num / den;
}

WeightedBoundsReport verify_weighted_bounds(const PolygonDomain& domain, double eps, std::size_t samples, std::uint64_t seed,
                                            const std::vector<std::string>& g_exprs, bool strict) {
    if (!(eps > 0.0)) throw ValidationError("verify_weighted_bounds: epsilon must be positive");
    WeightedBoundsReport rep;
    rep.domain = domain.name();
    rep.eps = eps;
    rep.spacing = eps / 16.0;
    rep.outside_layer_range = !(eps < domain.c0() / 4.0);
    rep.stencil_raw_sum = stencil_raw_sum(eps, rep.spacing);

    const auto bb = domain.bounding_box();
    const GridFunction layout = GridFunction::covering(domain, rep.spacing, 0.0, 1, {bb[0], bb[1]});
    const RegionSpec all{};
    const GridFunction delta = sample_to_grid(layout, domain, all, 1, [&](Point p, double* o) { o[0] = domain.distance(p); });
    const GridFunction inv = sample_to_grid(layout, domain, RegionSpec{Region::Inside, eps, 0}, 1,
                                            [&](Point p, double* o) { o[0] = 1.0 / domain.distance(p); });
    const GridFunction s_delta = smooth(delta, eps);
    const GridFunction s_inv = smooth(inv, eps);

    // (i) on grid points of Sigma_2eps.
    for (int j = 0; j < layout.ny; ++j)
        for (int i = 0; i < layout.nx; ++i) {
            const double d = delta.at(i, j);
            if (!(d > 2.0 * eps)) continue;
            ++rep.grid_points;
            rep.max_ratio_delta = std::max(rep.max_ratio_delta, s_delta.at(i, j) / d);
            rep.max_ratio_inv_delta = std::max(rep.max_ratio_inv_delta, s_inv.at(i, j) * d);
        }
    // (i) at random off-grid points by direct convolution of the exact distance.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(bb[0], bb[2]), uy(bb[1], bb[3]);
    auto exact_delta = [&](Point p) { return domain.distance(p); };
    auto exact_inv = [&](Point p) {
        const double d = domain.distance(p);
        return d > 0.0 ? 1.0 / d : 0.0;
    };
    std::size_t attempts = 0;
    while (rep.random_points < samples && attempts < 100 * samples + 1000) {
        ++attempts;
        const Point p{ux(rng), uy(rng)};
        if (!domain.contains(p)) continue;
        const double d = domain.distance(p);
        if (!(d > 2.0 * eps)) continue;
        ++rep.random_points;
        rep.max_ratio_delta = std::max(rep.max_ratio_delta, convolve_at(exact_delta, p, eps, rep.spacing / 2.0) / d);
        rep.max_ratio_inv_delta = std::max(rep.max_ratio_inv_delta, convolve_at(exact_inv, p, eps, rep.spacing / 2.0) * d);
    }
    const double limit = 2.0 + 1e-6;
    rep.pointwise_ok = rep.grid_points > 0 && rep.max_ratio_delta <= limit && rep.max_ratio_inv_delta <= limit;

    // (ii) weighted products with f supported in Sigma_2eps.
    auto bump = [](Point p) { return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * p.x) * std::cos(std::numbers::pi * p.y); };
    const GridFunction f2 = sample_to_grid(layout, domain, RegionSpec{Region::Inside, 2.0 * eps, 0}, 1, [&](Point p, double* o) {
        o[0] = cutoff_profile(domain.distance(p), 2.0 * eps) * bump(p);
    });
    const GridFunction sf2 = smooth(f2, eps);
    std::vector<std::string> exprs = g_exprs;
    if (exprs.empty()) exprs = {"1", "1 + 0.5*sin(2*pi*y1)*cos(2*pi*y2)"};
    const auto vars = cell_variables(2);
    const double cell_area = rep.spacing * rep.spacing;
    for (const auto& text : exprs) {
        const ScalarFieldExpr g = parse_expr(text, vars);
        ProductConstant pc;
        pc.g = text;
        const int Ng = 128;
        double gsq = 0.0;
        for (int b = 0; b < Ng; ++b)
            for (int a = 0; a < Ng; ++a) {
                const double y[2] = {static_cast<double>(a) / Ng, static_cast<double>(b) / Ng};
                const double v = g.eval(y);
                gsq += v * v;
            }
        pc.g_norm = std::sqrt(gsq / (static_cast<double>(Ng) * Ng));
        double num_p = 0, den_p = 0, num_i = 0, den_i = 0, num_d = 0, den_d = 0;
        for (int j = 0; j < layout.ny; ++j)
            for (int i = 0; i < layout.nx; ++i) {
                const double d = delta.at(i, j);
                if (!(d > 2.0 * eps)) continue;
                const Point p = layout.point(i, j);
                double y[2] = {p.x / eps, p.y / eps};
                y[0] -= std::floor(y[0]);
                y[1] -= std::floor(y[1]);
                const double gv = g.eval(y);
                const double lhs = gv * gv * sf2.at(i, j) * sf2.at(i, j);
                const double rhs = f2.at(i, j) * f2.at(i, j);
                num_p += lhs;
                den_p += rhs;
                num_i += lhs / d;
                den_i += rhs / d;
                num_d += lhs * d;
                den_d += rhs * d;
            }
        if (den_p > 0.0 && pc.g_norm > 0.0) {
            pc.c_plain = std::sqrt(num_p / den_p) / pc.g_norm;
            pc.c_inv = std::sqrt(num_i / den_i) / pc.g_norm;
            pc.c_delta = std::sqrt(num_d / den_d) / pc.g_norm;
        }
        rep.products.push_back(pc);
    }

    // (iii) commutator with f supported in Sigma_eps; gradient by central differences.
    const GridFunction f1 = sample_to_grid(layout, domain, RegionSpec{Region::Inside, eps, 0}, 1, [&](Point p, double* o) {
        o[0] = cutoff_profile(domain.distance(p), eps) * bump(p);
    });
    const GridFunction sf1 = smooth(f1, eps);
    double num = 0.0, den = 0.0;
    for (int j = 1; j + 1 < layout.ny; ++j)
        for (int i = 1; i + 1 < layout.nx; ++i) {
            const double d = delta.at(i, j);
            if (!(d > eps)) continue;
            const double gx = (f1.at(i + 1, j) - f1.at(i - 1, j)) / (2.0 * rep.spacing);
            const double gy = (f1.at(i, j + 1) - f1.at(i, j - 1)) / (2.0 * rep.spacing);
            den += (gx * gx + gy * gy) * d;
            if (d > 2.0 * eps) {
                const double diff = f1.at(i, j) - sf1.at(i, j);
                num += diff * diff * d;
            }
        }
    if (den > 0.0) rep.commutator_constant = std::sqrt(num / den) / eps;

    // Observed L^{4/3} -> L^2 constant.
    double l2 = 0.0, lq = 0.0;
    for (std::size_t k = 0; k < f2.values.size(); ++k) {
        l2 += sf2.values[k] * sf2.values[k];
        lq += std::pow(std::abs(f2.values[k]), 4.0 / 3.0);
    }
    l2 = std::sqrt(l2 * cell_area);
    lq = std::pow(lq * cell_area, 0.75);
    if (lq > 0.0) rep.lq_gain_constant = l2 / (lq / std::sqrt(eps));

    if (strict && !rep.pointwise_ok) {
        std::ostringstream os;
        os << "smoothing bound violated on " << domain.name() << " at eps=" << eps << ": max S(delta)/delta = " << rep.max_ratio_delta
           << ", max S(1/delta)*delta = " << rep.max_ratio_inv_delta << " (limit 2)";
        throw VerificationError(os.str());
    }
    return rep;
}

void write_grid_csv(const GridFunction& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write " + path);
    os << "x,y";
    for (int c = 0; c < f.m; ++c) os << ",f" << c;
    os << "\n" << std::scientific << std::setprecision(12);
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) {
            const Point p = f.point(i, j);
            os << p.x << "," << p.y;
            for (int c = 0; c < f.m; ++c) os << "," << f.at(i, j, c);
            os << "\n";
        }
}

void write_grid_slice_csv(const GridFunction& f, double y, const std::string& path) {
    const int j = std::clamp(static_cast<int>(std::lround((y - f.y0) / f.s)), 0, f.ny - 1);
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write " + path);
    os << "x";
    for (int c = 0; c < f.m; ++c) os << ",f" << c;
    os << "\n" << std::scientific << std::setprecision(12);
    for (int i = 0; i < f.nx; ++i) {
        os << f.point(i, j).x;
        for (int c = 0; c < f.m; ++c) os << "," << f.at(i, j, c);
        os << "\n";
    }
}

}  // namespace homog
