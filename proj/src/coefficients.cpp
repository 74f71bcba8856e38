#include "homog/coefficients.hpp"

#include "homog/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <cstdio>
#include <random>
#include <sstream>

namespace homog {

void CellGrid::check() const {
    if (dim != 2 && dim != 3) throw ValidationError("cell grid dimension must be 2 or 3");
    if (N < 8 || (N & (N - 1)) != 0)
        throw ValidationError("cell grid resolution must be a power of two >= 8, got " + std::to_string(N));
}

std::size_t CellGrid::size() const {
    std::size_t n = 1;
    for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(N);
    return n;
}

std::size_t CellGrid::index(int k1, int k2, int k3) const {
    const auto n = static_cast<std::size_t>(N);
    if (dim == 2) return static_cast<std::size_t>(k1) * n + static_cast<std::size_t>(k2);
    return (static_cast<std::size_t>(k1) * n + static_cast<std::size_t>(k2)) * n + static_cast<std::size_t>(k3);
}

CoefficientSet CoefficientSet::zeros(int dim, int m) {
    if (dim < 2 || dim > 3) throw ValidationError("dimension must be 2 or 3");
    if (m < 1) throw ValidationError("system size must be >= 1");
    CoefficientSet s;
    s.dim = dim;
    s.m = m;
    const auto vars = cell_variables(dim);
    const auto zero = ScalarFieldExpr::constant(0.0, vars);
    s.A.assign(static_cast<std::size_t>(dim * dim * m * m), zero);
    s.V.assign(static_cast<std::size_t>(dim * m * m), zero);
    s.B.assign(static_cast<std::size_t>(dim * m * m), zero);
    s.c.assign(static_cast<std::size_t>(m * m), zero);
    return s;
}

namespace {
bool any_nonzero(const std::vector<ScalarFieldExpr>& v) {
    for (const auto& e : v)
        if (!e.is_zero()) return true;
    return false;
}
}  // namespace

bool CoefficientSet::has_V() const { return any_nonzero(V); }
bool CoefficientSet::has_B() const { return any_nonzero(B); }
bool CoefficientSet::has_c() const { return any_nonzero(c); }

CoeffValues::CoeffValues(int dim_, int m_) : dim(dim_), m(m_) {
    A.assign(static_cast<std::size_t>(dim * dim * m * m), 0.0);
    V.assign(static_cast<std::size_t>(dim * m * m), 0.0);
    B.assign(static_cast<std::size_t>(dim * m * m), 0.0);
    c.assign(static_cast<std::size_t>(m * m), 0.0);
}

namespace {
void eval_all(const std::vector<ScalarFieldExpr>& exprs, std::span<const double> y, std::vector<double>& out) {
    out.resize(exprs.size());
    for (std::size_t i = 0; i < exprs.size(); ++i)
        out[i] = exprs[i].is_constant() ? exprs[i].constant_value() : exprs[i].eval(y);
}
}  // namespace

void evaluate(const CoefficientSet& coeffs, const double* y, CoeffValues& out) {
    double frac[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < coeffs.dim; ++i) frac[i] = y[i] - std::floor(y[i]);
    std::span<const double> ys(frac, static_cast<std::size_t>(coeffs.dim));
    out.dim = coeffs.dim;
    out.m = coeffs.m;
    eval_all(coeffs.A, ys, out.A);
    eval_all(coeffs.V, ys, out.V);
    eval_all(coeffs.B, ys, out.B);
    eval_all(coeffs.c, ys, out.c);
}

namespace {
template <class F>
void for_each_sample(const CellGrid& grid, int refine, F&& f) {
    const int n = grid.N * refine;
    const double inv = 1.0 / n;
    double y[3] = {0.0, 0.0, 0.0};
    if (grid.dim == 2) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                y[0] = a * inv;
                y[1] = b * inv;
                f(y);
            }
    } else {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    y[0] = a * inv;
                    y[1] = b * inv;
                    y[2] = c * inv;
                    f(y);
                }
    }
}

std::string point_text(const double* y, int dim) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < dim; ++i) os << (i ? "," : "") << y[i];
    os << ")";
    return os.str();
}
}  // namespace

PeriodicArray sample_field(const ScalarFieldExpr& expr, const CellGrid& grid) {
    grid.check();
    PeriodicArray out;
    out.reserve(grid.size());
    for_each_sample(grid, 1, [&](const double* y) {
        const double v = expr.eval(std::span<const double>(y, static_cast<std::size_t>(grid.dim)));
        if (!std::isfinite(v))
            throw ValidationError("non-finite value of '" + expr.str() + "' at y=" + point_text(y, grid.dim));
        out.push_back(v);
    });
    return out;
}

ValidationReport validate(const CoefficientSet& coeffs, const CellGrid& grid, const ValidateOptions& opts) {
    grid.check();
    if (coeffs.dim != grid.dim) throw ValidationError("coefficient dimension does not match grid dimension");
    const int d = coeffs.dim;
    const int m = coeffs.m;
    const int md = m * d;
    ValidationReport rep;
    rep.mu_observed = std::numeric_limits<double>::infinity();
    rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
    rep.symmetric_A_observed = true;
    double vmax = 0.0, bmax = 0.0, cmax = 0.0;
    CoeffValues vals(d, m);
    Eigen::MatrixXd Q(md, md);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;

    auto visit = [&](const double* y) {
        evaluate(coeffs, y, vals);
        auto check_finite = [&](const std::vector<double>& v, const char* what) {
            for (double x : v)
                if (!std::isfinite(x))
                    throw ValidationError(std::string("non-finite ") + what + " coefficient at y=" + point_text(y, d));
        };
        check_finite(vals.A, "A");
        check_finite(vals.V, "V");
        check_finite(vals.B, "B");
        check_finite(vals.c, "c");
        // Quadratic form over xi in R^{m x d}: row (i, alpha), column (j, beta).
        for (int i = 0; i < d; ++i)
            for (int al = 0; al < m; ++al)
                for (int j = 0; j < d; ++j)
                    for (int be = 0; be < m; ++be) {
                        const double aij = vals.a(i, j, al, be);
                        const double aji = vals.a(j, i, be, al);
                        Q(i * m + al, j * m + be) = 0.5 * (aij + aji);
                        if (std::fabs(aij - aji) > opts.symmetry_tol * (1.0 + std::fabs(aij)))
                            rep.symmetric_A_observed = false;
                    }
        eig.compute(Q, Eigen::EigenvaluesOnly);
        rep.mu_observed = std::min(rep.mu_observed, eig.eigenvalues().minCoeff());
        rep.max_eigenvalue = std::max(rep.max_eigenvalue, eig.eigenvalues().maxCoeff());
        auto frob = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x * x;
            return std::sqrt(s);
        };
        vmax = std::max(vmax, frob(vals.V));
        bmax = std::max(bmax, frob(vals.B));
        cmax = std::max(cmax, frob(vals.c));
    };
    for_each_sample(grid, 1, visit);
    if (opts.include_midpoints) {
        // Midpoints of the N grid are the odd points of the 2N grid.
        const int n2 = grid.N * 2;
        double y[3] = {0.0, 0.0, 0.0};
        if (d == 2) {
            for (int a = 1; a < n2; a += 2)
                for (int b = 1; b < n2; b += 2) {
                    y[0] = static_cast<double>(a) / n2;
                    y[1] = static_cast<double>(b) / n2;
                    visit(y);
                }
        } else {
            for (int a = 1; a < n2; a += 2)
                for (int b = 1; b < n2; b += 2)
                    for (int c = 1; c < n2; c += 2) {
                        y[0] = static_cast<double>(a) / n2;
                        y[1] = static_cast<double>(b) / n2;
                        y[2] = static_cast<double>(c) / n2;
                        visit(y);
                    }
        }
    }

    rep.kappa_observed = std::max({vmax, bmax, cmax});
    rep.detail["V"] = vmax;
    rep.detail["B"] = bmax;
    rep.detail["c"] = cmax;
    rep.detail["min_eigenvalue"] = rep.mu_observed;
    rep.detail["max_eigenvalue"] = rep.max_eigenvalue;

    if (!(rep.mu_observed > 0.0)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "ellipticity violated: smallest eigenvalue of A is %.6g", rep.mu_observed);
        throw ValidationError(buf);
    }
    if (coeffs.kappa_bound > 0.0 && rep.kappa_observed > coeffs.kappa_bound) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "boundedness violated: max |V|,|B|,|c| = %.6g exceeds configured kappa %.6g",
                      rep.kappa_observed, coeffs.kappa_bound);
        throw ValidationError(buf);
    }
    if (coeffs.symmetric_A && !rep.symmetric_A_observed)
        throw ValidationError("symmetric_A is declared but A is not symmetric on the grid");
    return rep;
}

namespace {

ScalarFieldExpr cell_expr(const std::string& text, int dim) {
    const auto vars = cell_variables(dim);
    return parse_expr(text, vars);
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Uniform double in [0,1) from the top 53 bits; independent of the standard library's distributions.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Random trigonometric polynomial with total amplitude `amp`, mean zero.
std::string random_trig(std::mt19937_64& rng, double amp, int terms) {
    std::vector<double> w(static_cast<std::size_t>(terms));
    double total = 0.0;
    for (auto& x : w) {
        x = 0.2 + unit(rng);
        total += x;
    }
    std::string s;
    for (int t = 0; t < terms; ++t) {
        const int k1 = static_cast<int>(rng() % 3);
        int k2 = static_cast<int>(rng() % 3) - 1;
        if (k1 == 0 && k2 <= 0) k2 = 1;
        const double phase = 2.0 * unit(rng) * 3.141592653589793;
        const double a = amp * w[static_cast<std::size_t>(t)] / total;
        s += "+" + num(a) + "*cos(2*pi*(" + std::to_string(k1) + "*y1+" + std::to_string(k2) + "*y2)+" + num(phase) + ")";
    }
    return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"identity", "laminate", "laminate-b", "smooth-trig", "random-trig"}; }

CoefficientSet preset(const std::string& name, std::uint64_t seed) {
    const int d = 2;
    CoefficientSet s = CoefficientSet::zeros(d, 1);
    s.name = name;
    auto setA = [&](int i, int j, const std::string& t) { s.A[s.a_index(i, j, 0, 0)] = cell_expr(t, d); };
    if (name == "identity") {
        setA(0, 0, "1");
        setA(1, 1, "1");
        s.lambda = 1.0;
        s.symmetric_A = true;
    } else if (name == "laminate" || name == "laminate-b") {
        setA(0, 0, "2+sin(2*pi*y1)");
        setA(1, 1, "2+sin(2*pi*y1)");
        s.lambda = 1.0;
        s.symmetric_A = true;
        if (name == "laminate-b") {
            s.B[s.v_index(0, 0, 0)] = cell_expr("0.5*cos(2*pi*y1)", d);
            s.B[s.v_index(1, 0, 0)] = cell_expr("0.5*sin(2*pi*y1)", d);
            s.lambda = 2.0;
        }
    } else if (name == "smooth-trig") {
        setA(0, 0, "2+0.5*sin(2*pi*y1)+0.3*cos(2*pi*y2)");
        setA(0, 1, "0.3*sin(2*pi*(y1+y2))");
        setA(1, 0, "0.3*sin(2*pi*(y1+y2))");
        setA(1, 1, "2+0.5*cos(2*pi*y1)*sin(2*pi*y2)");
        s.V[s.v_index(0, 0, 0)] = cell_expr("0.3*sin(2*pi*y2)", d);
        s.V[s.v_index(1, 0, 0)] = cell_expr("0.3*cos(2*pi*y1)", d);
        s.B[s.v_index(0, 0, 0)] = cell_expr("0.2*cos(2*pi*y2)", d);
        s.B[s.v_index(1, 0, 0)] = cell_expr("0.2*sin(2*pi*y1)", d);
        s.c[0] = cell_expr("0.5+0.3*sin(2*pi*(y1-y2))", d);
        s.lambda = 2.0;
        s.symmetric_A = true;
    } else if (name == "random-trig") {
        std::mt19937_64 rng(seed);
        const std::string a11 = "2" + random_trig(rng, 0.6, 3);
        const std::string a22 = "2" + random_trig(rng, 0.6, 3);
        const std::string a12 = "0" + random_trig(rng, 0.3, 2);
        setA(0, 0, a11);
        setA(1, 1, a22);
        setA(0, 1, a12);
        setA(1, 0, a12);
        s.V[s.v_index(0, 0, 0)] = cell_expr("0" + random_trig(rng, 0.3, 2), d);
        s.V[s.v_index(1, 0, 0)] = cell_expr("0" + random_trig(rng, 0.3, 2), d);
        s.B[s.v_index(0, 0, 0)] = cell_expr("0" + random_trig(rng, 0.3, 2), d);
        s.B[s.v_index(1, 0, 0)] = cell_expr("0" + random_trig(rng, 0.3, 2), d);
        s.c[0] = cell_expr("0.5" + random_trig(rng, 0.3, 2), d);
        s.lambda = 2.0;
        s.symmetric_A = true;
    } else {
        throw ConfigError("unknown coefficient preset '" + name + "'");
    }
    return s;
}

CoefficientSet scale_A(const CoefficientSet& coeffs, double t) {
    CoefficientSet out = coeffs;
    const auto vars = cell_variables(coeffs.dim);
    for (auto& e : out.A) e = parse_expr(num(t) + "*" + e.str(), vars);
    return out;
}

}  // namespace homog
