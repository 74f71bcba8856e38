#include "homog/fem.hpp"

#include "homog/error.hpp"
#include "homog/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

namespace homog {

namespace {

double cross2(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

const TriRule& rule_for_degree(int degree) {
    if (degree == 2) return tri_rule_degree2();
    if (degree == 4) return tri_rule_degree4();
    throw ValidationError("unsupported quadrature degree " + std::to_string(degree));
}

bool matrix_symmetric(const std::vector<double>& c, int m) {
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < a; ++b)
            if (c[static_cast<std::size_t>(a * m + b)] != c[static_cast<std::size_t>(b * m + a)]) return false;
    return true;
}

}  // namespace

VectorFunction expression_function(const std::vector<std::string>& components) {
    const auto vars = physical_variables(2);
    std::vector<ScalarFieldExpr> exprs;
    for (const auto& c : components) exprs.push_back(parse_expr(c, vars));
    return [exprs](Point p, double* out) {
        const double x[2] = {p.x, p.y};
        for (std::size_t k = 0; k < exprs.size(); ++k) out[k] = exprs[k].eval(std::span<const double>(x, 2));
    };
}

VectorFunction constant_function(std::vector<double> values) {
    return [values](Point, double* out) { std::copy(values.begin(), values.end(), out); };
}

FemFunction FemFunction::zeros(const TriMesh& mesh, int m) {
    FemFunction u;
    u.mesh = &mesh;
    u.m = m;
    u.values.assign(mesh.num_nodes() * static_cast<std::size_t>(m), 0.0);
    return u;
}

FemFunction FemFunction::interpolate(const TriMesh& mesh, int m, const VectorFunction& f) {
    FemFunction u = zeros(mesh, m);
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) f(mesh.nodes[n], &u.values[n * static_cast<std::size_t>(m)]);
    return u;
}

double FemFunction::eval(std::size_t t, const std::array<double, 3>& l, int comp) const {
    const auto& T = mesh->tris[t];
    return l[0] * at(static_cast<std::size_t>(T[0]), comp) + l[1] * at(static_cast<std::size_t>(T[1]), comp) +
           l[2] * at(static_cast<std::size_t>(T[2]), comp);
}

Point FemFunction::gradient(std::size_t t, int comp) const {
    const auto g = basis_gradients(*mesh, t);
    const auto& T = mesh->tris[t];
    Point out{0.0, 0.0};
    for (int a = 0; a < 3; ++a) {
        const double v = at(static_cast<std::size_t>(T[static_cast<std::size_t>(a)]), comp);
        out.x += v * g[static_cast<std::size_t>(a)].x;
        out.y += v * g[static_cast<std::size_t>(a)].y;
    }
    return out;
}

void FemFunction::evaluate(Point p, double* out) const {
    std::array<double, 3> l;
    const int t = mesh->locate(p, l);
    if (t < 0) throw ValidationError("point outside the mesh");
    for (int c = 0; c < m; ++c) out[c] = eval(static_cast<std::size_t>(t), l, c);
}

std::array<Point, 3> basis_gradients(const TriMesh& mesh, std::size_t t) {
    const auto& T = mesh.tris[t];
    const Point a = mesh.nodes[static_cast<std::size_t>(T[0])], b = mesh.nodes[static_cast<std::size_t>(T[1])],
                c = mesh.nodes[static_cast<std::size_t>(T[2])];
    const double det = cross2(a, b, c);
    return {Point{(b.y - c.y) / det, (c.x - b.x) / det}, Point{(c.y - a.y) / det, (a.x - c.x) / det},
            Point{(a.y - b.y) / det, (b.x - a.x) / det}};
}

Point map_point(const TriMesh& mesh, std::size_t t, const std::array<double, 3>& l) {
    const auto& T = mesh.tris[t];
    Point p{0.0, 0.0};
    for (int a = 0; a < 3; ++a) {
        const Point q = mesh.nodes[static_cast<std::size_t>(T[static_cast<std::size_t>(a)])];
        p.x += l[static_cast<std::size_t>(a)] * q.x;
        p.y += l[static_cast<std::size_t>(a)] * q.y;
    }
    return p;
}

OscillatingCoefficients::OscillatingCoefficients(CoefficientSet coeffs, double epsilon) : coeffs_(std::move(coeffs)), eps_(epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("oscillation scale must be positive");
    if (coeffs_.dim != 2) throw ValidationError("finite elements are implemented for d = 2");
    dim_ = coeffs_.dim;
    m_ = coeffs_.m;
    lambda_ = coeffs_.lambda;
    bool c_sym = true;
    for (int a = 0; a < m_; ++a)
        for (int b = 0; b < a; ++b)
            if (!(coeffs_.c[coeffs_.c_index(a, b)] == coeffs_.c[coeffs_.c_index(b, a)])) c_sym = false;
    bool a_sym = coeffs_.symmetric_A;
    if (!a_sym) {
        a_sym = true;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                for (int al = 0; al < m_; ++al)
                    for (int be = 0; be < m_; ++be)
                        if (!(coeffs_.A[coeffs_.a_index(i, j, al, be)] == coeffs_.A[coeffs_.a_index(j, i, be, al)])) a_sym = false;
    }
    symmetric_ = a_sym && c_sym && !coeffs_.has_V() && !coeffs_.has_B();
}

void OscillatingCoefficients::eval(Point x, CoeffValues& out) const {
    const double y[2] = {x.x / eps_, x.y / eps_};
    evaluate(coeffs_, y, out);
}

ConstantCoefficients::ConstantCoefficients(const HomogenizedTensors& t) : values_(t.dim, t.m) {
    dim_ = t.dim;
    m_ = t.m;
    lambda_ = t.lambda;
    values_.A = t.A;
    values_.V = t.V;
    values_.B = t.B;
    values_.c = t.c;
    bool a_sym = true;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            for (int al = 0; al < m_; ++al)
                for (int be = 0; be < m_; ++be)
                    if (t.a(i, j, al, be) != t.a(j, i, be, al)) a_sym = false;
    const bool no_first = std::all_of(t.V.begin(), t.V.end(), [](double v) { return v == 0.0; }) &&
                          std::all_of(t.B.begin(), t.B.end(), [](double v) { return v == 0.0; });
    symmetric_ = a_sym && no_first && matrix_symmetric(t.c, m_);
}

void ConstantCoefficients::eval(Point, CoeffValues& out) const { out = values_; }

namespace {

// Element matrix with local dof (a, alpha) at a*m + alpha; row = test, column = trial.
void element_matrix(const PointCoefficients& coeffs, const TriMesh& mesh, std::size_t t, const TriRule& rule, CoeffValues& cv,
                    std::vector<double>& Ke) {
    const int m = coeffs.m();
    const int n = 3 * m;
    Ke.assign(static_cast<std::size_t>(n * n), 0.0);
    const auto g = basis_gradients(mesh, t);
    const double area = mesh.area(t);
    const double lam = coeffs.lambda();
    for (const auto& q : rule) {
        coeffs.eval(map_point(mesh, t, q.l), cv);
        const double w = q.w * area;
        for (int a = 0; a < 3; ++a) {
            const double ga[2] = {g[static_cast<std::size_t>(a)].x, g[static_cast<std::size_t>(a)].y};
            const double la = q.l[static_cast<std::size_t>(a)];
            for (int b = 0; b < 3; ++b) {
                const double gb[2] = {g[static_cast<std::size_t>(b)].x, g[static_cast<std::size_t>(b)].y};
                const double lb = q.l[static_cast<std::size_t>(b)];
                for (int al = 0; al < m; ++al)
                    for (int be = 0; be < m; ++be) {
                        double s = 0.0;
                        for (int i = 0; i < 2; ++i) {
                            for (int j = 0; j < 2; ++j) s += cv.a(i, j, al, be) * gb[j] * ga[i];
                            s += cv.V[static_cast<std::size_t>((i * m + al) * m + be)] * lb * ga[i];
                            s += cv.B[static_cast<std::size_t>((i * m + al) * m + be)] * gb[i] * la;
                        }
                        s += (cv.c[static_cast<std::size_t>(al * m + be)] + (al == be ? lam : 0.0)) * lb * la;
                        Ke[static_cast<std::size_t>((a * m + al) * n + b * m + be)] += w * s;
                    }
            }
        }
    }
}

// Cache key for element matrices that repeat periodically on a structured mesh.
struct PeriodicKey {
    bool usable = false;
    long period_cells = 1;
};

PeriodicKey periodic_key(const PointCoefficients& coeffs, const TriMesh& mesh) {
    PeriodicKey k;
    if (!mesh.structured) return k;
    const double eps = coeffs.epsilon();
    if (eps == 0.0) {
        k.usable = true;
        k.period_cells = 1;
        return k;
    }
    const double P = eps / mesh.h;
    const double ox = mesh.grid.x0 / eps, oy = mesh.grid.y0 / eps;
    if (std::abs(P - std::round(P)) > 1e-9 * P || std::abs(ox - std::round(ox)) > 1e-9 || std::abs(oy - std::round(oy)) > 1e-9) return k;
    k.usable = true;
    k.period_cells = std::lround(P);
    return k;
}

}  // namespace

SparseMatrix assemble_matrix(const PointCoefficients& coeffs, const TriMesh& mesh, const AssembleOptions& opts,
                             std::vector<std::string>* warnings) {
    const double eps = coeffs.epsilon();
    if (eps > 0.0) {
        if (eps < 2.0 * mesh.h * (1.0 - 1e-12) && !opts.allow_underresolved)
            throw ValidationError("epsilon = " + std::to_string(eps) + " is below 2h (h = " + std::to_string(mesh.h) + "); quadrature cannot resolve the oscillation");
        if (eps < 4.0 * mesh.h * (1.0 - 1e-12) && warnings)
            warnings->push_back("epsilon below 4h: oscillating integrands are only marginally resolved");
    }
    int degree = opts.quadrature_degree;
    if (degree == 0) degree = eps > 0.0 ? 4 : 2;
    const TriRule& rule = rule_for_degree(degree);
    const int m = coeffs.m();
    const int n = 3 * m;
    SparseMatrix K = p1_pattern(mesh, m);
    CoeffValues cv(coeffs.dim(), m);
    std::vector<double> Ke;
    const PeriodicKey pk = periodic_key(coeffs, mesh);
    std::unordered_map<long, std::vector<double>> cache;

    for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
        const std::vector<double>* E = nullptr;
        if (pk.usable) {
            const int cell = mesh.grid.tri_cell[t];
            const long i = cell % mesh.grid.nx, j = cell / mesh.grid.nx;
            const long P = pk.period_cells;
            const long key = (((i % P) * P + (j % P)) * 2 + (StructuredInfo::slash(static_cast<int>(i), static_cast<int>(j)) ? 1 : 0)) * 2 +
                             mesh.grid.tri_half[t];
            auto it = cache.find(key);
            if (it == cache.end()) {
                element_matrix(coeffs, mesh, t, rule, cv, Ke);
                it = cache.emplace(key, Ke).first;
            }
            E = &it->second;
        } else {
            element_matrix(coeffs, mesh, t, rule, cv, Ke);
            E = &Ke;
        }
        const auto& T = mesh.tris[t];
        for (int a = 0; a < 3; ++a)
            for (int al = 0; al < m; ++al) {
                const int r = T[static_cast<std::size_t>(a)] * m + al;
                for (int b = 0; b < 3; ++b)
                    for (int be = 0; be < m; ++be) {
                        const int c = T[static_cast<std::size_t>(b)] * m + be;
                        const double v = opts.adjoint ? (*E)[static_cast<std::size_t>((b * m + be) * n + a * m + al)]
                                                      : (*E)[static_cast<std::size_t>((a * m + al) * n + b * m + be)];
                        scatter_add(K, r, c, v);
                    }
            }
    }
    return K;
}

Vec assemble_load(const TriMesh& mesh, int m, const ProblemData& data) {
    Vec b(mesh.num_nodes() * static_cast<std::size_t>(m), 0.0);
    std::vector<double> fv(static_cast<std::size_t>(m));
    if (data.F || data.F_fem) {
        const TriRule& rule = tri_rule_degree4();
        for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
            const double area = mesh.area(t);
            const auto& T = mesh.tris[t];
            for (const auto& q : rule) {
                if (data.F_fem) {
                    for (int al = 0; al < m; ++al) fv[static_cast<std::size_t>(al)] = data.F_fem->eval(t, q.l, al);
                } else {
                    data.F(map_point(mesh, t, q.l), fv.data());
                }
                for (int a = 0; a < 3; ++a)
                    for (int al = 0; al < m; ++al)
                        b[static_cast<std::size_t>(T[static_cast<std::size_t>(a)] * m + al)] +=
                            q.w * area * fv[static_cast<std::size_t>(al)] * q.l[static_cast<std::size_t>(a)];
            }
        }
    }
    if (data.bc == BcKind::Neumann && data.flux) {
        const auto line = gauss_line(3);
        for (const auto& e : mesh.boundary) {
            const Point pa = mesh.nodes[static_cast<std::size_t>(e.a)], pb = mesh.nodes[static_cast<std::size_t>(e.b)];
            for (const auto& q : line) {
                data.flux({pa.x + q.t * (pb.x - pa.x), pa.y + q.t * (pb.y - pa.y)}, fv.data());
                for (int al = 0; al < m; ++al) {
                    b[static_cast<std::size_t>(e.a * m + al)] += q.w * e.length * fv[static_cast<std::size_t>(al)] * (1.0 - q.t);
                    b[static_cast<std::size_t>(e.b * m + al)] += q.w * e.length * fv[static_cast<std::size_t>(al)] * q.t;
                }
            }
        }
    }
    return b;
}

AssembledSystem assemble(const PointCoefficients& coeffs, const TriMesh& mesh, const ProblemData& data, const AssembleOptions& opts) {
    AssembledSystem sys;
    sys.mesh = &mesh;
    sys.m = coeffs.m();
    sys.matrix = assemble_matrix(coeffs, mesh, opts, &sys.warnings);
    sys.rhs = assemble_load(mesh, sys.m, data);
    sys.symmetric = coeffs.symmetric();
    const std::size_t ndof = sys.rhs.size();
    sys.constrained.assign(ndof, 0);
    sys.constrained_values.assign(ndof, 0.0);
    if (data.bc == BcKind::Dirichlet) {
        std::vector<double> gv(static_cast<std::size_t>(sys.m), 0.0);
        for (std::size_t nd = 0; nd < mesh.num_nodes(); ++nd) {
            if (!mesh.on_boundary[nd]) continue;
            if (data.g) data.g(mesh.nodes[nd], gv.data());
            for (int al = 0; al < sys.m; ++al) {
                sys.constrained[nd * static_cast<std::size_t>(sys.m) + static_cast<std::size_t>(al)] = 1;
                sys.constrained_values[nd * static_cast<std::size_t>(sys.m) + static_cast<std::size_t>(al)] = gv[static_cast<std::size_t>(al)];
            }
        }
        eliminate_dirichlet(sys.matrix, sys.rhs, sys.constrained, sys.constrained_values);
    }
    return sys;
}

FemFunction solve(const AssembledSystem& system, const SolveOptions& opts, SolveStats* stats) {
    FemFunction u = FemFunction::zeros(*system.mesh, system.m);
    SolveStats st;
    st.method = system.symmetric ? "cg" : "bicgstab";
    auto apply = [&](const Vec& x, Vec& y) { multiply(system.matrix, x, y); };
    Vec x(system.rhs.size(), 0.0);
    // Start from the boundary values so constrained rows are satisfied from the outset.
    for (std::size_t i = 0; i < x.size(); ++i)
        if (system.constrained[i]) x[i] = system.constrained_values[i];
    bool use_mg = opts.preconditioner == Preconditioner::Multigrid ||
                  (opts.preconditioner == Preconditioner::Auto && MultigridPreconditioner::supported(*system.mesh));
    KrylovResult res;
    if (use_mg) {
        MultigridPreconditioner mg(*system.mesh, system.m, system.matrix, system.constrained);
        st.preconditioner = "multigrid(" + std::to_string(mg.num_levels()) + ")";
        auto prec = [&](const Vec& r, Vec& z) { mg.apply(r, z); };
        res = system.symmetric ? conjugate_gradient(apply, prec, system.rhs, x, opts.tol, opts.max_iter)
                               : bicgstab(apply, prec, system.rhs, x, opts.tol, opts.max_iter);
    } else {
        JacobiPreconditioner jac(system.matrix);
        st.preconditioner = "jacobi";
        auto prec = [&](const Vec& r, Vec& z) { jac.apply(r, z); };
        res = system.symmetric ? conjugate_gradient(apply, prec, system.rhs, x, opts.tol, opts.max_iter)
                               : bicgstab(apply, prec, system.rhs, x, opts.tol, opts.max_iter);
    }
    st.iterations = res.iterations;
    st.relative_residual = res.relative_residual;
    if (stats) *stats = st;
    if (!res.converged)
        throw SolverError(st.method + " did not converge in " + std::to_string(res.iterations) + " iterations (relative residual " +
                          std::to_string(res.relative_residual) + ")");
    u.values = std::move(x);
    return u;
}

double bilinear_form(const SparseMatrix& K, const Vec& u, const Vec& v) {
    Vec Ku;
    multiply(K, u, Ku);
    double s = 0.0;
    for (std::size_t i = 0; i < Ku.size(); ++i) s += v[i] * Ku[i];
    return s;
}

Lambda0Estimate estimate_lambda0(const CoefficientSet& coeffs, std::uint64_t seed, int samples) {
    const CellGrid grid{coeffs.dim, 64};
    const auto rep = validate(coeffs, grid);
    Lambda0Estimate est;
    est.analytic = rep.kappa_observed * rep.kappa_observed / rep.mu_observed + rep.kappa_observed;
    est.lambda0 = est.analytic;
    est.samples = samples;
    if (coeffs.dim != 2) return est;

    const auto domain = PolygonDomain::from_name("square");
    const TriMesh mesh = triangulate(domain, 1.0 / 32.0);
    const int m = coeffs.m;
    // H1 Gram matrix from the identity operator with lambda = 1.
    HomogenizedTensors id;
    id.dim = 2;
    id.m = m;
    id.lambda = 1.0;
    id.A.assign(static_cast<std::size_t>(4 * m * m), 0.0);
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < m; ++a) id.A[static_cast<std::size_t>(((i * 2 + i) * m + a) * m + a)] = 1.0;
    id.V.assign(static_cast<std::size_t>(2 * m * m), 0.0);
    id.B = id.V;
    id.c.assign(static_cast<std::size_t>(m * m), 0.0);
    const SparseMatrix G = assemble_matrix(ConstantCoefficients(id), mesh);

    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<Vec> fields;
    for (int s = 0; s < samples; ++s) {
        // Smooth random trigonometric fields plus a little nodal noise, so both the
        // zeroth-order and the gradient parts of the form are exercised.
        Vec u(mesh.num_nodes() * static_cast<std::size_t>(m));
        std::vector<std::array<double, 5>> modes;
        for (int k = 0; k < 4 * m; ++k) modes.push_back({std::floor(4 * unit()), std::floor(4 * unit()), 2 * M_PI * unit(), 2 * unit() - 1, 0});
        const double noise = 0.05 * unit();
        for (std::size_t nd = 0; nd < mesh.num_nodes(); ++nd)
            for (int a = 0; a < m; ++a) {
                double v = 0.0;
                for (int k = a * 4; k < a * 4 + 4; ++k) {
                    const auto& md = modes[static_cast<std::size_t>(k)];
                    v += md[3] * std::cos(M_PI * (md[0] * mesh.nodes[nd].x + md[1] * mesh.nodes[nd].y) + md[2]);
                }
                u[nd * static_cast<std::size_t>(m) + static_cast<std::size_t>(a)] = v + noise * (2 * unit() - 1);
            }
        fields.push_back(std::move(u));
    }
    for (int attempt = 0; attempt < 20; ++attempt) {
        CoefficientSet c = coeffs;
        c.lambda = est.lambda0;
        const SparseMatrix K = assemble_matrix(OscillatingCoefficients(c, 0.25), mesh);
        double qmin = 1e300;
        for (const auto& u : fields) qmin = std::min(qmin, bilinear_form(K, u, u) / bilinear_form(G, u, u));
        est.min_rayleigh = qmin;
        if (qmin >= 1e-6) return est;
        est.lambda0 = est.lambda0 > 0.0 ? 2.0 * est.lambda0 : 1.0;
        ++est.doublings;
    }
    throw SolverError("lambda0 estimate: Rayleigh check still failing after repeated doubling");
}

IdentityCheck compatibility_check(const PointCoefficients& coeffs, const ProblemData& data, const FemFunction& u, int quadrature_degree) {
    const TriMesh& mesh = *u.mesh;
    const int m = u.m;
    int degree = quadrature_degree;
    if (degree == 0) degree = coeffs.epsilon() > 0.0 ? 4 : 2;
    const TriRule& rule = rule_for_degree(degree);
    std::vector<double> lhs(static_cast<std::size_t>(m), 0.0);
    CoeffValues cv(coeffs.dim(), m);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
        const double area = mesh.area(t);
        std::vector<Point> grads(static_cast<std::size_t>(m));
        for (int be = 0; be < m; ++be) grads[static_cast<std::size_t>(be)] = u.gradient(t, be);
        for (const auto& q : rule) {
            coeffs.eval(map_point(mesh, t, q.l), cv);
            for (int al = 0; al < m; ++al) {
                double s = 0.0;
                for (int be = 0; be < m; ++be) {
                    const Point g = grads[static_cast<std::size_t>(be)];
                    s += cv.B[static_cast<std::size_t>((0 * m + al) * m + be)] * g.x + cv.B[static_cast<std::size_t>((1 * m + al) * m + be)] * g.y;
                    s += (cv.c[static_cast<std::size_t>(al * m + be)] + (al == be ? coeffs.lambda() : 0.0)) * u.eval(t, q.l, be);
                }
                lhs[static_cast<std::size_t>(al)] += q.w * area * s;
            }
        }
    }
    const Vec b = assemble_load(mesh, m, data);
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) rhs[i % static_cast<std::size_t>(m)] += b[i];
    IdentityCheck out;
    out.defect = -1.0;
    for (int al = 0; al < m; ++al) {
        const double L = lhs[static_cast<std::size_t>(al)], R = rhs[static_cast<std::size_t>(al)];
        const double scale = std::max(std::abs(L), std::abs(R));
        const double d = scale > 0.0 ? std::abs(L - R) / scale : 0.0;
        if (d > out.defect) out = {L, R, d};
    }
    return out;
}

IdentityCheck green_check(const ProblemData& data_u, const FemFunction& u, const ProblemData& data_v, const FemFunction& v) {
    const Vec bu = assemble_load(*u.mesh, u.m, data_u);
    const Vec bv = assemble_load(*v.mesh, v.m, data_v);
    IdentityCheck out;
    for (std::size_t i = 0; i < bu.size(); ++i) {
        out.lhs += bu[i] * v.values[i];
        out.rhs += bv[i] * u.values[i];
    }
    const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.defect = scale > 0.0 ? std::abs(out.lhs - out.rhs) / scale : 0.0;
    return out;
}

IdentityCheck adjoint_check(const PointCoefficients& coeffs, const TriMesh& mesh, std::uint64_t seed) {
    AssembleOptions fwd, adj;
    adj.adjoint = true;
    SparseMatrix K = assemble_matrix(coeffs, mesh, fwd);
    SparseMatrix Ks = assemble_matrix(coeffs, mesh, adj);
    const int m = coeffs.m();
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    Vec u(K.rows()), v(K.rows());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const bool bnd = mesh.on_boundary[i / static_cast<std::size_t>(m)] != 0;
        u[i] = bnd ? 0.0 : 2 * unit() - 1;
        v[i] = bnd ? 0.0 : 2 * unit() - 1;
    }
    IdentityCheck out;
    out.lhs = bilinear_form(K, u, v);
    out.rhs = bilinear_form(Ks, v, u);
    const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.defect = scale > 0.0 ? std::abs(out.lhs - out.rhs) / scale : 0.0;
    return out;
}

void write_solution_csv(const FemFunction& u, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << "x,y";
    for (int a = 0; a < u.m; ++a) os << ",u" << a;
    os << '\n';
    char buf[64];
    for (std::size_t n = 0; n < u.mesh->num_nodes(); ++n) {
        std::snprintf(buf, sizeof buf, "%.12e,%.12e", u.mesh->nodes[n].x, u.mesh->nodes[n].y);
        os << buf;
        for (int a = 0; a < u.m; ++a) {
            std::snprintf(buf, sizeof buf, ",%.12e", u.at(n, a));
            os << buf;
        }
        os << '\n';
    }
    if (!os) throw Error("failed writing '" + path + "'");
}

}  // namespace homog
