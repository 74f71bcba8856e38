#include "homog/cell.hpp"

#include "homog/error.hpp"
#include "homog/krylov.hpp"
#include "homog/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

namespace homog {

namespace {

using Complex = std::complex<double>;

/// Coefficient tensors sampled on the cell grid. Empty arrays stand for identically zero entries.
struct Sampled {
    int d = 2, m = 1;
    std::vector<PeriodicArray> A, V, B, c;

    Sampled(const CoefficientSet& coeffs, const CellGrid& grid) : d(coeffs.dim), m(coeffs.m) {
        auto sample_all = [&](const std::vector<ScalarFieldExpr>& src, std::vector<PeriodicArray>& dst) {
            dst.resize(src.size());
            for (std::size_t i = 0; i < src.size(); ++i)
                if (!src[i].is_zero()) dst[i] = sample_field(src[i], grid);
        };
        sample_all(coeffs.A, A);
        sample_all(coeffs.V, V);
        sample_all(coeffs.B, B);
        sample_all(coeffs.c, c);
    }

    // Generalised first-column tensor: k = 0 is V, k >= 1 is column k-1 of A.
    const PeriodicArray& gen_a(int i, int k, int al, int ga) const {
        if (k == 0) return V[static_cast<std::size_t>((i * m + al) * m + ga)];
        return A[static_cast<std::size_t>(((i * d + (k - 1)) * m + al) * m + ga)];
    }
    const PeriodicArray& a(int i, int j, int al, int be) const {
        return A[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)];
    }
    // Generalised lower-order tensor: k = 0 is c, k >= 1 is B_{k-1}.
    const PeriodicArray& gen_b(int k, int al, int ga) const {
        if (k == 0) return c[static_cast<std::size_t>(al * m + ga)];
        return B[static_cast<std::size_t>(((k - 1) * m + al) * m + ga)];
    }
    const PeriodicArray& b(int j, int al, int be) const { return B[static_cast<std::size_t>((j * m + al) * m + be)]; }
};

double max_abs(const PeriodicArray& f) {
    double s = 0.0;
    for (double x : f) s = std::max(s, std::fabs(x));
    return s;
}

double rms(const PeriodicArray& f) {
    if (f.empty()) return 0.0;
    PeriodicArray sq(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f[i] * f[i];
    return std::sqrt(pairwise_sum(sq.data(), sq.size()) / static_cast<double>(f.size()));
}

/// Matrix-free pseudo-spectral operator u -> -D.(A D u) on m-component fields.
class CellOperator {
public:
    CellOperator(const Sampled& s, SpectralOps& ops) : s_(s), ops_(ops), n_(ops.real_size()), ns_(ops.spectrum_size()) {}

    void apply(const Vec& u, Vec& out) {
        const int d = s_.d, m = s_.m;
        // grad[beta*d + j]
        std::vector<PeriodicArray> grad(static_cast<std::size_t>(m * d), PeriodicArray(n_));
        std::vector<Complex> U(ns_), T(ns_);
        for (int be = 0; be < m; ++be) {
            ops_.forward(u.data() + static_cast<std::size_t>(be) * n_, U.data());
            for (int j = 0; j < d; ++j) {
                const auto& k = ops_.wavenumber(j);
                for (std::size_t q = 0; q < ns_; ++q) T[q] = U[q] * Complex(0.0, k[q]);
                ops_.inverse(T.data(), grad[static_cast<std::size_t>(be * d + j)].data());
            }
        }
        out.assign(static_cast<std::size_t>(m) * n_, 0.0);
        PeriodicArray flux(n_);
        std::vector<Complex> acc(ns_);
        for (int al = 0; al < m; ++al) {
            std::fill(acc.begin(), acc.end(), Complex(0.0, 0.0));
            for (int i = 0; i < d; ++i) {
                std::fill(flux.begin(), flux.end(), 0.0);
                bool any = false;
                for (int j = 0; j < d; ++j)
                    for (int be = 0; be < m; ++be) {
                        const auto& a = s_.a(i, j, al, be);
                        if (a.empty()) continue;
                        any = true;
                        const auto& g = grad[static_cast<std::size_t>(be * d + j)];
                        for (std::size_t p = 0; p < n_; ++p) flux[p] += a[p] * g[p];
                    }
                if (!any) continue;
                ops_.forward(flux.data(), T.data());
                const auto& k = ops_.wavenumber(i);
                for (std::size_t q = 0; q < ns_; ++q) acc[q] += T[q] * Complex(0.0, k[q]);
            }
            ops_.inverse(acc.data(), out.data() + static_cast<std::size_t>(al) * n_);
            for (std::size_t p = 0; p < n_; ++p) out[static_cast<std::size_t>(al) * n_ + p] *= -1.0;
        }
    }

private:
    const Sampled& s_;
    SpectralOps& ops_;
    std::size_t n_, ns_;
};

/// Constant-coefficient inverse built from the mean of A: one m x m solve per frequency.
class MeanPreconditioner {
public:
    MeanPreconditioner(const Sampled& s, SpectralOps& ops, bool symmetrize)
        : m_(s.m), ops_(ops), n_(ops.real_size()), ns_(ops.spectrum_size()) {
        const int d = s.d, m = s.m;
        std::vector<double> abar(static_cast<std::size_t>(d * d * m * m), 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int al = 0; al < m; ++al)
                    for (int be = 0; be < m; ++be) {
                        const auto& a = s.a(i, j, al, be);
                        abar[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)] = a.empty() ? 0.0 : mean_of(a);
                    }
        if (symmetrize) {
            auto sym = abar;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    for (int al = 0; al < m; ++al)
                        for (int be = 0; be < m; ++be)
                            sym[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)] =
                                0.5 * (abar[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)] +
                                       abar[static_cast<std::size_t>(((j * d + i) * m + be) * m + al)]);
            abar = sym;
        }
        inv_.assign(ns_ * static_cast<std::size_t>(m * m), 0.0);
        Eigen::MatrixXd P(m, m);
        for (std::size_t q = 0; q < ns_; ++q) {
            if (ops.is_null_mode(q)) continue;
            P.setZero();
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const double kk = ops.wavenumber(i)[q] * ops.wavenumber(j)[q];
                    if (kk == 0.0) continue;
                    for (int al = 0; al < m; ++al)
                        for (int be = 0; be < m; ++be)
                            P(al, be) += abar[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)] * kk;
                }
            Eigen::MatrixXd Pinv = P.inverse();
            if (!Pinv.allFinite()) throw ValidationError("mean of A is singular; coefficients are not elliptic");
            for (int al = 0; al < m; ++al)
                for (int be = 0; be < m; ++be) inv_[q * static_cast<std::size_t>(m * m) + static_cast<std::size_t>(al * m + be)] = Pinv(al, be);
        }
    }

    void apply(const Vec& r, Vec& z) {
        const int m = m_;
        std::vector<std::vector<Complex>> R(static_cast<std::size_t>(m), std::vector<Complex>(ns_));
        for (int al = 0; al < m; ++al) ops_.forward(r.data() + static_cast<std::size_t>(al) * n_, R[static_cast<std::size_t>(al)].data());
        std::vector<Complex> Z(ns_);
        z.assign(static_cast<std::size_t>(m) * n_, 0.0);
        for (int al = 0; al < m; ++al) {
            for (std::size_t q = 0; q < ns_; ++q) {
                Complex acc(0.0, 0.0);
                for (int be = 0; be < m; ++be)
                    acc += inv_[q * static_cast<std::size_t>(m * m) + static_cast<std::size_t>(al * m + be)] * R[static_cast<std::size_t>(be)][q];
                Z[q] = acc;
            }
            ops_.inverse(Z.data(), z.data() + static_cast<std::size_t>(al) * n_);
        }
    }

private:
    int m_;
    SpectralOps& ops_;
    std::size_t n_, ns_;
    std::vector<double> inv_;
};

bool sampled_symmetric(const Sampled& s) {
    const int d = s.d, m = s.m;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int al = 0; al < m; ++al)
                for (int be = 0; be < m; ++be) {
                    const auto& x = s.a(i, j, al, be);
                    const auto& y = s.a(j, i, be, al);
                    if (x.empty() != y.empty()) return false;
                    if (x != y) return false;
                }
    return true;
}

MatrixField solve_corrector_sampled(const Sampled& s, SpectralOps& ops, int k, const CellSolveOptions& opts,
                                    CellSolveStats* stats) {
    const int d = s.d, m = s.m;
    if (k < 0 || k > d) throw ValidationError("corrector index out of range");
    const std::size_t n = ops.real_size(), ns = ops.spectrum_size();
    const bool symmetric = sampled_symmetric(s);
    CellOperator op(s, ops);
    MeanPreconditioner pre(s, ops, symmetric);
    MatrixField chi(static_cast<std::size_t>(m * m), PeriodicArray(n, 0.0));
    CellSolveStats st;
    st.method = symmetric ? "cg" : "bicgstab";
    for (int ga = 0; ga < m; ++ga) {
        // Right-hand side D.f with f_i^alpha the generalised column (k, gamma).
        Vec rhs(static_cast<std::size_t>(m) * n, 0.0);
        std::vector<Complex> acc(ns), T(ns);
        for (int al = 0; al < m; ++al) {
            std::fill(acc.begin(), acc.end(), Complex(0.0, 0.0));
            bool any = false;
            for (int i = 0; i < d; ++i) {
                const auto& f = s.gen_a(i, k, al, ga);
                if (f.empty()) continue;
                any = true;
                ops.forward(f.data(), T.data());
                const auto& kk = ops.wavenumber(i);
                for (std::size_t q = 0; q < ns; ++q) acc[q] += T[q] * Complex(0.0, kk[q]);
            }
            if (any) ops.inverse(acc.data(), rhs.data() + static_cast<std::size_t>(al) * n);
        }
        Vec x(rhs.size(), 0.0);
        auto apply = [&](const Vec& u, Vec& y) { op.apply(u, y); };
        auto prec = [&](const Vec& r, Vec& z) { pre.apply(r, z); };
        KrylovResult res = symmetric ? conjugate_gradient(apply, prec, rhs, x, opts.tol, opts.max_iter)
                                     : bicgstab(apply, prec, rhs, x, opts.tol, opts.max_iter);
        if (!res.converged)
            throw SolverError("cell problem k=" + std::to_string(k) + " did not converge in " +
                              std::to_string(opts.max_iter) + " iterations (relative residual " +
                              std::to_string(res.relative_residual) + ")");
        st.iterations = std::max(st.iterations, res.iterations);
        st.relative_residual = std::max(st.relative_residual, res.relative_residual);
        for (int be = 0; be < m; ++be) {
            PeriodicArray comp(x.begin() + static_cast<std::ptrdiff_t>(be) * static_cast<std::ptrdiff_t>(n),
                               x.begin() + static_cast<std::ptrdiff_t>(be + 1) * static_cast<std::ptrdiff_t>(n));
            chi[static_cast<std::size_t>(be * m + ga)] = ops.project_mean_zero(comp);
        }
    }
    if (stats) *stats = st;
    return chi;
}

void check_grid(const CoefficientSet& coeffs, const CellGrid& grid) {
    grid.check();
    if (coeffs.dim != grid.dim) throw ValidationError("coefficient dimension does not match the cell grid");
}

// Spectral gradients of every entry: out[k*d + j][entry].
std::vector<MatrixField> gradients(const std::vector<MatrixField>& fields, SpectralOps& ops, int d) {
    std::vector<MatrixField> out(fields.size() * static_cast<std::size_t>(d));
    for (std::size_t k = 0; k < fields.size(); ++k) {
        for (int j = 0; j < d; ++j) out[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)].resize(fields[k].size());
        for (std::size_t e = 0; e < fields[k].size(); ++e) {
            auto g = ops.gradient(fields[k][e]);
            for (int j = 0; j < d; ++j) out[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)][e] = std::move(g[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

void require_correctors(const std::vector<MatrixField>& chi, int d, int m, std::size_t n) {
    if (chi.size() != static_cast<std::size_t>(d + 1))
        throw ValidationError("missing corrector: expected " + std::to_string(d + 1) + " correctors, got " +
                              std::to_string(chi.size()));
    for (const auto& c : chi) {
        if (c.size() != static_cast<std::size_t>(m * m)) throw ValidationError("missing corrector component");
        for (const auto& f : c)
            if (f.size() != n) throw ValidationError("inconsistent grid: corrector size does not match the grid");
    }
}

}  // namespace

MatrixField solve_cell_corrector(const CoefficientSet& coeffs, const CellGrid& grid, int k, const CellSolveOptions& opts,
                                 CellSolveStats* stats) {
    check_grid(coeffs, grid);
    validate(coeffs, grid);
    Sampled s(coeffs, grid);
    SpectralOps ops(grid);
    return solve_corrector_sampled(s, ops, k, opts, stats);
}

std::vector<MatrixField> solve_all_correctors(const CoefficientSet& coeffs, const CellGrid& grid,
                                              const CellSolveOptions& opts) {
    check_grid(coeffs, grid);
    Sampled s(coeffs, grid);
    SpectralOps ops(grid);
    std::vector<MatrixField> chi;
    for (int k = 0; k <= coeffs.dim; ++k) chi.push_back(solve_corrector_sampled(s, ops, k, opts, nullptr));
    return chi;
}

HomogenizedTensors homogenize(const CoefficientSet& coeffs, const std::vector<MatrixField>& chi, const CellGrid& grid) {
    check_grid(coeffs, grid);
    const int d = coeffs.dim, m = coeffs.m;
    const std::size_t n = grid.size();
    require_correctors(chi, d, m, n);
    Sampled s(coeffs, grid);
    SpectralOps ops(grid);
    const auto dchi = gradients(chi, ops, d);
    auto dchi_at = [&](int k, int j, int ga, int be) -> const PeriodicArray& {
        return dchi[static_cast<std::size_t>(k * d + j)][static_cast<std::size_t>(ga * m + be)];
    };

    HomogenizedTensors h;
    h.dim = d;
    h.m = m;
    h.lambda = coeffs.lambda;
    h.A.assign(static_cast<std::size_t>(d * d * m * m), 0.0);
    h.V.assign(static_cast<std::size_t>(d * m * m), 0.0);
    h.B.assign(static_cast<std::size_t>(d * m * m), 0.0);
    h.c.assign(static_cast<std::size_t>(m * m), 0.0);

    PeriodicArray work(n);
    // Generalised flux average: mean(a_ik + a_ij d_j chi_k) for k = 0..d.
    for (int i = 0; i < d; ++i)
        for (int k = 0; k <= d; ++k)
            for (int al = 0; al < m; ++al)
                for (int be = 0; be < m; ++be) {
                    const auto& base = s.gen_a(i, k, al, be);
                    if (base.empty())
                        std::fill(work.begin(), work.end(), 0.0);
                    else
                        work = base;
                    for (int j = 0; j < d; ++j)
                        for (int ga = 0; ga < m; ++ga) {
                            const auto& a = s.a(i, j, al, ga);
                            if (a.empty()) continue;
                            const auto& g = dchi_at(k, j, ga, be);
                            for (std::size_t p = 0; p < n; ++p) work[p] += a[p] * g[p];
                        }
                    const double v = mean_of(work);
                    if (k == 0)
                        h.V[static_cast<std::size_t>((i * m + al) * m + be)] = v;
                    else
                        h.A[static_cast<std::size_t>(((i * d + (k - 1)) * m + al) * m + be)] = v;
                }
    // Lower-order averages: mean(B_k + B_j d_j chi_k), with B_0 = c.
    for (int k = 0; k <= d; ++k)
        for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
                const auto& base = s.gen_b(k, al, be);
                if (base.empty())
                    std::fill(work.begin(), work.end(), 0.0);
                else
                    work = base;
                for (int j = 0; j < d; ++j)
                    for (int ga = 0; ga < m; ++ga) {
                        const auto& bj = s.b(j, al, ga);
                        if (bj.empty()) continue;
                        const auto& g = dchi_at(k, j, ga, be);
                        for (std::size_t p = 0; p < n; ++p) work[p] += bj[p] * g[p];
                    }
                const double v = mean_of(work);
                if (k == 0)
                    h.c[static_cast<std::size_t>(al * m + be)] = v;
                else
                    h.B[static_cast<std::size_t>(((k - 1) * m + al) * m + be)] = v;
            }
    return h;
}

FluxFields build_flux_fields(const CoefficientSet& coeffs, const std::vector<MatrixField>& chi,
                             const HomogenizedTensors& hats, const CellGrid& grid) {
    check_grid(coeffs, grid);
    const int d = coeffs.dim, m = coeffs.m;
    const std::size_t n = grid.size();
    require_correctors(chi, d, m, n);
    if (hats.dim != d || hats.m != m) throw ValidationError("inconsistent grid: homogenized tensors have wrong shape");
    Sampled s(coeffs, grid);
    SpectralOps ops(grid);
    const auto dchi = gradients(chi, ops, d);
    auto gen_hat_a = [&](int i, int k, int al, int ga) {
        return k == 0 ? hats.v(i, al, ga) : hats.a(i, k - 1, al, ga);
    };
    auto gen_hat_b = [&](int k, int al, int ga) { return k == 0 ? hats.cc(al, ga) : hats.b(k - 1, al, ga); };

    FluxFields out;
    out.b.assign(static_cast<std::size_t>(d * (d + 1)), MatrixField(static_cast<std::size_t>(m * m), PeriodicArray(n, 0.0)));
    out.W.assign(static_cast<std::size_t>(d + 1), MatrixField(static_cast<std::size_t>(m * m), PeriodicArray(n, 0.0)));
    for (int k = 0; k <= d; ++k)
        for (int al = 0; al < m; ++al)
            for (int ga = 0; ga < m; ++ga) {
                for (int i = 0; i < d; ++i) {
                    auto& f = out.b[static_cast<std::size_t>(i * (d + 1) + k)][static_cast<std::size_t>(al * m + ga)];
                    const double hat = gen_hat_a(i, k, al, ga);
                    const auto& base = s.gen_a(i, k, al, ga);
                    for (std::size_t p = 0; p < n; ++p) f[p] = hat - (base.empty() ? 0.0 : base[p]);
                    for (int j = 0; j < d; ++j)
                        for (int be = 0; be < m; ++be) {
                            const auto& a = s.a(i, j, al, be);
                            if (a.empty()) continue;
                            const auto& g = dchi[static_cast<std::size_t>(k * d + j)][static_cast<std::size_t>(be * m + ga)];
                            for (std::size_t p = 0; p < n; ++p) f[p] -= a[p] * g[p];
                        }
                }
                auto& w = out.W[static_cast<std::size_t>(k)][static_cast<std::size_t>(al * m + ga)];
                const double hat = gen_hat_b(k, al, ga);
                const auto& base = s.gen_b(k, al, ga);
                for (std::size_t p = 0; p < n; ++p) w[p] = hat - (base.empty() ? 0.0 : base[p]);
                for (int j = 0; j < d; ++j)
                    for (int be = 0; be < m; ++be) {
                        const auto& bj = s.b(j, al, be);
                        if (bj.empty()) continue;
                        const auto& g = dchi[static_cast<std::size_t>(k * d + j)][static_cast<std::size_t>(be * m + ga)];
                        for (std::size_t p = 0; p < n; ++p) w[p] -= bj[p] * g[p];
                    }
            }
    return out;
}

std::vector<MatrixField> solve_theta(const std::vector<MatrixField>& W, const CellGrid& grid, double mean_tol) {
    grid.check();
    SpectralOps ops(grid);
    std::vector<MatrixField> theta;
    for (const auto& Wk : W) {
        MatrixField t;
        for (const auto& f : Wk) {
            if (f.size() != grid.size()) throw ValidationError("inconsistent grid: W has the wrong size");
            const double mean = mean_of(f);
            if (std::fabs(mean) > mean_tol * std::max(1.0, max_abs(f)))
                throw ValidationError("W has non-zero mean " + std::to_string(mean) + "; theta is not defined");
            t.push_back(ops.solve_poisson(f));
        }
        theta.push_back(std::move(t));
    }
    return theta;
}

FluxCorrector build_flux_corrector(const std::vector<MatrixField>& b, const CellGrid& grid, int d, int m,
                                   double div_tol) {
    grid.check();
    if (b.size() != static_cast<std::size_t>(d * (d + 1))) throw ValidationError("flux field b has the wrong shape");
    SpectralOps ops(grid);
    const std::size_t n = grid.size();
    const std::size_t mm = static_cast<std::size_t>(m * m);
    FluxCorrector out;
    out.Pi.resize(b.size());
    for (std::size_t q = 0; q < b.size(); ++q) {
        if (b[q].size() != mm) throw ValidationError("flux field b has the wrong shape");
        for (const auto& f : b[q]) out.Pi[q].push_back(ops.solve_poisson(f));
    }
    // Gradients of Pi: dPi[(i*(d+1)+k)*d + j].
    std::vector<MatrixField> dPi(b.size() * static_cast<std::size_t>(d));
    for (std::size_t q = 0; q < b.size(); ++q) {
        for (int j = 0; j < d; ++j) dPi[q * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)].resize(mm);
        for (std::size_t e = 0; e < mm; ++e) {
            auto g = ops.gradient(out.Pi[q][e]);
            for (int j = 0; j < d; ++j) dPi[q * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)][e] = std::move(g[static_cast<std::size_t>(j)]);
        }
    }
    auto dpi = [&](int i, int k, int j) -> const MatrixField& {
        return dPi[static_cast<std::size_t>((i * (d + 1) + k) * d + j)];
    };
    out.E.assign(static_cast<std::size_t>(d * d * (d + 1)), MatrixField(mm, PeriodicArray(n, 0.0)));
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            for (int k = 0; k <= d; ++k) {
                auto& E = out.E[static_cast<std::size_t>((j * d + i) * (d + 1) + k)];
                if (i == j) continue;  // antisymmetric: diagonal vanishes identically
                const auto& A1 = dpi(i, k, j);  // d_j Pi_ik
                const auto& A2 = dpi(j, k, i);  // d_i Pi_jk
                for (std::size_t e = 0; e < mm; ++e)
                    for (std::size_t p = 0; p < n; ++p) E[e][p] = A1[e][p] - A2[e][p];
            }
    // Divergence of b relative to its spectral gradient scale.
    double worst = 0.0;
    for (int k = 0; k <= d; ++k)
        for (std::size_t e = 0; e < mm; ++e) {
            PeriodicArray div(n, 0.0);
            double scale = 0.0;
            for (int i = 0; i < d; ++i) {
                const auto& f = b[static_cast<std::size_t>(i * (d + 1) + k)][e];
                const auto g = ops.derivative(f, i);
                for (std::size_t p = 0; p < n; ++p) div[p] += g[p];
                scale += rms(f);
            }
            worst = std::max(worst, rms(div) / (2.0 * 3.141592653589793 * std::max(1.0, scale)));
        }
    out.divergence_residual = worst;
    out.divergence_warning = worst > div_tol;
    return out;
}

CoefficientSet adjoint_coefficients(const CoefficientSet& coeffs) {
    const int d = coeffs.dim, m = coeffs.m;
    CoefficientSet out = coeffs;
    out.name = coeffs.name + "*";
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int al = 0; al < m; ++al)
                for (int be = 0; be < m; ++be) out.A[out.a_index(i, j, al, be)] = coeffs.A[coeffs.a_index(j, i, be, al)];
    for (int i = 0; i < d; ++i)
        for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
                out.V[out.v_index(i, al, be)] = coeffs.B[coeffs.v_index(i, be, al)];
                out.B[out.v_index(i, al, be)] = coeffs.V[coeffs.v_index(i, be, al)];
            }
    for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be) out.c[out.c_index(al, be)] = coeffs.c[coeffs.c_index(be, al)];
    return out;
}

HomogenizedTensors adjoint_tensors(const HomogenizedTensors& t) {
    const int d = t.dim, m = t.m;
    HomogenizedTensors out = t;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int al = 0; al < m; ++al)
                for (int be = 0; be < m; ++be)
                    out.A[static_cast<std::size_t>(((i * d + j) * m + al) * m + be)] = t.a(j, i, be, al);
    for (int i = 0; i < d; ++i)
        for (int al = 0; al < m; ++al)
            for (int be = 0; be < m; ++be) {
                out.V[static_cast<std::size_t>((i * m + al) * m + be)] = t.b(i, be, al);
                out.B[static_cast<std::size_t>((i * m + al) * m + be)] = t.v(i, be, al);
            }
    for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be) out.c[static_cast<std::size_t>(al * m + be)] = t.cc(be, al);
    return out;
}

HomogenizedTensors constant_tensors(const CoefficientSet& coeffs) {
    HomogenizedTensors h;
    h.dim = coeffs.dim;
    h.m = coeffs.m;
    h.lambda = coeffs.lambda;
    CoeffValues v(coeffs.dim, coeffs.m);
    const double y[3] = {0.0, 0.0, 0.0};
    evaluate(coeffs, y, v);
    h.A = v.A;
    h.V = v.V;
    h.B = v.B;
    h.c = v.c;
    return h;
}

void compute_derived_fields(CellData& cell) {
    SpectralOps ops(cell.grid);
    cell.dchi = gradients(cell.chi, ops, cell.dim);
    cell.dchi_star = gradients(cell.chi_star, ops, cell.dim);
    cell.dtheta = gradients(cell.theta, ops, cell.dim);
}

CellData build_cell_data(const CoefficientSet& coeffs, const CellGrid& grid, const CellSolveOptions& opts) {
    check_grid(coeffs, grid);
    CellData cell;
    cell.grid = grid;
    cell.dim = coeffs.dim;
    cell.m = coeffs.m;
    cell.lambda = coeffs.lambda;
    cell.preset = coeffs.name;

    const CoefficientSet adj = adjoint_coefficients(coeffs);
    {
        Sampled s(coeffs, grid);
        SpectralOps ops(grid);
        for (int k = 0; k <= coeffs.dim; ++k) {
            CellSolveStats st;
            cell.chi.push_back(solve_corrector_sampled(s, ops, k, opts, &st));
            cell.stats.push_back(st);
        }
    }
    {
        Sampled s(adj, grid);
        SpectralOps ops(grid);
        for (int k = 0; k <= coeffs.dim; ++k) {
            CellSolveStats st;
            cell.chi_star.push_back(solve_corrector_sampled(s, ops, k, opts, &st));
            cell.stats.push_back(st);
        }
    }
    cell.hats = homogenize(coeffs, cell.chi, grid);
    cell.hats_star = homogenize(adj, cell.chi_star, grid);
    FluxFields flux = build_flux_fields(coeffs, cell.chi, cell.hats, grid);
    cell.b = std::move(flux.b);
    cell.W = std::move(flux.W);
    cell.theta = solve_theta(cell.W, grid, 1e-9);
    FluxCorrector fc = build_flux_corrector(cell.b, grid, cell.dim, cell.m);
    cell.Pi = std::move(fc.Pi);
    cell.E = std::move(fc.E);
    cell.divergence_residual = fc.divergence_residual;
    cell.divergence_warning = fc.divergence_warning;
    compute_derived_fields(cell);
    return cell;
}

CellInvariants check_invariants(const CellData& cell) {
    const int d = cell.dim, m = cell.m;
    const std::size_t n = cell.grid.size();
    SpectralOps ops(cell.grid);
    CellInvariants inv;
    auto max_mean = [](const std::vector<MatrixField>& fam) {
        double worst = 0.0;
        for (const auto& mf : fam)
            for (const auto& f : mf) worst = std::max(worst, std::fabs(mean_of(f)) / std::max(1.0, max_abs(f)));
        return worst;
    };
    inv.max_mean_chi = max_mean(cell.chi);
    inv.max_mean_chi_star = max_mean(cell.chi_star);
    inv.max_mean_theta = max_mean(cell.theta);
    inv.max_mean_Pi = max_mean(cell.Pi);
    inv.max_mean_b = max_mean(cell.b);
    inv.max_mean_W = max_mean(cell.W);

    const std::size_t mm = static_cast<std::size_t>(m * m);
    auto E_at = [&](int j, int i, int k) -> const MatrixField& {
        return cell.E[static_cast<std::size_t>((j * d + i) * (d + 1) + k)];
    };
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            for (int k = 0; k <= d; ++k)
                for (std::size_t e = 0; e < mm; ++e) {
                    const auto& x = E_at(j, i, k)[e];
                    const auto& y = E_at(i, j, k)[e];
                    for (std::size_t p = 0; p < n; ++p) inv.antisymmetry = std::max(inv.antisymmetry, std::fabs(x[p] + y[p]));
                }
    for (int i = 0; i < d; ++i)
        for (int k = 0; k <= d; ++k)
            for (std::size_t e = 0; e < mm; ++e) {
                PeriodicArray div(n, 0.0);
                for (int j = 0; j < d; ++j) {
                    const auto g = ops.derivative(E_at(j, i, k)[e], j);
                    for (std::size_t p = 0; p < n; ++p) div[p] += g[p];
                }
                const auto& bf = cell.b[static_cast<std::size_t>(i * (d + 1) + k)][e];
                PeriodicArray diff(n);
                for (std::size_t p = 0; p < n; ++p) diff[p] = div[p] - bf[p];
                inv.flux_residual = std::max(inv.flux_residual, rms(diff) / std::max(1.0, rms(bf)));
            }
    for (int k = 0; k <= d; ++k)
        for (std::size_t e = 0; e < mm; ++e) {
            PeriodicArray div(n, 0.0);
            double scale = 0.0;
            for (int i = 0; i < d; ++i) {
                const auto& f = cell.b[static_cast<std::size_t>(i * (d + 1) + k)][e];
                const auto g = ops.derivative(f, i);
                for (std::size_t p = 0; p < n; ++p) div[p] += g[p];
                scale += rms(f);
            }
            const double r = rms(div);
            inv.divergence_b = std::max(inv.divergence_b, r / (2.0 * 3.141592653589793 * std::max(1.0, scale)));
            const auto lap = ops.laplacian(cell.theta[static_cast<std::size_t>(k)][e]);
            const auto& w = cell.W[static_cast<std::size_t>(k)][e];
            PeriodicArray diff(n);
            for (std::size_t p = 0; p < n; ++p) diff[p] = lap[p] - w[p];
            const double ws = rms(w);
            inv.theta_residual = std::max(inv.theta_residual, rms(diff) / std::max(1.0, ws));
        }
    Eigen::MatrixXd Q(m * d, m * d);
    double asym = 0.0;
    for (int i = 0; i < d; ++i)
        for (int al = 0; al < m; ++al)
            for (int j = 0; j < d; ++j)
                for (int be = 0; be < m; ++be) {
                    const double x = cell.hats.a(i, j, al, be), y = cell.hats.a(j, i, be, al);
                    Q(i * m + al, j * m + be) = 0.5 * (x + y);
                    asym = std::max(asym, std::fabs(x - y));
                }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
    inv.min_eig_A_hat = eig.eigenvalues().minCoeff();
    inv.symmetry_A_hat = asym;
    return inv;
}

}  // namespace homog
