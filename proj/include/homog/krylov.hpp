#pragma once

#include "homog/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace homog {

using Vec = std::vector<double>;

struct KrylovResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

namespace detail {
inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }
}  // namespace detail

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
/// `apply(x, y)` computes y = A x; `precond(r, z)` computes z = M^{-1} r.
/// Throws SolverError when a non-positive curvature p^T A p is met.
template <class Apply, class Precond>
KrylovResult conjugate_gradient(Apply&& apply, Precond&& precond, const Vec& b, Vec& x, double tol, int max_iter) {
    const std::size_t n = b.size();
    if (x.size() != n) x.assign(n, 0.0);
    KrylovResult res;
    const double bnorm = detail::norm2(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    Vec r(n), z(n), p(n), Ap(n);
    apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    double rnorm = detail::norm2(r);
    if (rnorm <= tol * bnorm) {
        res.converged = true;
        res.relative_residual = rnorm / bnorm;
        return res;
    }
    precond(r, z);
    p = z;
    double rz = detail::dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, Ap);
        const double pAp = detail::dot(p, Ap);
        if (!(pAp > 0.0)) throw SolverError("conjugate gradients: indefinite operator detected (p^T A p <= 0)");
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        rnorm = detail::norm2(r);
        res.iterations = it;
        res.relative_residual = rnorm / bnorm;
        if (rnorm <= tol * bnorm) {
            res.converged = true;
            return res;
        }
        precond(r, z);
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

/// Right-preconditioned BiCGStab for general (non-symmetric) operators.
template <class Apply, class Precond>
KrylovResult bicgstab(Apply&& apply, Precond&& precond, const Vec& b, Vec& x, double tol, int max_iter) {
    const std::size_t n = b.size();
    if (x.size() != n) x.assign(n, 0.0);
    KrylovResult res;
    const double bnorm = detail::norm2(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    Vec r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);
    apply(x, t);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - t[i];
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    double rnorm = detail::norm2(r);
    res.relative_residual = rnorm / bnorm;
    if (rnorm <= tol * bnorm) {
        res.converged = true;
        return res;
    }
    for (int it = 1; it <= max_iter; ++it) {
        const double rho_new = detail::dot(r0, r);
        if (rho_new == 0.0) {
            // Breakdown: restart with the current residual as shadow vector.
            r0 = r;
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        precond(p, phat);
        apply(phat, v);
        const double r0v = detail::dot(r0, v);
        if (r0v == 0.0) throw SolverError("BiCGStab breakdown (r0^T v = 0)");
        alpha = rho / r0v;
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        const double snorm = detail::norm2(s);
        if (snorm <= tol * bnorm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
            res.iterations = it;
            res.relative_residual = snorm / bnorm;
            res.converged = true;
            return res;
        }
        precond(s, shat);
        apply(shat, t);
        const double tt = detail::dot(t, t);
        omega = tt > 0.0 ? detail::dot(t, s) / tt : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = detail::norm2(r);
        res.iterations = it;
        res.relative_residual = rnorm / bnorm;
        if (rnorm <= tol * bnorm) {
            // Guard against drift of the recursively updated residual.
            apply(x, t);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - t[i];
            rnorm = detail::norm2(r);
            res.relative_residual = rnorm / bnorm;
            if (rnorm <= tol * bnorm) {
                res.converged = true;
                return res;
            }
        }
        if (omega == 0.0) throw SolverError("BiCGStab stagnation (omega = 0)");
    }
    return res;
}

}  // namespace homog
