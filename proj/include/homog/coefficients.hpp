#pragma once

#include "homog/expr.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace homog {

/// Uniform periodic sampling of the unit cell: points k/N per axis, N a power of two.
struct CellGrid {
    int dim = 2;
    int N = 128;

    /// Throws ValidationError unless N >= 8 is a power of two and dim is 2 or 3.
    void check() const;
    std::size_t size() const;
    /// Row-major flat index, last axis fastest.
    std::size_t index(int k1, int k2, int k3 = 0) const;
};

using PeriodicArray = std::vector<double>;

/// Periodic coefficient tensors of L = -div(A grad + V) + B grad + c + lambda.
///
/// Storage layout (d = dim, m = system size):
///   A[((i*d + j)*m + a)*m + b] = a_ij^{ab}
///   V[(i*m + a)*m + b]         = V_i^{ab}
///   B[(i*m + a)*m + b]         = B_i^{ab}
///   c[a*m + b]                 = c^{ab}
struct CoefficientSet {
    std::string name = "custom";
    int dim = 2;
    int m = 1;
    double lambda = 0.0;
    /// Ellipticity constant, filled in by validate().
    double mu = 0.0;
    /// Boundedness constant; if kappa_bound > 0 it is also enforced by validate().
    double kappa = 0.0;
    double kappa_bound = 0.0;
    bool symmetric_A = false;

    std::vector<ScalarFieldExpr> A, V, B, c;

    std::size_t a_index(int i, int j, int a, int b) const { return static_cast<std::size_t>(((i * dim + j) * m + a) * m + b); }
    std::size_t v_index(int i, int a, int b) const { return static_cast<std::size_t>((i * m + a) * m + b); }
    std::size_t c_index(int a, int b) const { return static_cast<std::size_t>(a * m + b); }

    /// Allocates all tensors as constant zero fields with the proper variable list.
    static CoefficientSet zeros(int dim, int m);

    bool has_V() const;
    bool has_B() const;
    bool has_c() const;
};

/// Coefficient values at one point, same layout as CoefficientSet.
struct CoeffValues {
    int dim = 2;
    int m = 1;
    std::vector<double> A, V, B, c;

    CoeffValues() = default;
    CoeffValues(int dim_, int m_);
    double a(int i, int j, int al, int be) const { return A[static_cast<std::size_t>(((i * dim + j) * m + al) * m + be)]; }
};

/// Evaluates every tensor entry at frac(y) (1-periodic by construction).
void evaluate(const CoefficientSet& coeffs, const double* y, CoeffValues& out);

/// Samples an expression on the grid; throws ValidationError at the first non-finite value.
PeriodicArray sample_field(const ScalarFieldExpr& expr, const CellGrid& grid);

struct ValidationReport {
    double mu_observed = 0.0;
    double max_eigenvalue = 0.0;
    double kappa_observed = 0.0;
    bool symmetric_A_observed = false;
    /// Per-field maxima ("V", "B", "c") and ellipticity extremes.
    std::map<std::string, double> detail;
};

struct ValidateOptions {
    /// Also sample at the midpoints of a 2N grid.
    bool include_midpoints = false;
    double symmetry_tol = 1e-14;
};

/// Checks ellipticity and boundedness on the grid. Throws ValidationError when the
/// quadratic form of A is not positive definite somewhere, when kappa_bound is exceeded,
/// or when symmetric_A is declared but violated.
ValidationReport validate(const CoefficientSet& coeffs, const CellGrid& grid, const ValidateOptions& opts = {});

/// Named presets: "identity", "laminate", "smooth-trig", "random-trig" (seeded), and
/// "laminate-b" (laminate with a first-order term, used to exercise theta).
CoefficientSet preset(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> preset_names();

/// Multiplies every A entry by t (keeps expressions exact by wrapping them).
CoefficientSet scale_A(const CoefficientSet& coeffs, double t);

}  // namespace homog
