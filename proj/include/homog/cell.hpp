#pragma once

#include "homog/coefficients.hpp"

#include <string>
#include <vector>

namespace homog {

/// An m x m family of periodic fields; entry (alpha, gamma) is stored at alpha*m + gamma.
using MatrixField = std::vector<PeriodicArray>;

/// Constant effective tensors, same index layout as CoefficientSet.
struct HomogenizedTensors {
    int dim = 2;
    int m = 1;
    double lambda = 0.0;
    std::vector<double> A, V, B, c;

    double a(int i, int j, int al, int be) const { return A[static_cast<std::size_t>(((i * dim + j) * m + al) * m + be)]; }
    double v(int i, int al, int be) const { return V[static_cast<std::size_t>((i * m + al) * m + be)]; }
    double b(int i, int al, int be) const { return B[static_cast<std::size_t>((i * m + al) * m + be)]; }
    double cc(int al, int be) const { return c[static_cast<std::size_t>(al * m + be)]; }
};

struct CellSolveOptions {
    double tol = 1e-10;
    int max_iter = 5000;
};

struct CellSolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    std::string method;
};

/// Corrector chi_k (k = 0 for the V-driven problem, k = 1..d for the unit directions).
/// Entry (beta, gamma) of the result is component beta of the solution driven by column gamma.
/// Throws SolverError on non-convergence and ValidationError on non-elliptic input.
MatrixField solve_cell_corrector(const CoefficientSet& coeffs, const CellGrid& grid, int k,
                                 const CellSolveOptions& opts = {}, CellSolveStats* stats = nullptr);

/// Solves all correctors k = 0..d.
std::vector<MatrixField> solve_all_correctors(const CoefficientSet& coeffs, const CellGrid& grid,
                                              const CellSolveOptions& opts = {});

/// Y-averages defining the effective operator. Throws ValidationError on a missing corrector.
HomogenizedTensors homogenize(const CoefficientSet& coeffs, const std::vector<MatrixField>& chi, const CellGrid& grid);

struct FluxFields {
    /// b[i*(d+1) + k], i = 0..d-1 (space direction), k = 0..d.
    std::vector<MatrixField> b;
    /// W[k], k = 0..d.
    std::vector<MatrixField> W;
};

FluxFields build_flux_fields(const CoefficientSet& coeffs, const std::vector<MatrixField>& chi,
                             const HomogenizedTensors& hats, const CellGrid& grid);

/// Mean-zero theta_k with Laplacian equal to W_k. Throws ValidationError if a W entry has
/// a mean larger than `mean_tol` times its scale.
std::vector<MatrixField> solve_theta(const std::vector<MatrixField>& W, const CellGrid& grid, double mean_tol = 1e-10);

struct FluxCorrector {
    /// Pi[i*(d+1) + k].
    std::vector<MatrixField> Pi;
    /// E[(j*d + i)*(d+1) + k].
    std::vector<MatrixField> E;
    /// Largest relative spectral divergence of b over all (k, alpha, gamma).
    double divergence_residual = 0.0;
    /// Set when the divergence of b exceeds the tolerance; the construction is still returned.
    bool divergence_warning = false;
};

FluxCorrector build_flux_corrector(const std::vector<MatrixField>& b, const CellGrid& grid, int dim, int m,
                                   double div_tol = 1e-8);

/// Coefficients of the adjoint operator: A*_ij^{ab} = a_ji^{ba}; the divergence-form slot
/// holds B transposed, the first-order slot holds V transposed, c* = c^T, same lambda.
CoefficientSet adjoint_coefficients(const CoefficientSet& coeffs);

/// The same role swap applied to constant tensors.
HomogenizedTensors adjoint_tensors(const HomogenizedTensors& t);

/// Identity tensors with lambda, used for tests and the identity preset.
HomogenizedTensors constant_tensors(const CoefficientSet& coeffs);

struct CellData {
    CellGrid grid;
    int dim = 2;
    int m = 1;
    double lambda = 0.0;
    std::string preset;

    std::vector<MatrixField> chi;       // k = 0..d
    std::vector<MatrixField> chi_star;  // adjoint correctors
    HomogenizedTensors hats;
    HomogenizedTensors hats_star;       // homogenization of the adjoint coefficients

    std::vector<MatrixField> b;         // [i*(d+1)+k]
    std::vector<MatrixField> W;         // [k]
    std::vector<MatrixField> theta;     // [k]
    std::vector<MatrixField> Pi;        // [i*(d+1)+k]
    std::vector<MatrixField> E;         // [(j*d+i)*(d+1)+k]

    // Derived spectral derivatives used by the two-scale module.
    std::vector<MatrixField> dchi;       // [k*d + j] = d/dy_j chi_k
    std::vector<MatrixField> dchi_star;  // same for the adjoint correctors
    std::vector<MatrixField> dtheta;     // [k*d + i] = d/dy_i theta_k

    bool divergence_warning = false;
    double divergence_residual = 0.0;
    std::vector<CellSolveStats> stats;
};

/// Runs every cell solve and construction for one coefficient set.
CellData build_cell_data(const CoefficientSet& coeffs, const CellGrid& grid, const CellSolveOptions& opts = {});

/// Recomputes the spectral derivative fields (after import).
void compute_derived_fields(CellData& cell);

struct CellInvariants {
    double max_mean_chi = 0.0;
    double max_mean_chi_star = 0.0;
    double max_mean_theta = 0.0;
    double max_mean_Pi = 0.0;
    double max_mean_b = 0.0;
    double max_mean_W = 0.0;
    double antisymmetry = 0.0;       // max |E_jik + E_ijk|
    double flux_residual = 0.0;      // max relative || d_j E_jik - b_ik ||
    double divergence_b = 0.0;       // max relative || d_i b_ik ||
    double theta_residual = 0.0;     // max relative || Lap theta_k - W_k ||
    double min_eig_A_hat = 0.0;      // smallest eigenvalue of the symmetric part of A_hat
    double symmetry_A_hat = 0.0;     // max |a_ij^{ab} - a_ji^{ba}|
};

/// Mean values are reported relative to max(1, max |field|).
CellInvariants check_invariants(const CellData& cell);

/// JSON bundle: grid resolution, row-major field arrays, tensors as nested arrays.
void save_cell_data(const CellData& cell, const std::string& path);
CellData load_cell_data(const std::string& path);
/// Effective tensors as nested JSON arrays (A[i][j][alpha][beta], V, B, c, lambda).
std::string tensors_json(const HomogenizedTensors& t);

}  // namespace homog
