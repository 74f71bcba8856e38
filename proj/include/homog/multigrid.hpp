#pragma once

#include "homog/domain.hpp"
#include "homog/sparse.hpp"

#include <memory>
#include <vector>

namespace homog {

struct MultigridOptions {
    /// Stop coarsening once a level has at most this many unknowns.
    std::size_t coarse_size = 3000;
    int pre_smooth = 1;
    int post_smooth = 1;
};

/// Galerkin geometric multigrid V-cycle for P1 systems on nested structured meshes.
///
/// Coarse levels are obtained by merging 2x2 blocks of grid cells; the union-jack diagonal
/// rule makes the coarse triangulation nested in the fine one, so the P1 prolongation is exact
/// interpolation. Coarse operators are P^T A P on free unknowns with identity rows on
/// constrained ones. Smoothing is forward Gauss-Seidel before and backward after the
/// coarse correction, which keeps the cycle symmetric for symmetric A.
class MultigridPreconditioner {
public:
    MultigridPreconditioner(const TriMesh& mesh, int m, const SparseMatrix& A, const std::vector<std::uint8_t>& constrained,
                            const MultigridOptions& opts = {});
    ~MultigridPreconditioner();

    /// True when the mesh admits at least one coarsening step.
    static bool supported(const TriMesh& mesh);

    /// z = one V-cycle applied to r with zero initial guess.
    void apply(const Vec& r, Vec& z) const;
    int num_levels() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Diagonal scaling, the fallback for unstructured meshes.
class JacobiPreconditioner {
public:
    explicit JacobiPreconditioner(const SparseMatrix& A);
    void apply(const Vec& r, Vec& z) const;

private:
    Vec inv_diag_;
};

}  // namespace homog
