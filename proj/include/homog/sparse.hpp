#pragma once

#include "homog/domain.hpp"
#include "homog/krylov.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace homog {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Row-compressed pattern of the P1 block operator: dof = node*m + component, every
/// component pair coupled for every pair of nodes sharing a triangle. Values start at zero.
SparseMatrix p1_pattern(const TriMesh& mesh, int m);

/// Adds v to entry (row, col), which must already be in the pattern.
inline void scatter_add(SparseMatrix& A, int row, int col, double v) {
    const int* outer = A.outerIndexPtr();
    const int* inner = A.innerIndexPtr();
    double* val = A.valuePtr();
    for (int k = outer[row]; k < outer[row + 1]; ++k)
        if (inner[k] == col) {
            val[k] += v;
            return;
        }
    throw Error("sparse scatter outside the pattern");
}

/// y = A x.
void multiply(const SparseMatrix& A, const Vec& x, Vec& y);
/// y = A^T x.
void multiply_transpose(const SparseMatrix& A, const Vec& x, Vec& y);

/// Symmetric elimination of constrained dofs: rows and columns of constrained dofs are
/// zeroed, the diagonal set to one, rhs[c] = value[c] and free rows corrected by -A(i,c) value[c].
void eliminate_dirichlet(SparseMatrix& A, Vec& rhs, const std::vector<std::uint8_t>& constrained, const Vec& values);

/// Max |A - A^T| over stored entries, relative to max |A|.
double asymmetry(const SparseMatrix& A);

/// Triplet text export "row col value" with a size header (1-based, matrix-market coordinate style).
void write_matrix_market(const SparseMatrix& A, const std::string& path);

}  // namespace homog
