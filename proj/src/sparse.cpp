#include "homog/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace homog {

SparseMatrix p1_pattern(const TriMesh& mesh, int m) {
    const std::size_t nn = mesh.num_nodes();
    // Node adjacency via counting sort of (node, neighbour) pairs.
    std::vector<int> count(nn + 1, 0);
    for (const auto& T : mesh.tris)
        for (int a : T) count[static_cast<std::size_t>(a) + 1] += 3;
    for (std::size_t i = 0; i < nn; ++i) count[i + 1] += count[i];
    std::vector<int> nb(static_cast<std::size_t>(count[nn]));
    std::vector<int> fill(count.begin(), count.end() - 1);
    for (const auto& T : mesh.tris)
        for (int a : T)
            for (int b : T) nb[static_cast<std::size_t>(fill[static_cast<std::size_t>(a)]++)] = b;
    std::vector<int> row_start(nn + 1, 0);
    std::vector<int> uniq;
    uniq.reserve(nb.size());
    for (std::size_t i = 0; i < nn; ++i) {
        auto first = nb.begin() + count[i], last = nb.begin() + count[i + 1];
        std::sort(first, last);
        auto end = std::unique(first, last);
        row_start[i] = static_cast<int>(uniq.size());
        uniq.insert(uniq.end(), first, end);
    }
    row_start[nn] = static_cast<int>(uniq.size());

    const auto n = static_cast<Eigen::Index>(nn) * m;
    SparseMatrix A(n, n);
    const std::size_t nnz = uniq.size() * static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
    A.resizeNonZeros(static_cast<Eigen::Index>(nnz));
    int* outer = A.outerIndexPtr();
    int* inner = A.innerIndexPtr();
    double* val = A.valuePtr();
    std::size_t k = 0;
    for (std::size_t i = 0; i < nn; ++i)
        for (int al = 0; al < m; ++al) {
            outer[i * static_cast<std::size_t>(m) + static_cast<std::size_t>(al)] = static_cast<int>(k);
            for (int p = row_start[i]; p < row_start[i + 1]; ++p)
                for (int be = 0; be < m; ++be) {
                    inner[k] = uniq[static_cast<std::size_t>(p)] * m + be;
                    val[k] = 0.0;
                    ++k;
                }
        }
    outer[n] = static_cast<int>(k);
    return A;
}

void multiply(const SparseMatrix& A, const Vec& x, Vec& y) {
    const auto n = static_cast<std::size_t>(A.rows());
    y.resize(n);
    const int* outer = A.outerIndexPtr();
    const int* inner = A.innerIndexPtr();
    const double* val = A.valuePtr();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = outer[i]; k < outer[i + 1]; ++k) s += val[k] * x[static_cast<std::size_t>(inner[k])];
        y[i] = s;
    }
}

void multiply_transpose(const SparseMatrix& A, const Vec& x, Vec& y) {
    y.assign(static_cast<std::size_t>(A.cols()), 0.0);
    const int* outer = A.outerIndexPtr();
    const int* inner = A.innerIndexPtr();
    const double* val = A.valuePtr();
    for (std::size_t i = 0; i < static_cast<std::size_t>(A.rows()); ++i)
        for (int k = outer[i]; k < outer[i + 1]; ++k) y[static_cast<std::size_t>(inner[k])] += val[k] * x[i];
}

void eliminate_dirichlet(SparseMatrix& A, Vec& rhs, const std::vector<std::uint8_t>& constrained, const Vec& values) {
    const auto n = static_cast<std::size_t>(A.rows());
    const int* outer = A.outerIndexPtr();
    const int* inner = A.innerIndexPtr();
    double* val = A.valuePtr();
    for (std::size_t i = 0; i < n; ++i) {
        if (constrained[i]) {
            for (int k = outer[i]; k < outer[i + 1]; ++k) val[k] = static_cast<std::size_t>(inner[k]) == i ? 1.0 : 0.0;
            rhs[i] = values[i];
            continue;
        }
        for (int k = outer[i]; k < outer[i + 1]; ++k) {
            const auto j = static_cast<std::size_t>(inner[k]);
            if (constrained[j]) {
                rhs[i] -= val[k] * values[j];
                val[k] = 0.0;
            }
        }
    }
}

double asymmetry(const SparseMatrix& A) {
    SparseMatrix At = A.transpose();
    SparseMatrix D = A - At;
    double dmax = 0.0, amax = 0.0;
    for (Eigen::Index k = 0; k < D.nonZeros(); ++k) dmax = std::max(dmax, std::abs(D.valuePtr()[k]));
    for (Eigen::Index k = 0; k < A.nonZeros(); ++k) amax = std::max(amax, std::abs(A.valuePtr()[k]));
    return amax > 0.0 ? dmax / amax : 0.0;
}

void write_matrix_market(const SparseMatrix& A, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "'");
    os << "%%MatrixMarket matrix coordinate real general\n" << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    char buf[96];
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (SparseMatrix::InnerIterator it(A, i); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(i + 1), static_cast<long>(it.col() + 1), it.value());
            os << buf;
        }
}

}  // namespace homog
