#include "homog/multigrid.hpp"

#include "homog/error.hpp"

#include <Eigen/SparseLU>

namespace homog {

namespace {

struct GridLevel {
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> cell_in;
    std::vector<int> node_of_vertex;
    std::size_t num_nodes = 0;
};

GridLevel finest_level(const TriMesh& mesh) {
    const auto& g = mesh.grid;
    GridLevel L;
    L.nx = g.nx;
    L.ny = g.ny;
    L.cell_in.resize(g.first_tri_of_cell.size());
    for (std::size_t c = 0; c < L.cell_in.size(); ++c) L.cell_in[c] = g.first_tri_of_cell[c] >= 0;
    L.node_of_vertex = g.node_of_vertex;
    L.num_nodes = mesh.num_nodes();
    return L;
}

bool can_coarsen(const GridLevel& f) {
    if (f.nx % 2 != 0 || f.ny % 2 != 0 || f.nx < 2 || f.ny < 2) return false;
    for (int J = 0; J < f.ny / 2; ++J)
        for (int I = 0; I < f.nx / 2; ++I) {
            int in = 0;
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a) in += f.cell_in[static_cast<std::size_t>((2 * I + a) + (2 * J + b) * f.nx)];
            if (in != 0 && in != 4) return false;
        }
    return true;
}

GridLevel coarsen(const GridLevel& f) {
    GridLevel c;
    c.nx = f.nx / 2;
    c.ny = f.ny / 2;
    c.cell_in.assign(static_cast<std::size_t>(c.nx * c.ny), 0);
    for (int J = 0; J < c.ny; ++J)
        for (int I = 0; I < c.nx; ++I) c.cell_in[static_cast<std::size_t>(I + J * c.nx)] = f.cell_in[static_cast<std::size_t>(2 * I + 2 * J * f.nx)];
    c.node_of_vertex.assign(static_cast<std::size_t>((c.nx + 1) * (c.ny + 1)), -1);
    for (int J = 0; J <= c.ny; ++J)
        for (int I = 0; I <= c.nx; ++I)
            if (f.node_of_vertex[static_cast<std::size_t>(2 * I + 2 * J * (f.nx + 1))] >= 0)
                c.node_of_vertex[static_cast<std::size_t>(I + J * (c.nx + 1))] = static_cast<int>(c.num_nodes++);
    return c;
}

// Coarse diagonal of cell (I, J) at the coarse level, as two coarse vertex pairs.
bool coarse_slash(int I, int J) { return StructuredInfo::slash(I, J); }

SparseMatrix prolongation(const GridLevel& f, const GridLevel& c, int m, const std::vector<std::uint8_t>& fine_constrained,
                          const std::vector<std::uint8_t>& coarse_constrained) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(f.num_nodes * static_cast<std::size_t>(m) * 2);
    auto cnode = [&](int I, int J) { return c.node_of_vertex[static_cast<std::size_t>(I + J * (c.nx + 1))]; };
    for (int j = 0; j <= f.ny; ++j)
        for (int i = 0; i <= f.nx; ++i) {
            const int fn = f.node_of_vertex[static_cast<std::size_t>(i + j * (f.nx + 1))];
            if (fn < 0) continue;
            int src[2] = {-1, -1};
            double w = 1.0;
            if (i % 2 == 0 && j % 2 == 0) {
                src[0] = cnode(i / 2, j / 2);
            } else if (j % 2 == 0) {
                src[0] = cnode((i - 1) / 2, j / 2);
                src[1] = cnode((i + 1) / 2, j / 2);
                w = 0.5;
            } else if (i % 2 == 0) {
                src[0] = cnode(i / 2, (j - 1) / 2);
                src[1] = cnode(i / 2, (j + 1) / 2);
                w = 0.5;
            } else {
                const int I = (i - 1) / 2, J = (j - 1) / 2;
                if (coarse_slash(I, J)) {
                    src[0] = cnode(I, J);
                    src[1] = cnode(I + 1, J + 1);
                } else {
                    src[0] = cnode(I + 1, J);
                    src[1] = cnode(I, J + 1);
                }
                w = 0.5;
            }
            for (int s : src) {
                if (s < 0) continue;
                for (int al = 0; al < m; ++al) {
                    const int fr = fn * m + al, cc = s * m + al;
                    if (fine_constrained[static_cast<std::size_t>(fr)] || coarse_constrained[static_cast<std::size_t>(cc)]) continue;
                    trip.emplace_back(fr, cc, w);
                }
            }
        }
    SparseMatrix P(static_cast<Eigen::Index>(f.num_nodes) * m, static_cast<Eigen::Index>(c.num_nodes) * m);
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

}  // namespace

struct MultigridPreconditioner::Impl {
    struct Level {
        SparseMatrix A;         // coarse levels own their operator
        const SparseMatrix* op = nullptr;
        SparseMatrix P;   // to the next coarser level
        SparseMatrix Pt;  // restriction
        std::vector<int> diag;
        mutable Vec x, b, r;
    };
    std::vector<Level> levels;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    MultigridOptions opts;

    static std::vector<int> diag_positions(const SparseMatrix& A) {
        std::vector<int> d(static_cast<std::size_t>(A.rows()), -1);
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (int k = A.outerIndexPtr()[i]; k < A.outerIndexPtr()[i + 1]; ++k)
                if (A.innerIndexPtr()[k] == i) d[static_cast<std::size_t>(i)] = k;
        for (int k : d)
            if (k < 0) throw SolverError("multigrid: missing diagonal entry");
        return d;
    }

    void gauss_seidel(const Level& L, bool forward) const {
        const int* outer = L.op->outerIndexPtr();
        const int* inner = L.op->innerIndexPtr();
        const double* val = L.op->valuePtr();
        const auto n = static_cast<long>(L.op->rows());
        auto sweep_row = [&](long i) {
            double s = L.b[static_cast<std::size_t>(i)];
            for (int k = outer[i]; k < outer[i + 1]; ++k) s -= val[k] * L.x[static_cast<std::size_t>(inner[k])];
            L.x[static_cast<std::size_t>(i)] += s / val[L.diag[static_cast<std::size_t>(i)]];
        };
        if (forward)
            for (long i = 0; i < n; ++i) sweep_row(i);
        else
            for (long i = n - 1; i >= 0; --i) sweep_row(i);
    }

    void cycle(std::size_t l) const {
        const Level& L = levels[l];
        if (l + 1 == levels.size()) {
            Eigen::Map<const Eigen::VectorXd> bb(L.b.data(), static_cast<Eigen::Index>(L.b.size()));
            Eigen::VectorXd sol = lu.solve(bb);
            L.x.assign(sol.data(), sol.data() + sol.size());
            return;
        }
        std::fill(L.x.begin(), L.x.end(), 0.0);
        for (int s = 0; s < opts.pre_smooth; ++s) gauss_seidel(L, true);
        multiply(*L.op, L.x, L.r);
        for (std::size_t i = 0; i < L.r.size(); ++i) L.r[i] = L.b[i] - L.r[i];
        const Level& C = levels[l + 1];
        multiply(L.Pt, L.r, C.b);
        cycle(l + 1);
        multiply(L.P, C.x, L.r);
        for (std::size_t i = 0; i < L.r.size(); ++i) L.x[i] += L.r[i];
        for (int s = 0; s < opts.post_smooth; ++s) gauss_seidel(L, false);
    }
};

bool MultigridPreconditioner::supported(const TriMesh& mesh) { return mesh.structured && can_coarsen(finest_level(mesh)); }

MultigridPreconditioner::MultigridPreconditioner(const TriMesh& mesh, int m, const SparseMatrix& A,
                                                 const std::vector<std::uint8_t>& constrained, const MultigridOptions& opts)
    : impl_(std::make_unique<Impl>()) {
    if (!supported(mesh)) throw SolverError("multigrid needs a structured mesh that can be coarsened");
    impl_->opts = opts;
    GridLevel grid = finest_level(mesh);
    std::vector<std::uint8_t> cons = constrained;
    Impl::Level fine;
    fine.op = &A;
    impl_->levels.push_back(std::move(fine));
    while (static_cast<std::size_t>(impl_->levels.back().op->rows()) > opts.coarse_size && can_coarsen(grid)) {
        GridLevel cg = coarsen(grid);
        // A coarse dof is constrained when its fine counterpart is.
        std::vector<std::uint8_t> ccons(cg.num_nodes * static_cast<std::size_t>(m), 0);
        for (int J = 0; J <= cg.ny; ++J)
            for (int I = 0; I <= cg.nx; ++I) {
                const int cn = cg.node_of_vertex[static_cast<std::size_t>(I + J * (cg.nx + 1))];
                if (cn < 0) continue;
                const int fn = grid.node_of_vertex[static_cast<std::size_t>(2 * I + 2 * J * (grid.nx + 1))];
                for (int al = 0; al < m; ++al) ccons[static_cast<std::size_t>(cn * m + al)] = cons[static_cast<std::size_t>(fn * m + al)];
            }
        auto& L = impl_->levels.back();
        L.P = prolongation(grid, cg, m, cons, ccons);
        L.Pt = L.P.transpose();
        Impl::Level C;
        {
            SparseMatrix AP = (*L.op) * L.P;
            C.A = L.Pt * AP;
        }
        C.A.makeCompressed();
        // Identity rows for constrained coarse dofs (their rows and columns are empty).
        std::vector<Eigen::Triplet<double>> id;
        for (std::size_t i = 0; i < ccons.size(); ++i)
            if (ccons[i]) id.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        if (!id.empty()) {
            SparseMatrix I(C.A.rows(), C.A.cols());
            I.setFromTriplets(id.begin(), id.end());
            C.A = C.A + I;
        }
        C.A.prune(0.0);
        impl_->levels.push_back(std::move(C));
        impl_->levels.back().op = &impl_->levels.back().A;
        grid = std::move(cg);
        cons = std::move(ccons);
    }
    for (std::size_t l = 1; l < impl_->levels.size(); ++l) impl_->levels[l].op = &impl_->levels[l].A;
    for (auto& L : impl_->levels) {
        const auto n = static_cast<std::size_t>(L.op->rows());
        L.x.assign(n, 0.0);
        L.b.assign(n, 0.0);
        L.r.assign(n, 0.0);
        if (&L != &impl_->levels.back()) L.diag = Impl::diag_positions(*L.op);
    }
    Eigen::SparseMatrix<double> coarse = *impl_->levels.back().op;
    impl_->lu.compute(coarse);
    if (impl_->lu.info() != Eigen::Success) throw SolverError("multigrid: coarse factorization failed");
}

MultigridPreconditioner::~MultigridPreconditioner() = default;

int MultigridPreconditioner::num_levels() const { return static_cast<int>(impl_->levels.size()); }

void MultigridPreconditioner::apply(const Vec& r, Vec& z) const {
    auto& top = impl_->levels.front();
    top.b = r;
    impl_->cycle(0);
    z = top.x;
}

JacobiPreconditioner::JacobiPreconditioner(const SparseMatrix& A) : inv_diag_(static_cast<std::size_t>(A.rows()), 1.0) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const double d = A.coeff(i, i);
        if (d != 0.0) inv_diag_[static_cast<std::size_t>(i)] = 1.0 / d;
    }
}

void JacobiPreconditioner::apply(const Vec& r, Vec& z) const {
    z.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag_[i] * r[i];
}

}  // namespace homog
