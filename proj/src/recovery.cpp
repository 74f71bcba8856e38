#include "homog/recovery.hpp"

#include "homog/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace homog {

namespace {

// Triangles around each node in CSR form.
struct NodeTris {
    std::vector<int> start;
    std::vector<int> tris;
};

NodeTris node_tris(const TriMesh& mesh) {
    NodeTris nt;
    nt.start.assign(mesh.num_nodes() + 1, 0);
    for (const auto& T : mesh.tris)
        for (int v : T) ++nt.start[static_cast<std::size_t>(v) + 1];
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) nt.start[i + 1] += nt.start[i];
    nt.tris.resize(static_cast<std::size_t>(nt.start.back()));
    std::vector<int> fill(nt.start.begin(), nt.start.end() - 1);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t)
        for (int v : mesh.tris[t]) nt.tris[static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = static_cast<int>(t);
    return nt;
}

}  // namespace

FemFunction recovered_gradient(const FemFunction& u, int comp) {
    const TriMesh& mesh = *u.mesh;
    FemFunction g = FemFunction::zeros(mesh, 2);
    std::vector<double> wsum(mesh.num_nodes(), 0.0);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
        const Point gr = u.gradient(t, comp);
        const double a = mesh.area(t);
        for (int v : mesh.tris[t]) {
            const auto n = static_cast<std::size_t>(v);
            g.values[2 * n] += a * gr.x;
            g.values[2 * n + 1] += a * gr.y;
            wsum[n] += a;
        }
    }
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        g.values[2 * n] /= wsum[n];
        g.values[2 * n + 1] /= wsum[n];
    }
    return g;
}

HessianField recover_hessian(const FemFunction& u, int comp, const std::vector<std::uint8_t>* wanted) {
    const TriMesh& mesh = *u.mesh;
    const NodeTris nt = node_tris(mesh);
    HessianField out;
    out.H.assign(mesh.num_nodes(), {0.0, 0.0, 0.0});
    out.valid.assign(mesh.num_nodes(), 0);
    std::vector<int> mark(mesh.num_nodes(), -1);
    std::vector<int> ring1, patch;
    const double h = mesh.h > 0.0 ? mesh.h : 1.0;
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        if (wanted && !(*wanted)[n]) continue;
        const int tag = static_cast<int>(n);
        ring1.clear();
        patch.clear();
        mark[n] = tag;
        patch.push_back(tag);
        for (int k = nt.start[n]; k < nt.start[n + 1]; ++k)
            for (int v : mesh.tris[static_cast<std::size_t>(nt.tris[static_cast<std::size_t>(k)])])
                if (mark[static_cast<std::size_t>(v)] != tag) {
                    mark[static_cast<std::size_t>(v)] = tag;
                    ring1.push_back(v);
                    patch.push_back(v);
                }
        for (int r : ring1)
            for (int k = nt.start[static_cast<std::size_t>(r)]; k < nt.start[static_cast<std::size_t>(r) + 1]; ++k)
                for (int v : mesh.tris[static_cast<std::size_t>(nt.tris[static_cast<std::size_t>(k)])])
                    if (mark[static_cast<std::size_t>(v)] != tag) {
                        mark[static_cast<std::size_t>(v)] = tag;
                        patch.push_back(v);
                    }
        if (patch.size() < 6) {
            ++out.skipped;
            continue;
        }
        const Point c = mesh.nodes[n];
        Eigen::MatrixXd M(static_cast<Eigen::Index>(patch.size()), 6);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(patch.size()));
        for (std::size_t k = 0; k < patch.size(); ++k) {
            const Point p = mesh.nodes[static_cast<std::size_t>(patch[k])];
            const double dx = (p.x - c.x) / h, dy = (p.y - c.y) / h;
            const auto r = static_cast<Eigen::Index>(k);
            M(r, 0) = 1.0;
            M(r, 1) = dx;
            M(r, 2) = dy;
            M(r, 3) = dx * dx;
            M(r, 4) = dx * dy;
            M(r, 5) = dy * dy;
            rhs(r) = u.at(static_cast<std::size_t>(patch[k]), comp);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
        qr.setThreshold(1e-10);
        if (qr.rank() < 6) {
            ++out.skipped;
            continue;
        }
        const Eigen::VectorXd coef = qr.solve(rhs);
        out.H[n] = {2.0 * coef(3) / (h * h), coef(4) / (h * h), 2.0 * coef(5) / (h * h)};
        out.valid[n] = 1;
    }
    return out;
}

SeminormResult second_derivative_seminorm(const FemFunction& u, const PolygonDomain& domain, double r, bool weighted, int comp) {
    const TriMesh& mesh = *u.mesh;
    if (r < 2.0 * mesh.h * (1.0 - 1e-12)) throw ValidationError("second-derivative region must satisfy r >= 2h");
    // Only nodes of elements that can meet Sigma_r need a Hessian.
    std::vector<std::uint8_t> wanted(mesh.num_nodes(), 0);
    const double reach = mesh.h * 1.5;
    for (std::size_t t = 0; t < mesh.num_tris(); ++t)
        if (domain.distance(mesh.barycenter(t)) >= r - reach)
            for (int v : mesh.tris[t]) wanted[static_cast<std::size_t>(v)] = 1;
    const HessianField H = recover_hessian(u, comp, &wanted);
    SeminormResult res;
    res.skipped_nodes = H.skipped;
    std::vector<std::uint8_t> elem_ok(mesh.num_tris(), 1);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t)
        for (int v : mesh.tris[t])
            if (wanted[static_cast<std::size_t>(v)] && !H.valid[static_cast<std::size_t>(v)]) elem_ok[t] = 0;
    RegionSpec spec{Region::Inside, r, weighted ? 1 : 0};
    auto f = [&](std::size_t t, const std::array<double, 3>& l, Point) {
        if (!elem_ok[t]) return 0.0;
        double h11 = 0, h12 = 0, h22 = 0;
        for (int a = 0; a < 3; ++a) {
            const auto& h = H.H[static_cast<std::size_t>(mesh.tris[t][static_cast<std::size_t>(a)])];
            h11 += l[static_cast<std::size_t>(a)] * h[0];
            h12 += l[static_cast<std::size_t>(a)] * h[1];
            h22 += l[static_cast<std::size_t>(a)] * h[2];
        }
        return h11 * h11 + 2.0 * h12 * h12 + h22 * h22;
    };
    const auto tags = layer_mask(mesh, domain, r);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t)
        if (!elem_ok[t] && tags[t] != LayerTag::BoundaryLayer) ++res.skipped_elements;
    res.value = std::sqrt(std::max(0.0, integrate(mesh, domain, spec, f, 4)));
    return res;
}

}  // namespace homog
