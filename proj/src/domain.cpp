#include "homog/domain.hpp"

#include "homog/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace homog {

namespace {

double cross(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

double dist_to_segment(Point p, Point a, Point b, Point* closest = nullptr) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point q{a.x + t * dx, a.y + t * dy};
    if (closest) *closest = q;
    return std::hypot(p.x - q.x, p.y - q.y);
}

bool segments_intersect(Point a, Point b, Point c, Point d) {
    const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    auto on = [](Point p, Point q, Point r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    if (d1 == 0 && on(c, d, a)) return true;
    if (d2 == 0 && on(c, d, b)) return true;
    if (d3 == 0 && on(a, b, c)) return true;
    if (d4 == 0 && on(a, b, d)) return true;
    return false;
}

bool barycentric(const Point& a, const Point& b, const Point& c, Point p, std::array<double, 3>& w, double tol) {
    const double det = cross(a, b, c);
    w[0] = cross(p, b, c) / det;
    w[1] = cross(a, p, c) / det;
    w[2] = 1.0 - w[0] - w[1];
    return w[0] >= -tol && w[1] >= -tol && w[2] >= -tol;
}

}  // namespace

PolygonDomain::PolygonDomain(std::string name, std::vector<Point> vertices) : name_(std::move(name)), vertices_(std::move(vertices)) {
    const std::size_t n = vertices_.size();
    if (n < 3) throw ValidationError("polygon needs at least three vertices");
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices_[i], b = vertices_[(i + 1) % n];
        if (a.x == b.x && a.y == b.y) throw ValidationError("polygon has a repeated vertex");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_intersect(vertices_[i], vertices_[(i + 1) % n], vertices_[j], vertices_[(j + 1) % n]))
                throw ValidationError("polygon is not simple");
        }
    double signed_area = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices_[i], b = vertices_[(i + 1) % n];
        signed_area += a.x * b.y - b.x * a.y;
    }
    if (signed_area == 0.0) throw ValidationError("polygon has zero area");
    if (signed_area < 0.0) std::reverse(vertices_.begin(), vertices_.end());
    compute_constants();
}

PolygonDomain PolygonDomain::from_name(const std::string& name) {
    if (name == "square" || name == "unit-square") return PolygonDomain("square", {{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    if (name == "L-shape" || name == "lshape")
        return PolygonDomain("L-shape", {{0, 0}, {1, 0}, {1, 1}, {0.5, 1}, {0.5, 0.5}, {0, 0.5}});
    throw ConfigError("unknown domain '" + name + "'");
}

std::vector<std::string> PolygonDomain::names() { return {"square", "L-shape"}; }

bool PolygonDomain::contains(Point p) const {
    const std::size_t n = vertices_.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = vertices_[i], b = vertices_[j];
        if (dist_to_segment(p, a, b) == 0.0) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

double PolygonDomain::distance(Point p) const {
    if (!contains(p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, dist_to_segment(p, vertices_[i], vertices_[(i + 1) % n]));
    return best;
}

Point PolygonDomain::distance_gradient(Point p) const {
    if (!contains(p)) return {0.0, 0.0};
    double best = std::numeric_limits<double>::infinity();
    Point q_best;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point q;
        const double d = dist_to_segment(p, vertices_[i], vertices_[(i + 1) % n], &q);
        if (d < best) {
            best = d;
            q_best = q;
        }
    }
    if (best == 0.0) return {0.0, 0.0};
    return {(p.x - q_best.x) / best, (p.y - q_best.y) / best};
}

double PolygonDomain::area() const {
    double s = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices_[i], b = vertices_[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * s;
}

double PolygonDomain::perimeter() const {
    double s = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = vertices_[i], b = vertices_[(i + 1) % n];
        s += std::hypot(b.x - a.x, b.y - a.y);
    }
    return s;
}

std::array<double, 4> PolygonDomain::bounding_box() const {
    std::array<double, 4> bb{vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
    for (const auto& v : vertices_) {
        bb[0] = std::min(bb[0], v.x);
        bb[1] = std::min(bb[1], v.y);
        bb[2] = std::max(bb[2], v.x);
        bb[3] = std::max(bb[3], v.y);
    }
    return bb;
}

void PolygonDomain::compute_constants() {
    r0_ = 0.0;
    for (const auto& a : vertices_)
        for (const auto& b : vertices_) r0_ = std::max(r0_, std::hypot(a.x - b.x, a.y - b.y));

    // Inradius: coarse sampling followed by compass search from the best samples.
    const auto bb = bounding_box();
    const int n = 128;
    const double sx = (bb[2] - bb[0]) / n, sy = (bb[3] - bb[1]) / n;
    std::vector<std::pair<double, Point>> samples;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const Point p{bb[0] + i * sx, bb[1] + j * sy};
            samples.emplace_back(distance(p), p);
        }
    std::partial_sort(samples.begin(), samples.begin() + 8, samples.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    r00_ = 0.0;
    for (int s = 0; s < 8; ++s) {
        Point p = samples[static_cast<std::size_t>(s)].second;
        double val = samples[static_cast<std::size_t>(s)].first;
        double step = std::max(sx, sy);
        while (step > 1e-14) {
            bool moved = false;
            for (const auto& dir : {Point{1, 0}, Point{-1, 0}, Point{0, 1}, Point{0, -1}, Point{0.7071067811865476, 0.7071067811865476},
                                    Point{-0.7071067811865476, 0.7071067811865476}, Point{0.7071067811865476, -0.7071067811865476},
                                    Point{-0.7071067811865476, -0.7071067811865476}}) {
                const Point q{p.x + step * dir.x, p.y + step * dir.y};
                const double v = distance(q);
                if (v > val) {
                    val = v;
                    p = q;
                    moved = true;
                }
            }
            if (!moved) step *= 0.5;
        }
        r00_ = std::max(r00_, val);
    }
}

double cutoff_profile(double delta, double r) {
    if (!(r > 0.0)) throw ValidationError("cutoff radius must be positive");
    return std::clamp((delta - r) / r, 0.0, 1.0);
}

double cutoff(const PolygonDomain& domain, double r, Point p) { return cutoff_profile(domain.distance(p), r); }

double TriMesh::area(std::size_t t) const {
    const auto& T = tris[t];
    return 0.5 * cross(nodes[static_cast<std::size_t>(T[0])], nodes[static_cast<std::size_t>(T[1])], nodes[static_cast<std::size_t>(T[2])]);
}

double TriMesh::diameter(std::size_t t) const {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
        const Point p = nodes[static_cast<std::size_t>(tris[t][static_cast<std::size_t>(a)])];
        const Point q = nodes[static_cast<std::size_t>(tris[t][static_cast<std::size_t>((a + 1) % 3)])];
        d = std::max(d, std::hypot(p.x - q.x, p.y - q.y));
    }
    return d;
}

double TriMesh::min_angle_degrees() const {
    double best = 180.0;
    for (const auto& T : tris)
        for (int a = 0; a < 3; ++a) {
            const Point p = nodes[static_cast<std::size_t>(T[static_cast<std::size_t>(a)])];
            const Point q = nodes[static_cast<std::size_t>(T[static_cast<std::size_t>((a + 1) % 3)])];
            const Point r = nodes[static_cast<std::size_t>(T[static_cast<std::size_t>((a + 2) % 3)])];
            const double ux = q.x - p.x, uy = q.y - p.y, vx = r.x - p.x, vy = r.y - p.y;
            const double ang = std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
            best = std::min(best, ang * 180.0 / M_PI);
        }
    return best;
}

double TriMesh::boundary_length() const {
    double s = 0.0;
    for (const auto& e : boundary) s += e.length;
    return s;
}

Point TriMesh::barycenter(std::size_t t) const {
    const auto& T = tris[t];
    const Point a = nodes[static_cast<std::size_t>(T[0])], b = nodes[static_cast<std::size_t>(T[1])], c = nodes[static_cast<std::size_t>(T[2])];
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

void TriMesh::build_boundary() {
    std::vector<std::array<int, 4>> edges;  // lo, hi, tri, local edge
    edges.reserve(tris.size() * 3);
    for (std::size_t t = 0; t < tris.size(); ++t)
        for (int a = 0; a < 3; ++a) {
            const int p = tris[t][static_cast<std::size_t>(a)], q = tris[t][static_cast<std::size_t>((a + 1) % 3)];
            edges.push_back({std::min(p, q), std::max(p, q), static_cast<int>(t), a});
        }
    std::sort(edges.begin(), edges.end());
    boundary.clear();
    on_boundary.assign(nodes.size(), 0);
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && edges[j][0] == edges[i][0] && edges[j][1] == edges[i][1]) ++j;
        if (j - i > 2) throw ValidationError("mesh is not conforming: edge shared by more than two triangles");
        if (j - i == 1) {
            const auto& T = tris[static_cast<std::size_t>(edges[i][2])];
            const int a = T[static_cast<std::size_t>(edges[i][3])], b = T[static_cast<std::size_t>((edges[i][3] + 1) % 3)];
            const Point pa = nodes[static_cast<std::size_t>(a)], pb = nodes[static_cast<std::size_t>(b)];
            const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
            boundary.push_back({a, b, edges[i][2], {(pb.y - pa.y) / len, -(pb.x - pa.x) / len}, len});
            on_boundary[static_cast<std::size_t>(a)] = on_boundary[static_cast<std::size_t>(b)] = 1;
        }
        i = j;
    }
}

void TriMesh::build_locator() {
    if (nodes.empty()) return;
    double xmin = nodes[0].x, xmax = xmin, ymin = nodes[0].y, ymax = ymin;
    for (const auto& p : nodes) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double span = std::max(xmax - xmin, ymax - ymin);
    const int nb = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(tris.size()) / 2.0)));
    bs_ = span / nb * (1.0 + 1e-12);
    bx0_ = xmin;
    by0_ = ymin;
    bnx_ = static_cast<int>((xmax - xmin) / bs_) + 1;
    bny_ = static_cast<int>((ymax - ymin) / bs_) + 1;
    buckets_.assign(static_cast<std::size_t>(bnx_ * bny_), {});
    for (std::size_t t = 0; t < tris.size(); ++t) {
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (int v : tris[t]) {
            x0 = std::min(x0, nodes[static_cast<std::size_t>(v)].x);
            x1 = std::max(x1, nodes[static_cast<std::size_t>(v)].x);
            y0 = std::min(y0, nodes[static_cast<std::size_t>(v)].y);
            y1 = std::max(y1, nodes[static_cast<std::size_t>(v)].y);
        }
        const int i0 = std::clamp(static_cast<int>((x0 - bx0_) / bs_), 0, bnx_ - 1), i1 = std::clamp(static_cast<int>((x1 - bx0_) / bs_), 0, bnx_ - 1);
        const int j0 = std::clamp(static_cast<int>((y0 - by0_) / bs_), 0, bny_ - 1), j1 = std::clamp(static_cast<int>((y1 - by0_) / bs_), 0, bny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(i + j * bnx_)].push_back(static_cast<int>(t));
    }
}

int TriMesh::locate_generic(Point p, std::array<double, 3>& bary) const {
    if (buckets_.empty()) throw Error("mesh locator not built");
    const int i = static_cast<int>(std::floor((p.x - bx0_) / bs_)), j = static_cast<int>(std::floor((p.y - by0_) / bs_));
    for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= bnx_ || jj >= bny_) continue;
            for (int t : buckets_[static_cast<std::size_t>(ii + jj * bnx_)]) {
                const auto& T = tris[static_cast<std::size_t>(t)];
                if (barycentric(nodes[static_cast<std::size_t>(T[0])], nodes[static_cast<std::size_t>(T[1])], nodes[static_cast<std::size_t>(T[2])], p,
                                bary, 1e-12))
                    return t;
            }
        }
    return -1;
}

int TriMesh::locate(Point p, std::array<double, 3>& bary) const {
    if (!structured) return locate_generic(p, bary);
    const auto& g = grid;
    const double sx = (p.x - g.x0) / g.h, sy = (p.y - g.y0) / g.h;
    const double tol = 1e-10;
    const int i_lo = static_cast<int>(std::floor(sx - tol)), i_hi = static_cast<int>(std::floor(sx + tol));
    const int j_lo = static_cast<int>(std::floor(sy - tol)), j_hi = static_cast<int>(std::floor(sy + tol));
    for (int j = j_lo; j <= j_hi; ++j)
        for (int i = i_lo; i <= i_hi; ++i) {
            if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) continue;
            const int t0 = g.first_tri_of_cell[static_cast<std::size_t>(i + j * g.nx)];
            if (t0 < 0) continue;
            for (int t = t0; t < t0 + 2; ++t) {
                const auto& T = tris[static_cast<std::size_t>(t)];
                if (barycentric(nodes[static_cast<std::size_t>(T[0])], nodes[static_cast<std::size_t>(T[1])], nodes[static_cast<std::size_t>(T[2])], p,
                                bary, 1e-10))
                    return t;
            }
        }
    return -1;
}

TriMesh triangulate(const PolygonDomain& domain, double h, const TriangulateOptions& opts) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("mesh size must be positive");
    const auto bb = domain.bounding_box();
    const double fx = (bb[2] - bb[0]) / h, fy = (bb[3] - bb[1]) / h;
    const double est = (fx + 1.0) * (fy + 1.0);
    if (!(est <= static_cast<double>(opts.node_cap)))
        throw ResourceError("mesh with h=" + std::to_string(h) + " needs about " + std::to_string(est) + " nodes, above the cap of " +
                            std::to_string(opts.node_cap));
    const int nx = static_cast<int>(std::llround(fx)), ny = static_cast<int>(std::llround(fy));
    if (std::abs(fx - nx) > 1e-9 * std::max(1.0, fx) || std::abs(fy - ny) > 1e-9 * std::max(1.0, fy) || nx < 1 || ny < 1)
        throw ValidationError("unsupported mesh size: the bounding box is not a whole number of cells");
    const auto& V = domain.vertices();
    for (std::size_t k = 0; k < V.size(); ++k) {
        const Point a = V[k], b = V[(k + 1) % V.size()];
        if (a.x != b.x && a.y != b.y) throw ValidationError("unsupported polygon: structured meshing needs axis-parallel edges");
        const double si = (a.x - bb[0]) / h, sj = (a.y - bb[1]) / h;
        if (std::abs(si - std::round(si)) > 1e-9 || std::abs(sj - std::round(sj)) > 1e-9)
            throw ValidationError("unsupported mesh size: polygon vertex off the grid");
    }

    TriMesh mesh;
    mesh.h = h;
    mesh.structured = true;
    auto& g = mesh.grid;
    g.x0 = bb[0];
    g.y0 = bb[1];
    g.h = h;
    g.nx = nx;
    g.ny = ny;
    const auto vx = static_cast<std::size_t>(nx + 1);
    std::vector<std::uint8_t> cell_in(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0);
    std::vector<std::uint8_t> vert_used(vx * static_cast<std::size_t>(ny + 1), 0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Point c{g.x0 + (i + 0.5) * h, g.y0 + (j + 0.5) * h};
            if (!domain.contains(c)) continue;
            cell_in[static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * static_cast<std::size_t>(nx)] = 1;
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) vert_used[static_cast<std::size_t>(i + di) + static_cast<std::size_t>(j + dj) * vx] = 1;
        }
    g.node_of_vertex.assign(vert_used.size(), -1);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const std::size_t v = static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * vx;
            if (!vert_used[v]) continue;
            g.node_of_vertex[v] = static_cast<int>(mesh.nodes.size());
            mesh.nodes.push_back({g.x0 + i * h, g.y0 + j * h});
        }
    g.first_tri_of_cell.assign(cell_in.size(), -1);
    auto node = [&](int i, int j) { return g.node_of_vertex[static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * vx]; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * static_cast<std::size_t>(nx);
            if (!cell_in[c]) continue;
            g.first_tri_of_cell[c] = static_cast<int>(mesh.tris.size());
            const int n00 = node(i, j), n10 = node(i + 1, j), n01 = node(i, j + 1), n11 = node(i + 1, j + 1);
            if (StructuredInfo::slash(i, j)) {
                mesh.tris.push_back({n00, n10, n11});
                mesh.tris.push_back({n00, n11, n01});
            } else {
                mesh.tris.push_back({n00, n10, n01});
                mesh.tris.push_back({n10, n11, n01});
            }
            for (std::uint8_t half = 0; half < 2; ++half) {
                g.tri_cell.push_back(static_cast<int>(c));
                g.tri_half.push_back(half);
            }
        }
    if (mesh.tris.empty()) throw ValidationError("mesh size too coarse for the polygon");
    mesh.build_boundary();
    return mesh;
}

std::vector<LayerTag> layer_mask(const TriMesh& mesh, const PolygonDomain& domain, double r) {
    if (!(r > 0.0)) throw ValidationError("layer radius must be positive");
    const double band = 1e-9 * mesh.h;
    std::vector<double> dn(mesh.num_nodes());
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = domain.distance(mesh.nodes[i]);
    std::vector<LayerTag> tags(mesh.num_tris());
    for (std::size_t t = 0; t < tags.size(); ++t) {
        double lo = 1e300, hi = -1e300;
        for (int v : mesh.tris[t]) {
            lo = std::min(lo, dn[static_cast<std::size_t>(v)]);
            hi = std::max(hi, dn[static_cast<std::size_t>(v)]);
        }
        if (lo < r - band && hi > r + band)
            tags[t] = LayerTag::Cut;
        else
            tags[t] = domain.distance(mesh.barycenter(t)) >= r ? LayerTag::Inside : LayerTag::BoundaryLayer;
    }
    return tags;
}

void write_mesh(const TriMesh& mesh, const std::string& nodes_path, const std::string& elements_path) {
    std::ofstream nf(nodes_path), ef(elements_path);
    if (!nf || !ef) throw Error("cannot open mesh output files");
    char buf[96];
    nf << "# id x y\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", i, mesh.nodes[i].x, mesh.nodes[i].y);
        nf << buf;
    }
    ef << "# id n0 n1 n2\n";
    for (std::size_t t = 0; t < mesh.tris.size(); ++t) ef << t << ' ' << mesh.tris[t][0] << ' ' << mesh.tris[t][1] << ' ' << mesh.tris[t][2] << '\n';
    if (!nf || !ef) throw Error("failed writing mesh tables");
}

TriMesh read_mesh(const std::string& nodes_path, const std::string& elements_path) {
    std::ifstream nf(nodes_path), ef(elements_path);
    if (!nf || !ef) throw Error("cannot open mesh tables");
    TriMesh mesh;
    std::string line;
    std::size_t expect = 0;
    while (std::getline(nf, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::size_t id;
        Point p;
        if (!(is >> id >> p.x >> p.y) || id != expect++) throw ValidationError("malformed node table line: " + line);
        mesh.nodes.push_back(p);
    }
    expect = 0;
    while (std::getline(ef, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::size_t id;
        std::array<int, 3> T;
        if (!(is >> id >> T[0] >> T[1] >> T[2]) || id != expect++) throw ValidationError("malformed element table line: " + line);
        for (int v : T)
            if (v < 0 || static_cast<std::size_t>(v) >= mesh.nodes.size()) throw ValidationError("element references a missing node");
        mesh.tris.push_back(T);
    }
    double hmax = 0.0;
    for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
        if (mesh.area(t) <= 0.0) throw ValidationError("element " + std::to_string(t) + " is degenerate or clockwise");
        hmax = std::max(hmax, mesh.diameter(t));
    }
    mesh.h = hmax;
    mesh.build_boundary();
    mesh.build_locator();
    return mesh;
}

}  // namespace homog
