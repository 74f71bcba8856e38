#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace homog {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Closed simple polygon, stored counterclockwise.
class PolygonDomain {
public:
    PolygonDomain() = default;
    /// Reorients clockwise input; throws ValidationError for fewer than three vertices,
    /// repeated vertices or self-intersections.
    PolygonDomain(std::string name, std::vector<Point> vertices);

    /// "square" (alias "unit-square") or "L-shape".
    static PolygonDomain from_name(const std::string& name);
    static std::vector<std::string> names();

    const std::string& name() const { return name_; }
    const std::vector<Point>& vertices() const { return vertices_; }

    /// Closed domain membership (boundary points count as inside).
    bool contains(Point p) const;
    /// Distance to the boundary for points of the domain, 0 elsewhere.
    double distance(Point p) const;
    /// Unit vector along which the distance grows fastest (undefined on the medial axis,
    /// where one of the competing directions is returned). Zero outside.
    Point distance_gradient(Point p) const;

    double area() const;
    double perimeter() const;
    /// Largest pairwise vertex distance.
    double r0() const { return r0_; }
    /// Inradius, the largest value of the distance function.
    double r00() const { return r00_; }
    /// Layer constant r00 / 10.
    double c0() const { return r00_ / 10.0; }
    std::array<double, 4> bounding_box() const;  // xmin, ymin, xmax, ymax

private:
    void compute_constants();
    std::string name_;
    std::vector<Point> vertices_;
    double r0_ = 0.0;
    double r00_ = 0.0;
};

/// Piecewise-linear cutoff clamp((delta - r)/r, 0, 1).
double cutoff(const PolygonDomain& domain, double r, Point p);
/// Same profile given the distance value.
double cutoff_profile(double delta, double r);

/// Grid description of a structured union-jack mesh. Cell (i, j) covers
/// [x0 + i h, x0 + (i+1) h] x [y0 + j h, y0 + (j+1) h]; its diagonal runs from the
/// lower-left to the upper-right corner when i + j is even and the other way otherwise.
struct StructuredInfo {
    double x0 = 0.0;
    double y0 = 0.0;
    double h = 0.0;
    int nx = 0;
    int ny = 0;
    /// Node id of grid vertex (i, j) at i + j*(nx+1), or -1.
    std::vector<int> node_of_vertex;
    /// First of the two triangles of cell (i, j) at i + j*nx, or -1.
    std::vector<int> first_tri_of_cell;
    /// Per triangle: cell index and which half (0 lower, 1 upper).
    std::vector<int> tri_cell;
    std::vector<std::uint8_t> tri_half;

    static bool slash(int i, int j) { return ((i + j) & 1) == 0; }
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    int tri = 0;
    Point normal;  // outward unit normal
    double length = 0.0;
};

struct TriMesh {
    std::vector<Point> nodes;
    std::vector<std::array<int, 3>> tris;  // counterclockwise
    std::vector<BoundaryEdge> boundary;
    std::vector<std::uint8_t> on_boundary;  // per node
    double h = 0.0;
    bool structured = false;
    StructuredInfo grid;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_tris() const { return tris.size(); }
    double area(std::size_t t) const;
    double diameter(std::size_t t) const;
    double min_angle_degrees() const;
    double boundary_length() const;
    Point barycenter(std::size_t t) const;

    /// Triangle containing p and its barycentric coordinates; returns -1 if outside.
    int locate(Point p, std::array<double, 3>& bary) const;

    /// Rebuilds boundary edges, normals and node flags from the triangle list.
    void build_boundary();
    /// Spatial bucket index for locate() on unstructured meshes.
    void build_locator();

private:
    int locate_generic(Point p, std::array<double, 3>& bary) const;
    double bx0_ = 0.0, by0_ = 0.0, bs_ = 1.0;
    int bnx_ = 0, bny_ = 0;
    std::vector<std::vector<int>> buckets_;
};

struct TriangulateOptions {
    std::size_t node_cap = 5'000'000;
};

/// Structured union-jack triangulation with leg length h (element diameter h*sqrt(2)).
/// Polygon vertices must lie on the grid spanned from the bounding-box corner and edges must
/// be axis-parallel; otherwise ValidationError. ResourceError if the node count would exceed the cap.
TriMesh triangulate(const PolygonDomain& domain, double h, const TriangulateOptions& opts = {});

enum class LayerTag : std::uint8_t { Inside, BoundaryLayer, Cut };

/// Tag per element: Inside (barycenter in Sigma_r), BoundaryLayer, or Cut when the vertex
/// distances straddle r by more than 1e-9*h on both sides.
std::vector<LayerTag> layer_mask(const TriMesh& mesh, const PolygonDomain& domain, double r);

/// Node and element text tables, 0-based indices, '#' header lines.
void write_mesh(const TriMesh& mesh, const std::string& nodes_path, const std::string& elements_path);
/// Reads tables written by write_mesh; the result is unstructured (generic) and validated.
TriMesh read_mesh(const std::string& nodes_path, const std::string& elements_path);

}  // namespace homog
