#pragma once

#include "homog/domain.hpp"
#include "homog/fem.hpp"

#include <functional>

namespace homog {

/// Integration region: the whole domain, the interior set Sigma_r = {delta > r}, or the
/// boundary layer Omega \ Sigma_r.
enum class Region { All, Inside, Layer };

struct RegionSpec {
    Region region = Region::All;
    double r = 0.0;
    /// Weight delta^power with power in {-1, 0, 1}; delta is evaluated exactly at quadrature points.
    int weight_power = 0;
};

/// Integrand at a quadrature point: triangle, barycentric coordinates, physical point.
using Integrand = std::function<double(std::size_t, const std::array<double, 3>&, Point)>;

/// Element quadrature of f over the region. Elements cut by the level set {delta = r} are
/// split into 64 sub-triangles whose quadrature points are classified individually.
/// Throws ValidationError for the unbounded combination Layer with weight delta^-1.
double integrate(const TriMesh& mesh, const PolygonDomain& domain, const RegionSpec& spec, const Integrand& f, int degree = 4);

double region_area(const TriMesh& mesh, const PolygonDomain& domain, const RegionSpec& spec);

enum class NormKind { L2, Lp, H1, H1Semi };

struct NormSpec {
    NormKind kind = NormKind::L2;
    double p = 2.0;
    RegionSpec region;
};

/// Norm of all components together (Euclidean in the component index).
double norm(const FemFunction& u, const PolygonDomain& domain, const NormSpec& spec);

double norm_l2(const FemFunction& u, const PolygonDomain& domain);
double norm_lp(const FemFunction& u, const PolygonDomain& domain, double p);
double norm_h1(const FemFunction& u, const PolygonDomain& domain);

}  // namespace homog
