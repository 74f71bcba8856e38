#pragma once

#include <array>
#include <vector>

namespace homog {

/// Quadrature point in barycentric coordinates; weights sum to one (multiply by the area).
struct TriQuadPoint {
    std::array<double, 3> l;
    double w;
};

using TriRule = std::vector<TriQuadPoint>;

/// Symmetric rules exact for polynomials of degree 2 (3 points) and 4 (6 points).
const TriRule& tri_rule_degree2();
const TriRule& tri_rule_degree4();
/// Degree-1 centroid rule.
const TriRule& tri_rule_centroid();

/// Composite rule: the reference triangle split into 4^level congruent pieces with `base` on each.
TriRule subdivided_rule(const TriRule& base, int level);

/// Gauss-Legendre points on [0,1] with weights summing to one.
struct LineQuadPoint {
    double t;
    double w;
};
std::vector<LineQuadPoint> gauss_line(int points);

}  // namespace homog
