#pragma once

#include "homog/fem.hpp"
#include "homog/norms.hpp"

#include <array>
#include <vector>

namespace homog {

/// Nodal gradient of one component by area-weighted averaging of the element gradients
/// around each node; returned as a two-component P1 field (d/dx1, d/dx2).
FemFunction recovered_gradient(const FemFunction& u, int comp = 0);

struct HessianField {
    /// Per node (d11, d12, d22); meaningful only where valid[n] is set.
    std::vector<std::array<double, 3>> H;
    std::vector<std::uint8_t> valid;
    std::size_t skipped = 0;
};

/// Least-squares quadratic fit over the two-ring patch of each requested node (all nodes
/// when `wanted` is null). Nodes whose patch cannot determine a quadratic are skipped.
HessianField recover_hessian(const FemFunction& u, int comp = 0, const std::vector<std::uint8_t>* wanted = nullptr);

struct SeminormResult {
    double value = 0.0;
    std::size_t skipped_nodes = 0;
    std::size_t skipped_elements = 0;
};

/// || grad^2 u ||_{L2(Sigma_r)} (optionally with weight delta) from the recovered Hessian.
/// Requires r >= 2h so that the region stays away from the boundary.
SeminormResult second_derivative_seminorm(const FemFunction& u, const PolygonDomain& domain, double r, bool weighted, int comp = 0);

}  // namespace homog
