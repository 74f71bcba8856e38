#pragma once

#include "homog/cell.hpp"
#include "homog/domain.hpp"
#include "homog/fem.hpp"
#include "homog/smoothing.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace homog {

/// Bilinear periodic interpolation of a cell-grid field (d = 2), optionally after exact
/// trigonometric upsampling by `upsample` (a power of two).
class PeriodicSampler {
public:
    PeriodicSampler() = default;
    PeriodicSampler(const PeriodicArray& field, const CellGrid& grid, int upsample = 1);
    /// Value at the cell point y (any real coordinates; reduced modulo 1).
    double operator()(double y1, double y2) const;
    int resolution() const { return n_; }
    const std::vector<double>& data() const { return v_; }

private:
    int n_ = 0;
    std::vector<double> v_;
};

/// f(x / eps) at each point by bilinear periodic interpolation.
std::vector<double> sample_periodic_at_scale(const PeriodicArray& field, const CellGrid& grid, double eps,
                                             const std::vector<Point>& points, int upsample = 1);

enum class SmoothingPasses { Once, Twice };

/// Cutoff radius (as a multiple of eps) and number of smoothing passes that define phi:
/// phi_0 = S^n(psi_r u0) and phi_k = S^n(psi_r d_k u0).
struct TwoScaleVariant {
    SmoothingPasses smoothing = SmoothingPasses::Once;
    double cutoff = 4.0;
    std::string name() const;

    /// S once with the 4 eps cutoff (the H1 corrector estimate).
    static TwoScaleVariant h1_corrector() { return {SmoothingPasses::Once, 4.0}; }
    /// S twice with the 2 eps cutoff (the sharpened L2 estimate).
    static TwoScaleVariant l2_corrector() { return {SmoothingPasses::Twice, 2.0}; }
    /// Adjoint-side constructions; build them from the adjoint CellData.
    static TwoScaleVariant adjoint_once() { return {SmoothingPasses::Once, 10.0}; }
    static TwoScaleVariant adjoint_twice() { return {SmoothingPasses::Twice, 20.0}; }
};

/// phi_k^gamma (k = 0..d) at a quadrature point: values[k*m + gamma] and
/// gradients[(k*m + gamma)*2 + axis].
using PhiField = std::function<void(std::size_t t, const std::array<double, 3>& l, Point x, double* values, double* gradients)>;

struct TwoScaleOptions {
    /// Trigonometric upsampling of the cell fields before bilinear interpolation.
    int upsample = 4;
    /// Grid spacing of the phi fields as a fraction of eps (at most 1/16).
    double grid_fraction = 1.0 / 16.0;
};

/// Scratch buffers for pointwise evaluation; one per thread.
struct TwoScaleWorkspace {
    CoeffValues coef;
    std::vector<double> chi, dchi, b, dtheta;
    std::vector<double> phi, dphi;
    std::vector<double> u0, du0, ue, due;
    std::vector<double> z, dz, w, dw;
};

/// Everything needed to evaluate w_eps = u_eps - u0 - eps chi_k(x/eps) phi_k and the residual
/// fields at arbitrary quadrature points.
class TwoScaleState {
public:
    const CellData& cell() const { return *cell_; }
    const CoefficientSet& coefficients() const { return coeffs_; }
    const PolygonDomain& domain() const { return *domain_; }
    const TriMesh& mesh() const { return *mesh_; }
    double epsilon() const { return eps_; }
    int m() const { return m_; }
    const TwoScaleVariant& variant() const { return variant_; }
    /// Grid of phi values (components k*m + gamma); empty for a user-supplied phi.
    const GridFunction& phi_grid() const { return phi_grid_; }
    const FemFunction& u_eps() const { return u_eps_; }
    const FemFunction& u0() const { return u0_; }
    /// Nodal values of w_eps.
    const FemFunction& w() const { return w_; }

    TwoScaleWorkspace workspace() const;
    /// Fills the workspace at (t, l, x): coefficients at x/eps, cell fields, phi, u0 and u_eps
    /// with gradients, the corrector z = eps chi_k phi_k with its product-rule gradient, and w.
    void evaluate(std::size_t t, const std::array<double, 3>& l, Point x, TwoScaleWorkspace& ws) const;

    /// Boundary-layer radius outside which every phi field must vanish.
    double support_radius() const;

private:
    friend TwoScaleState build_w(const FemFunction&, const FemFunction&, const CellData&, const CoefficientSet&,
                                 const PolygonDomain&, double, const TwoScaleVariant&, const TwoScaleOptions&);
    friend TwoScaleState build_w_with_phi(const FemFunction&, const FemFunction&, const CellData&, const CoefficientSet&,
                                          const PolygonDomain&, double, PhiField, const TwoScaleOptions&);
    void prepare(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                 const PolygonDomain& domain, double eps, const TwoScaleOptions& opts);
    void compute_nodal_w();

    const CellData* cell_ = nullptr;
    CoefficientSet coeffs_;
    const PolygonDomain* domain_ = nullptr;
    const TriMesh* mesh_ = nullptr;
    double eps_ = 0.0;
    int m_ = 1;
    TwoScaleVariant variant_;
    GridFunction phi_grid_;
    PhiField phi_;
    FemFunction u_eps_, u0_, w_;
    std::vector<FemFunction> grad_u0_;  // recovered gradients per component
    // Samplers laid out like the workspace buffers.
    std::shared_ptr<const std::vector<PeriodicSampler>> chi_s_, dchi_s_, b_s_, dtheta_s_;
};

/// Canonical construction: phi from smoothed cutoffs of u0 and its recovered gradient on a grid of
/// spacing eps/16 aligned with the mesh. Requires the same mesh for u_eps and u0, eps >= 2h, and
/// CellData with derivative fields (ValidationError otherwise). Pass the adjoint CellData and
/// adjoint coefficients for the adjoint-side constructions.
TwoScaleState build_w(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                      const PolygonDomain& domain, double eps, const TwoScaleVariant& variant, const TwoScaleOptions& opts = {});

/// General construction with a caller-supplied phi (for example phi_0 = u0, phi_k = d_k u0 with no cutoff).
TwoScaleState build_w_with_phi(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                               const PolygonDomain& domain, double eps, PhiField phi, const TwoScaleOptions& opts = {});

/// Residual constituents at one point (component alpha of K_i at K[i*m + alpha], and so on).
struct ResidualPoint {
    std::vector<double> K, I, J;  // 2*m
    std::vector<double> M, N;     // m
    std::vector<double> f;        // 2*m, f-tilde
    std::vector<double> F;        // m, F-tilde
};

void residual_at(const TwoScaleState& state, const TwoScaleWorkspace& ws, ResidualPoint& out);

/// L2 norms of the residual fields over the domain (degree-4 element quadrature).
struct ResidualFields {
    const TwoScaleState* state = nullptr;
    double K = 0.0, I = 0.0, J = 0.0, M = 0.0, N = 0.0;
    double f_tilde = 0.0, F_tilde = 0.0;
    /// Pointwise evaluation at a quadrature point.
    void at(std::size_t t, const std::array<double, 3>& l, TwoScaleWorkspace& ws, ResidualPoint& out) const;
};

ResidualFields residual_fields(const TwoScaleState& state);

struct WeakIdentityOptions {
    BcKind bc = BcKind::Dirichlet;
    int num_tests = 20;
    std::uint64_t seed = 1;
    /// Highest trigonometric mode of the random test functions.
    int max_mode = 3;
};

struct WeakIdentityReport {
    double eps = 0.0;
    double h = 0.0;
    int tests = 0;
    /// |B[w_h, v] - int f.grad v - int F v (- boundary term)| / (||v||_H1 (||f||+||F||)) maximised over
    /// the random tests and the worst-case test function (the Riesz representative of the residual),
    /// with w_h the nodal interpolant and B evaluated by the assembled matrix.
    double max_relative_defect = 0.0;
    /// Same with w evaluated analytically (product rule) at the quadrature points.
    double max_relative_defect_analytic = 0.0;
    /// Maxima over the random trigonometric tests only.
    double max_random_defect = 0.0;
    double max_random_defect_analytic = 0.0;
    std::vector<double> defects;
    std::vector<double> defects_analytic;
    /// Discrete dual norm of the residual functional (the supremum over all test functions of
    /// the finite element space) relative to the scale.
    double dual_norm_defect = 0.0;
    double dual_norm_defect_analytic = 0.0;
    double scale = 0.0;  // ||f-tilde|| + ||F-tilde||
};

/// B_eps[w, v] against the right side for seeded random test functions (trigonometric modes
/// interpolated on the mesh; Dirichlet tests vanish on the boundary). The Neumann form adds the
/// boundary integral of eps n.J v.
WeakIdentityReport check_weak_identity(const TwoScaleState& state, const WeakIdentityOptions& opts = {});

struct DualityResult {
    double lhs = 0.0;          // int w Phi (nodal w)
    double rhs = 0.0;          // int f.grad phi + F phi
    double defect = 0.0;       // |lhs - rhs| / (|lhs| + |rhs|)
    double lhs_analytic = 0.0; // int w Phi with w evaluated analytically
    double defect_analytic = 0.0;
};

/// Pairing identity with the adjoint Dirichlet solution phi_eps (L*_eps phi = Phi, phi = 0 on the
/// boundary). Throws ValidationError when phi_eps does not vanish on the boundary.
DualityResult duality_pairing(const TwoScaleState& state, const FemFunction& adjoint_solution, const VectorFunction& Phi);

/// Solves the adjoint Dirichlet problem for Phi on the state's mesh.
FemFunction solve_adjoint(const TwoScaleState& state, const VectorFunction& Phi, const SolveOptions& opts = {});

struct SupportCheck {
    double radius = 0.0;          // phi must vanish where delta < radius
    double max_outside = 0.0;     // largest |phi| on grid points with delta < radius
    std::size_t points_checked = 0;
    bool ok = false;
};

SupportCheck check_support(const TwoScaleState& state);

/// Flux-corrector identity: int b_ik phi_k d_i v + eps int E_jik d_j phi_k d_i v = 0 for test
/// functions vanishing on the boundary (antisymmetry of E). Reports the relative defect.
struct AntisymmetryCheck {
    double flux_term = 0.0;
    double corrector_term = 0.0;
    double defect = 0.0;
};

AntisymmetryCheck check_antisymmetry(const TwoScaleState& state, std::uint64_t seed = 1);

/// Energy bound shape: ||w||_H1 over the computable right side
/// ||phi||_{L2(layer 2eps)} + ||grad u0 - phi_vec|| + ||u0 - phi_0|| + eps||grad phi|| + eps||phi||.
struct EnergyBound {
    double w_h1 = 0.0;
    double right_side = 0.0;
    double constant = 0.0;
};

EnergyBound energy_bound(const TwoScaleState& state);

/// H1 norm of w with the analytic corrector gradient; L2 norm of w (analytic values).
double w_norm_h1(const TwoScaleState& state);
double w_norm_l2(const TwoScaleState& state);

/// JSON record {preset, eps, h, defect, observed_constants}.
std::string defect_record_json(const std::string& preset, double eps, double h, double defect,
                               const std::vector<std::pair<std::string, double>>& observed_constants);

}  // namespace homog
