#pragma once

#include "homog/cell.hpp"
#include "homog/coefficients.hpp"
#include "homog/domain.hpp"
#include "homog/quadrature.hpp"
#include "homog/sparse.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace homog {

/// Vector-valued function of a point; writes m components.
using VectorFunction = std::function<void(Point, double*)>;

/// One expression per component in the variables x1, x2.
VectorFunction expression_function(const std::vector<std::string>& components);
VectorFunction constant_function(std::vector<double> values);

/// Continuous piecewise-linear field with m components; value of component a at node n
/// is values[n*m + a].
struct FemFunction {
    const TriMesh* mesh = nullptr;
    int m = 1;
    Vec values;

    static FemFunction zeros(const TriMesh& mesh, int m);
    static FemFunction interpolate(const TriMesh& mesh, int m, const VectorFunction& f);

    double at(std::size_t node, int comp) const { return values[node * static_cast<std::size_t>(m) + static_cast<std::size_t>(comp)]; }
    /// Value inside triangle t at barycentric coordinates l.
    double eval(std::size_t t, const std::array<double, 3>& l, int comp) const;
    /// Constant gradient of component comp on triangle t.
    Point gradient(std::size_t t, int comp) const;
    /// Point evaluation (locates the triangle); throws if p is outside the mesh.
    void evaluate(Point p, double* out) const;
};

/// Gradients of the three barycentric coordinates of triangle t.
std::array<Point, 3> basis_gradients(const TriMesh& mesh, std::size_t t);
/// Physical point of barycentric coordinates l in triangle t.
Point map_point(const TriMesh& mesh, std::size_t t, const std::array<double, 3>& l);

/// Coefficient values at physical points, the input of assembly.
class PointCoefficients {
public:
    virtual ~PointCoefficients() = default;
    int dim() const { return dim_; }
    int m() const { return m_; }
    double lambda() const { return lambda_; }
    virtual void eval(Point x, CoeffValues& out) const = 0;
    /// Oscillation scale; 0 for constant coefficients.
    virtual double epsilon() const = 0;
    /// True when the bilinear form is symmetric (symmetric A, no first-order terms, symmetric c).
    virtual bool symmetric() const = 0;

protected:
    int dim_ = 2;
    int m_ = 1;
    double lambda_ = 0.0;
};

/// x -> coefficients(x / epsilon).
class OscillatingCoefficients final : public PointCoefficients {
public:
    OscillatingCoefficients(CoefficientSet coeffs, double epsilon);
    void eval(Point x, CoeffValues& out) const override;
    double epsilon() const override { return eps_; }
    bool symmetric() const override { return symmetric_; }
    const CoefficientSet& coefficients() const { return coeffs_; }

private:
    CoefficientSet coeffs_;
    double eps_;
    bool symmetric_ = false;
};

/// Constant tensors (the homogenized operator).
class ConstantCoefficients final : public PointCoefficients {
public:
    explicit ConstantCoefficients(const HomogenizedTensors& t);
    void eval(Point x, CoeffValues& out) const override;
    double epsilon() const override { return 0.0; }
    bool symmetric() const override { return symmetric_; }

private:
    CoeffValues values_;
    bool symmetric_ = false;
};

enum class BcKind { Dirichlet, Neumann };

struct ProblemData {
    BcKind bc = BcKind::Dirichlet;
    /// Volume load; empty means zero. Alternatively a P1 load via F_fem.
    VectorFunction F;
    const FemFunction* F_fem = nullptr;
    /// Dirichlet trace (empty means zero).
    VectorFunction g;
    /// Neumann flux density on the boundary (empty means zero).
    VectorFunction flux;
};

struct AssembleOptions {
    /// Assemble the adjoint form B*[u, v] = B[v, u].
    bool adjoint = false;
    /// Triangle rule degree (2 or 4); 0 picks 4 for oscillating and 2 for constant coefficients.
    int quadrature_degree = 0;
    /// Allow epsilon below 2h (tests of the guard itself use the default).
    bool allow_underresolved = false;
};

struct AssembledSystem {
    const TriMesh* mesh = nullptr;
    int m = 1;
    SparseMatrix matrix;
    Vec rhs;
    std::vector<std::uint8_t> constrained;
    Vec constrained_values;
    bool symmetric = false;
    std::vector<std::string> warnings;
};

/// Matrix of B (or B*) on the P1 basis without boundary conditions; row = test dof.
/// Throws ValidationError when epsilon < 2h and records a warning when epsilon < 4h.
SparseMatrix assemble_matrix(const PointCoefficients& coeffs, const TriMesh& mesh, const AssembleOptions& opts = {},
                             std::vector<std::string>* warnings = nullptr);

/// Load vector: int F phi plus, for Neumann data, the boundary integral of the flux times phi.
Vec assemble_load(const TriMesh& mesh, int m, const ProblemData& data);

AssembledSystem assemble(const PointCoefficients& coeffs, const TriMesh& mesh, const ProblemData& data,
                         const AssembleOptions& opts = {});

enum class Preconditioner { Auto, Multigrid, Jacobi };

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 20000;
    Preconditioner preconditioner = Preconditioner::Auto;
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    std::string method;
    std::string preconditioner;
};

/// Krylov solve: conjugate gradients when the system is symmetric, BiCGStab otherwise.
/// Throws SolverError when the iteration cap is hit or indefiniteness is detected.
FemFunction solve(const AssembledSystem& system, const SolveOptions& opts = {}, SolveStats* stats = nullptr);

struct Lambda0Estimate {
    double analytic = 0.0;     // kappa^2/mu + kappa
    double lambda0 = 0.0;      // after any doubling
    double min_rayleigh = 0.0; // smallest B[u,u]/||u||_{H1}^2 over the random fields
    int doublings = 0;
    int samples = 0;
};

/// Analytic bound from the validated constants, followed by a Rayleigh-quotient check on
/// seeded random fields (doubling the bound until every quotient is at least 1e-6).
Lambda0Estimate estimate_lambda0(const CoefficientSet& coeffs, std::uint64_t seed = 1, int samples = 100);

/// v^T K u for a matrix from assemble_matrix.
double bilinear_form(const SparseMatrix& K, const Vec& u, const Vec& v);

struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double defect = 0.0;  // |lhs - rhs| / max(|lhs|, |rhs|)
};

/// Integral of B grad u + (c + lambda) u against the constant test function compared with
/// the integral of F plus the boundary integral of the flux (component with the largest defect).
IdentityCheck compatibility_check(const PointCoefficients& coeffs, const ProblemData& data, const FemFunction& u,
                                  int quadrature_degree = 0);

/// Second Green identity in weak form for Neumann solutions: u solves the problem with data_u
/// and v solves the adjoint problem with data_v; compares the two load pairings.
IdentityCheck green_check(const ProblemData& data_u, const FemFunction& u, const ProblemData& data_v, const FemFunction& v);

/// <K u, v> against <u, K* v> for seeded random Dirichlet-zero vectors.
IdentityCheck adjoint_check(const PointCoefficients& coeffs, const TriMesh& mesh, std::uint64_t seed = 1);

/// CSV with header x,y,u0[,u1...].
void write_solution_csv(const FemFunction& u, const std::string& path);

}  // namespace homog
