#pragma once

#include "homog/domain.hpp"
#include "homog/fem.hpp"
#include "homog/norms.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace homog {

/// Radial bump zeta(x) = C exp(-1/(1 - 4|x|^2)) on |x| < 1/2 in two dimensions, normalized
/// to unit mass; zeta_eps(x) = eps^-2 zeta(x/eps).
class Mollifier {
public:
    Mollifier();
    /// The constant C.
    double normalization() const { return C_; }
    double operator()(double x, double y) const;
    /// Value at scale eps.
    double scaled(double x, double y, double eps) const;
    /// Mass of the normalized profile recomputed by adaptive quadrature (should be 1).
    double mass() const;

private:
    double C_ = 0.0;
};

const Mollifier& mollifier();

/// Samples on the uniform grid x0 + i s, y0 + j s (i < nx, j < ny). Storage is planar:
/// component c at (i, j) is values[(c*ny + j)*nx + i]. Values outside the grid are zero.
struct GridFunction {
    double x0 = 0.0;
    double y0 = 0.0;
    double s = 0.0;
    int nx = 0;
    int ny = 0;
    int m = 1;
    std::vector<double> values;

    static GridFunction zeros(double x0, double y0, double s, int nx, int ny, int m);
    /// Grid covering the domain's bounding box enlarged by at least `pad` on every side.
    /// Grid lines pass through `anchor` (so a mesh origin can be matched).
    static GridFunction covering(const PolygonDomain& domain, double s, double pad, int m, Point anchor = {0.0, 0.0});

    Point point(int i, int j) const { return {x0 + i * s, y0 + j * s}; }
    std::size_t index(int i, int j, int c = 0) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(j)) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(i);
    }
    double at(int i, int j, int c = 0) const { return values[index(i, j, c)]; }
    double& at(int i, int j, int c = 0) { return values[index(i, j, c)]; }
    bool same_layout(const GridFunction& o) const;

    /// Bilinear interpolation (zero outside the grid).
    double interpolate(Point p, int c = 0) const;
    /// Gradient of the bilinear interpolant.
    Point interpolate_gradient(Point p, int c = 0) const;
    double max_abs(int c = 0) const;
};

/// Grid samples of a vector function at points of the domain accepted by the region
/// (Region::All or Region::Inside), zero elsewhere. The layout is taken from `layout`.
GridFunction sample_to_grid(const GridFunction& layout, const PolygonDomain& domain, const RegionSpec& support,
                            int m, const VectorFunction& f);

/// Samples u (barycentric interpolation) on a grid with spacing s over the domain's bounding
/// box padded by `pad`, zero outside the domain and outside the support hint.
GridFunction to_grid(const FemFunction& u, const PolygonDomain& domain, double s, const RegionSpec& support_hint,
                     double pad = 0.0, Point anchor = {0.0, 0.0});

/// Discrete convolution with zeta_eps by direct summation over the lattice points inside the
/// ball of radius eps/2 (weights normalized to sum to one). Throws ValidationError when the
/// spacing exceeds eps/16.
GridFunction smooth(const GridFunction& f, double eps);

/// S_eps applied twice.
GridFunction smooth_twice(const GridFunction& f, double eps);

/// Sum of the unnormalized lattice weights at spacing s (a quadrature of the unit mass).
double stencil_raw_sum(double eps, double s);

/// Direct evaluation of (zeta_eps * f)(x) at an arbitrary point by the lattice rule of spacing s
/// centred at x, for a function given pointwise.
double convolve_at(const std::function<double(Point)>& f, Point x, double eps, double s);

struct ProductConstant {
    std::string g;
    double g_norm = 0.0;   // ||g||_{L2(Y)}
    double c_plain = 0.0;  // unweighted product bound
    double c_inv = 0.0;    // weight delta^-1
    double c_delta = 0.0;  // weight delta
};

struct WeightedBoundsReport {
    std::string domain;
    double eps = 0.0;
    double spacing = 0.0;
    /// eps >= c0/4 (outside the stated range of the layer estimates); checks still run.
    bool outside_layer_range = false;
    std::size_t grid_points = 0;
    std::size_t random_points = 0;
    double max_ratio_delta = 0.0;      // max S(delta)/delta on Sigma_2eps
    double max_ratio_inv_delta = 0.0;  // max S(1/delta)*delta on Sigma_2eps
    bool pointwise_ok = false;
    std::vector<ProductConstant> products;
    /// ||f - S f||_{L2(Sigma_2eps; delta)} / (eps ||grad f||_{L2(Sigma_eps; delta)}).
    double commutator_constant = 0.0;
    /// ||S f||_{L2} / (eps^-1/2 ||f||_{L^4/3}), an observed constant only.
    double lq_gain_constant = 0.0;
    double stencil_raw_sum = 0.0;
};

/// Pointwise ratios on every grid point of Sigma_2eps plus `samples` seeded random points
/// (evaluated by direct lattice convolution of the exact distance), then the weighted product
/// and commutator constants for the periodic functions `g_exprs` (expressions in y1, y2;
/// defaults to "1" and a trigonometric example). With `strict`, a pointwise ratio above
/// 2 + 1e-6 throws VerificationError.
WeightedBoundsReport verify_weighted_bounds(const PolygonDomain& domain, double eps, std::size_t samples,
                                            std::uint64_t seed = 1, const std::vector<std::string>& g_exprs = {},
                                            bool strict = true);

/// CSV export: "x,y,f0[,f1...]" for every grid point.
void write_grid_csv(const GridFunction& f, const std::string& path);
/// CSV export of the grid row closest to y: "x,f0[,f1...]".
void write_grid_slice_csv(const GridFunction& f, double y, const std::string& path);

}  // namespace homog
