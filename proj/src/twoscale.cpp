#include "homog/twoscale.hpp"

#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "homog/parallel.hpp"
#include "homog/quadrature.hpp"
#include "homog/recovery.hpp"
#include "homog/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace homog {

namespace {

constexpr int kDim = 2;

struct Bilinear {
    std::size_t i00 = 0, i10 = 0, i01 = 0, i11 = 0;
    double w00 = 0, w10 = 0, w01 = 0, w11 = 0;
};

Bilinear bilinear(double y1, double y2, int n) {
    const double u = (y1 - std::floor(y1)) * n, v = (y2 - std::floor(y2)) * n;
    int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(v));
    const double tx = u - i, ty = v - j;
    i %= n;
    j %= n;
    const int i1 = (i + 1) % n, j1 = (j + 1) % n;
    const auto N = static_cast<std::size_t>(n);
    Bilinear b;
    b.i00 = static_cast<std::size_t>(i) * N + static_cast<std::size_t>(j);
    b.i10 = static_cast<std::size_t>(i1) * N + static_cast<std::size_t>(j);
    b.i01 = static_cast<std::size_t>(i) * N + static_cast<std::size_t>(j1);
    b.i11 = static_cast<std::size_t>(i1) * N + static_cast<std::size_t>(j1);
    b.w00 = (1 - tx) * (1 - ty);
    b.w10 = tx * (1 - ty);
    b.w01 = (1 - tx) * ty;
    b.w11 = tx * ty;
    return b;
}

void sample_all(const std::vector<PeriodicSampler>& s, const Bilinear& b, std::vector<double>& out) {
    out.resize(s.size());
    for (std::size_t q = 0; q < s.size(); ++q) {
        const auto& v = s[q].data();
        out[q] = v.empty() ? 0.0 : b.w00 * v[b.i00] + b.w10 * v[b.i10] + b.w01 * v[b.i01] + b.w11 * v[b.i11];
    }
}

// Deterministic parallel quadrature: fixed blocks of triangles, block partial sums added in order.
template <class Fn>
std::vector<double> quad_reduce(const TriMesh& mesh, std::size_t nsums, const Fn& fn) {
    constexpr std::size_t block = 4096;
    const std::size_t nt = mesh.num_tris();
    const std::size_t nb = (nt + block - 1) / block;
    std::vector<std::vector<double>> partial(nb, std::vector<double>(nsums, 0.0));
    parallel_for(nb, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            auto& acc = partial[b];
            const std::size_t t1 = std::min(nt, (b + 1) * block);
            for (std::size_t t = b * block; t < t1; ++t) fn(t, acc);
        }
    });
    std::vector<double> out(nsums, 0.0);
    for (const auto& p : partial)
        for (std::size_t k = 0; k < nsums; ++k) out[k] += p[k];
    return out;
}

std::shared_ptr<const std::vector<PeriodicSampler>> make_samplers(const std::vector<MatrixField>& fields,
                                                                  const std::vector<std::size_t>& order, int m,
                                                                  const CellGrid& grid, int upsample) {
    // `order` lists the field index for each block of m*m samplers.
    auto out = std::make_shared<std::vector<PeriodicSampler>>();
    out->reserve(order.size() * static_cast<std::size_t>(m * m));
    for (std::size_t f : order)
        for (int a = 0; a < m; ++a)
            for (int g = 0; g < m; ++g) out->emplace_back(fields[f][static_cast<std::size_t>(a * m + g)], grid, upsample);
    return out;
}

}  // namespace

PeriodicSampler::PeriodicSampler(const PeriodicArray& field, const CellGrid& grid, int upsample) {
    if (grid.dim != 2) throw ValidationError("periodic sampling is implemented for d = 2");
    if (upsample < 1 || (upsample & (upsample - 1)) != 0) throw ValidationError("upsampling factor must be a power of two");
    if (field.size() != grid.size()) throw ValidationError("periodic field does not match its grid");
    n_ = grid.N * upsample;
    bool zero = std::all_of(field.begin(), field.end(), [](double v) { return v == 0.0; });
    if (zero) {
        v_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0.0);
    } else if (upsample == 1) {
        v_ = field;
    } else {
        SpectralOps ops(grid);
        v_ = ops.upsample(field, upsample);
    }
}

double PeriodicSampler::operator()(double y1, double y2) const {
    const Bilinear b = bilinear(y1, y2, n_);
    return b.w00 * v_[b.i00] + b.w10 * v_[b.i10] + b.w01 * v_[b.i01] + b.w11 * v_[b.i11];
}

std::vector<double> sample_periodic_at_scale(const PeriodicArray& field, const CellGrid& grid, double eps,
                                             const std::vector<Point>& points, int upsample) {
    if (!(eps > 0.0)) throw ValidationError("sample_periodic_at_scale: epsilon must be positive");
    const PeriodicSampler s(field, grid, upsample);
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(s(p.x / eps, p.y / eps));
    return out;
}

std::string TwoScaleVariant::name() const {
    std::ostringstream os;
    os << (smoothing == SmoothingPasses::Once ? "S" : "S2") << "-psi" << cutoff << "eps";
    return os.str();
}

TwoScaleWorkspace TwoScaleState::workspace() const {
    TwoScaleWorkspace ws;
    ws.coef = CoeffValues(kDim, m_);
    const auto M = static_cast<std::size_t>(m_);
    ws.phi.resize((kDim + 1) * M);
    ws.dphi.resize((kDim + 1) * M * kDim);
    ws.u0.resize(M);
    ws.du0.resize(M * kDim);
    ws.ue.resize(M);
    ws.due.resize(M * kDim);
    ws.z.resize(M);
    ws.dz.resize(M * kDim);
    ws.w.resize(M);
    ws.dw.resize(M * kDim);
    return ws;
}

double TwoScaleState::support_radius() const {
    if (phi_grid_.values.empty()) return 0.0;
    const double passes = variant_.smoothing == SmoothingPasses::Once ? 1.0 : 2.0;
    return (variant_.cutoff - 0.5 * passes) * eps_;
}

void TwoScaleState::prepare(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                            const PolygonDomain& domain, double eps, const TwoScaleOptions& opts) {
    if (!u_eps.mesh || u_eps.mesh != u0.mesh) throw ValidationError("u_eps and u0 must live on the same mesh");
    if (u_eps.m != u0.m || u_eps.m != cell.m || coeffs.m != cell.m) throw ValidationError("system sizes of u_eps, u0 and the cell data differ");
    if (cell.dim != kDim || coeffs.dim != kDim) throw ValidationError("two-scale construction is implemented for d = 2");
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    const TriMesh& mesh = *u_eps.mesh;
    if (eps < 2.0 * mesh.h * (1.0 - 1e-12)) throw ValidationError("epsilon below 2h cannot be resolved by the mesh");
    const std::size_t K = kDim + 1;
    if (cell.chi.size() != K || cell.dchi.size() != K * kDim || cell.dtheta.size() != K * kDim || cell.b.size() != K * kDim)
        throw ValidationError("cell data is missing corrector derivative fields (recompute derived fields)");
    if (!(opts.grid_fraction > 0.0) || opts.grid_fraction > 1.0 / 16.0 + 1e-15)
        throw ValidationError("phi grid spacing must be at most eps/16");

    cell_ = &cell;
    coeffs_ = coeffs;
    domain_ = &domain;
    mesh_ = &mesh;
    eps_ = eps;
    m_ = cell.m;
    u_eps_ = u_eps;
    u0_ = u0;

    std::vector<std::size_t> chi_order, dchi_order, b_order, dtheta_order;
    for (std::size_t k = 0; k < K; ++k) {
        chi_order.push_back(k);
        for (std::size_t j = 0; j < kDim; ++j) {
            dchi_order.push_back(k * kDim + j);
            dtheta_order.push_back(k * kDim + j);
        }
    }
    for (std::size_t i = 0; i < kDim; ++i)
        for (std::size_t k = 0; k < K; ++k) b_order.push_back(i * K + k);
    chi_s_ = make_samplers(cell.chi, chi_order, m_, cell.grid, opts.upsample);
    dchi_s_ = make_samplers(cell.dchi, dchi_order, m_, cell.grid, opts.upsample);
    b_s_ = make_samplers(cell.b, b_order, m_, cell.grid, opts.upsample);
    dtheta_s_ = make_samplers(cell.dtheta, dtheta_order, m_, cell.grid, opts.upsample);
}

void TwoScaleState::evaluate(std::size_t t, const std::array<double, 3>& l, Point x, TwoScaleWorkspace& ws) const {
    const int m = m_;
    const double y[2] = {x.x / eps_, x.y / eps_};
    homog::evaluate(coeffs_, y, ws.coef);
    const Bilinear bl = bilinear(y[0], y[1], (*chi_s_)[0].resolution());
    sample_all(*chi_s_, bl, ws.chi);
    sample_all(*dchi_s_, bl, ws.dchi);
    sample_all(*b_s_, bl, ws.b);
    sample_all(*dtheta_s_, bl, ws.dtheta);

    const int nphi = (kDim + 1) * m;
    if (!phi_grid_.values.empty()) {
        for (int c = 0; c < nphi; ++c) {
            ws.phi[static_cast<std::size_t>(c)] = phi_grid_.interpolate(x, c);
            const Point g = phi_grid_.interpolate_gradient(x, c);
            ws.dphi[static_cast<std::size_t>(c * 2)] = g.x;
            ws.dphi[static_cast<std::size_t>(c * 2 + 1)] = g.y;
        }
    } else {
        phi_(t, l, x, ws.phi.data(), ws.dphi.data());
    }
    for (int b = 0; b < m; ++b) {
        const auto B = static_cast<std::size_t>(b);
        ws.u0[B] = u0_.eval(t, l, b);
        ws.ue[B] = u_eps_.eval(t, l, b);
        const Point g0 = u0_.gradient(t, b), ge = u_eps_.gradient(t, b);
        ws.du0[B * 2] = g0.x;
        ws.du0[B * 2 + 1] = g0.y;
        ws.due[B * 2] = ge.x;
        ws.due[B * 2 + 1] = ge.y;
    }
    // z = eps chi_k phi_k and its product-rule gradient.
    for (int be = 0; be < m; ++be) {
        double z = 0.0, dz0 = 0.0, dz1 = 0.0;
        for (int k = 0; k <= kDim; ++k)
            for (int ga = 0; ga < m; ++ga) {
                const double chi = ws.chi[static_cast<std::size_t>((k * m + be) * m + ga)];
                const double ph = ws.phi[static_cast<std::size_t>(k * m + ga)];
                z += chi * ph;
                dz0 += ws.dchi[static_cast<std::size_t>(((k * 2 + 0) * m + be) * m + ga)] * ph +
                       eps_ * chi * ws.dphi[static_cast<std::size_t>((k * m + ga) * 2)];
                dz1 += ws.dchi[static_cast<std::size_t>(((k * 2 + 1) * m + be) * m + ga)] * ph +
                       eps_ * chi * ws.dphi[static_cast<std::size_t>((k * m + ga) * 2 + 1)];
            }
        const auto B = static_cast<std::size_t>(be);
        ws.z[B] = eps_ * z;
        ws.dz[B * 2] = dz0;
        ws.dz[B * 2 + 1] = dz1;
        ws.w[B] = ws.ue[B] - ws.u0[B] - ws.z[B];
        ws.dw[B * 2] = ws.due[B * 2] - ws.du0[B * 2] - dz0;
        ws.dw[B * 2 + 1] = ws.due[B * 2 + 1] - ws.du0[B * 2 + 1] - dz1;
    }
}

void TwoScaleState::compute_nodal_w() {
    const TriMesh& mesh = *mesh_;
    // One incident triangle per node, used to evaluate caller-supplied phi fields.
    std::vector<int> tri_of(mesh.num_nodes(), -1);
    std::vector<std::uint8_t> local(mesh.num_nodes(), 0);
    for (std::size_t t = 0; t < mesh.num_tris(); ++t)
        for (int a = 0; a < 3; ++a) {
            const auto n = static_cast<std::size_t>(mesh.tris[t][static_cast<std::size_t>(a)]);
            if (tri_of[n] < 0) {
                tri_of[n] = static_cast<int>(t);
                local[n] = static_cast<std::uint8_t>(a);
            }
        }
    w_ = FemFunction::zeros(mesh, m_);
    parallel_for(mesh.num_nodes(), [&](std::size_t n0, std::size_t n1) {
        TwoScaleWorkspace ws = workspace();
        for (std::size_t n = n0; n < n1; ++n) {
            if (tri_of[n] < 0) continue;
            std::array<double, 3> l{0.0, 0.0, 0.0};
            l[local[n]] = 1.0;
            evaluate(static_cast<std::size_t>(tri_of[n]), l, mesh.nodes[n], ws);
            for (int b = 0; b < m_; ++b)
                w_.values[n * static_cast<std::size_t>(m_) + static_cast<std::size_t>(b)] =
                    u_eps_.at(n, b) - u0_.at(n, b) - ws.z[static_cast<std::size_t>(b)];
        }
    });
}

TwoScaleState build_w(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                      const PolygonDomain& domain, double eps, const TwoScaleVariant& variant, const TwoScaleOptions& opts) {
    TwoScaleState st;
    st.prepare(u_eps, u0, cell, coeffs, domain, eps, opts);
    st.variant_ = variant;
    if (!(variant.cutoff > 0.0)) throw ValidationError("cutoff radius must be positive");
    const TriMesh& mesh = st.mesh();
    const int m = st.m_;
    for (int b = 0; b < m; ++b) st.grad_u0_.push_back(recovered_gradient(st.u0_, b));

    const auto bb = domain.bounding_box();
    const Point anchor = mesh.structured ? Point{mesh.grid.x0, mesh.grid.y0} : Point{bb[0], bb[1]};
    const double s = eps * opts.grid_fraction;
    const GridFunction layout = GridFunction::covering(domain, s, 0.0, 1, anchor);
    const double r = variant.cutoff * eps;
    const GridFunction raw = sample_to_grid(layout, domain, RegionSpec{Region::Inside, r, 0}, (kDim + 1) * m, [&](Point p, double* out) {
        std::array<double, 3> l{};
        const int t = mesh.locate(p, l);
        const double psi = cutoff_profile(domain.distance(p), r);
        for (int b = 0; b < m; ++b) {
            if (t < 0) {
                for (int k = 0; k <= kDim; ++k) out[k * m + b] = 0.0;
                continue;
            }
            const auto T = static_cast<std::size_t>(t);
            out[b] = psi * st.u0_.eval(T, l, b);
            for (int k = 1; k <= kDim; ++k) out[k * m + b] = psi * st.grad_u0_[static_cast<std::size_t>(b)].eval(T, l, k - 1);
        }
    });
    st.phi_grid_ = variant.smoothing == SmoothingPasses::Once ? smooth(raw, eps) : smooth_twice(raw, eps);
    st.compute_nodal_w();
    return st;
}

TwoScaleState build_w_with_phi(const FemFunction& u_eps, const FemFunction& u0, const CellData& cell, const CoefficientSet& coeffs,
                               const PolygonDomain& domain, double eps, PhiField phi, const TwoScaleOptions& opts) {
    if (!phi) throw ValidationError("build_w_with_phi needs a phi field");
    TwoScaleState st;
    st.prepare(u_eps, u0, cell, coeffs, domain, eps, opts);
    st.variant_ = TwoScaleVariant{SmoothingPasses::Once, 0.0};
    st.phi_ = std::move(phi);
    st.compute_nodal_w();
    return st;
}

void residual_at(const TwoScaleState& state, const TwoScaleWorkspace& ws, ResidualPoint& out) {
    const int m = state.m();
    const double eps = state.epsilon();
    const HomogenizedTensors& hat = state.cell().hats;
    const CoeffValues& cv = ws.coef;
    const double lam = state.coefficients().lambda;
    const auto M = static_cast<std::size_t>(m);
    out.K.assign(2 * M, 0.0);
    out.I.assign(2 * M, 0.0);
    out.J.assign(2 * M, 0.0);
    out.M.assign(M, 0.0);
    out.N.assign(M, 0.0);
    out.f.assign(2 * M, 0.0);
    out.F.assign(M, 0.0);
    auto chi = [&](int k, int be, int ga) { return ws.chi[static_cast<std::size_t>((k * m + be) * m + ga)]; };
    auto phi = [&](int k, int ga) { return ws.phi[static_cast<std::size_t>(k * m + ga)]; };
    auto dphi = [&](int k, int ga, int j) { return ws.dphi[static_cast<std::size_t>((k * m + ga) * 2 + j)]; };
    auto bf = [&](int i, int k, int al, int ga) { return ws.b[static_cast<std::size_t>(((i * (kDim + 1) + k) * m + al) * m + ga)]; };
    auto dth = [&](int k, int i, int al, int ga) { return ws.dtheta[static_cast<std::size_t>(((k * 2 + i) * m + al) * m + ga)]; };
    auto V = [&](int i, int al, int be) { return cv.V[static_cast<std::size_t>((i * m + al) * m + be)]; };
    auto Bc = [&](int i, int al, int be) { return cv.B[static_cast<std::size_t>((i * m + al) * m + be)]; };
    auto c = [&](int al, int be) { return cv.c[static_cast<std::size_t>(al * m + be)]; };

    // X^b = sum_k chi_k^{bg} phi_k^g and DX^b_j = sum_k chi_k^{bg} d_j phi_k^g.
    std::vector<double> X(M, 0.0), DX(2 * M, 0.0);
    for (int be = 0; be < m; ++be)
        for (int k = 0; k <= kDim; ++k)
            for (int ga = 0; ga < m; ++ga) {
                X[static_cast<std::size_t>(be)] += chi(k, be, ga) * phi(k, ga);
                for (int j = 0; j < 2; ++j) DX[static_cast<std::size_t>(be * 2 + j)] += chi(k, be, ga) * dphi(k, ga, j);
            }
    for (int al = 0; al < m; ++al) {
        const auto A = static_cast<std::size_t>(al);
        for (int i = 0; i < 2; ++i) {
            double K = 0.0, J = 0.0, I = 0.0;
            for (int k = 0; k <= kDim; ++k)
                for (int ga = 0; ga < m; ++ga) {
                    K += bf(i, k, al, ga) * phi(k, ga);
                    J += dth(k, i, al, ga) * phi(k, ga);
                }
            for (int be = 0; be < m; ++be) {
                for (int j = 0; j < 2; ++j) I += cv.a(i, j, al, be) * DX[static_cast<std::size_t>(be * 2 + j)];
                I += V(i, al, be) * X[static_cast<std::size_t>(be)];
            }
            double f = K - eps * (I + J);
            for (int be = 0; be < m; ++be) {
                for (int j = 0; j < 2; ++j)
                    f += (hat.a(i, j, al, be) - cv.a(i, j, al, be)) * (ws.du0[static_cast<std::size_t>(be * 2 + j)] - phi(j + 1, be));
                f += (hat.v(i, al, be) - V(i, al, be)) * (ws.u0[static_cast<std::size_t>(be)] - phi(0, be));
            }
            out.K[static_cast<std::size_t>(i) * M + A] = K;
            out.I[static_cast<std::size_t>(i) * M + A] = I;
            out.J[static_cast<std::size_t>(i) * M + A] = J;
            out.f[static_cast<std::size_t>(i) * M + A] = f;
        }
        double Mv = 0.0, Nv = 0.0;
        for (int k = 0; k <= kDim; ++k)
            for (int ga = 0; ga < m; ++ga)
                for (int i = 0; i < 2; ++i) Mv += dth(k, i, al, ga) * dphi(k, ga, i);
        for (int be = 0; be < m; ++be) {
            for (int i = 0; i < 2; ++i) Mv += Bc(i, al, be) * DX[static_cast<std::size_t>(be * 2 + i)];
            Nv += (c(al, be) + (al == be ? lam : 0.0)) * X[static_cast<std::size_t>(be)];
        }
        double F = -eps * (Mv + Nv);
        for (int be = 0; be < m; ++be) {
            for (int i = 0; i < 2; ++i)
                F += (hat.b(i, al, be) - Bc(i, al, be)) * (ws.du0[static_cast<std::size_t>(be * 2 + i)] - phi(i + 1, be));
            F += (hat.cc(al, be) - c(al, be)) * (ws.u0[static_cast<std::size_t>(be)] - phi(0, be));
        }
        out.M[A] = Mv;
        out.N[A] = Nv;
        out.F[A] = F;
    }
}

void ResidualFields::at(std::size_t t, const std::array<double, 3>& l, TwoScaleWorkspace& ws, ResidualPoint& out) const {
    state->evaluate(t, l, map_point(state->mesh(), t, l), ws);
    residual_at(*state, ws, out);
}

namespace {

double sumsq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

ResidualFields residual_fields(const TwoScaleState& state) {
    ResidualFields rf;
    rf.state = &state;
    const TriMesh& mesh = state.mesh();
    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 7, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        thread_local ResidualPoint rp;
        if (ws.phi.size() != static_cast<std::size_t>((kDim + 1) * state.m())) ws = state.workspace();
        const double area = mesh.area(t);
        for (const auto& q : rule) {
            rf.at(t, q.l, ws, rp);
            const double w = q.w * area;
            acc[0] += w * sumsq(rp.K);
            acc[1] += w * sumsq(rp.I);
            acc[2] += w * sumsq(rp.J);
            acc[3] += w * sumsq(rp.M);
            acc[4] += w * sumsq(rp.N);
            acc[5] += w * sumsq(rp.f);
            acc[6] += w * sumsq(rp.F);
        }
    });
    rf.K = std::sqrt(sums[0]);
    rf.I = std::sqrt(sums[1]);
    rf.J = std::sqrt(sums[2]);
    rf.M = std::sqrt(sums[3]);
    rf.N = std::sqrt(sums[4]);
    rf.f_tilde = std::sqrt(sums[5]);
    rf.F_tilde = std::sqrt(sums[6]);
    return rf;
}

namespace {

// Seeded random trigonometric test function on the bounding box: sine modes for Dirichlet
// (then forced to zero on boundary nodes), cosine modes including the constant for Neumann.
FemFunction random_test_function(const TriMesh& mesh, const PolygonDomain& domain, int m, BcKind bc, int max_mode, std::mt19937_64& rng) {
    const auto bb = domain.bounding_box();
    const double Lx = bb[2] - bb[0], Ly = bb[3] - bb[1];
    std::normal_distribution<double> nd(0.0, 1.0);
    const int lo = bc == BcKind::Dirichlet ? 1 : 0;
    const int nm = max_mode - lo + 1;
    std::vector<double> coef(static_cast<std::size_t>(m * nm * nm));
    for (auto& c : coef) c = nd(rng);
    FemFunction v = FemFunction::zeros(mesh, m);
    const double pi = std::numbers::pi;
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        const Point p = mesh.nodes[n];
        const double sx = (p.x - bb[0]) / Lx, sy = (p.y - bb[1]) / Ly;
        for (int al = 0; al < m; ++al) {
            double s = 0.0;
            for (int a = 0; a < nm; ++a)
                for (int b = 0; b < nm; ++b) {
                    const int pa = a + lo, pb = b + lo;
                    const double basis = bc == BcKind::Dirichlet ? std::sin(pa * pi * sx) * std::sin(pb * pi * sy)
                                                                 : std::cos(pa * pi * sx) * std::cos(pb * pi * sy);
                    s += coef[static_cast<std::size_t>((al * nm + a) * nm + b)] * basis / (1.0 + pa * pa + pb * pb);
                }
            v.values[n * static_cast<std::size_t>(m) + static_cast<std::size_t>(al)] =
                (bc == BcKind::Dirichlet && mesh.on_boundary[n]) ? 0.0 : s;
        }
    }
    return v;
}

}  // namespace

namespace {

// Gram matrix of the H1 inner product on the P1 space (no boundary conditions).
SparseMatrix h1_gram(const TriMesh& mesh, int m) {
    HomogenizedTensors t;
    t.dim = 2;
    t.m = m;
    t.lambda = 1.0;
    t.A.assign(static_cast<std::size_t>(4 * m * m), 0.0);
    t.V.assign(static_cast<std::size_t>(2 * m * m), 0.0);
    t.B.assign(static_cast<std::size_t>(2 * m * m), 0.0);
    t.c.assign(static_cast<std::size_t>(m * m), 0.0);
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < m; ++a) t.A[static_cast<std::size_t>(((i * 2 + i) * m + a) * m + a)] = 1.0;
    return assemble_matrix(ConstantCoefficients(t), mesh);
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

WeakIdentityReport check_weak_identity(const TwoScaleState& state, const WeakIdentityOptions& opts) {
    if (opts.num_tests < 1) throw ValidationError("check_weak_identity needs at least one test function");
    const TriMesh& mesh = state.mesh();
    const int m = state.m();
    const auto M = static_cast<std::size_t>(m);
    const double eps = state.epsilon();
    const CoefficientSet& coeffs = state.coefficients();
    const double lam = coeffs.lambda;
    const std::size_t ntri = mesh.num_tris();
    const std::size_t ndof = mesh.num_nodes() * M;

    // Element vectors of the right side R(phi_n) = int f.grad phi_n + F phi_n and of the analytic
    // left side L(phi_n) = B[w, phi_n] with w evaluated by the product rule.
    std::vector<double> elemR(ntri * 3 * M, 0.0), elemL(ntri * 3 * M, 0.0);
    const TriRule& rule = tri_rule_degree4();
    const auto norms = quad_reduce(mesh, 2, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        thread_local ResidualPoint rp;
        if (ws.phi.size() != static_cast<std::size_t>((kDim + 1) * m)) ws = state.workspace();
        const double area = mesh.area(t);
        const auto g = basis_gradients(mesh, t);
        for (const auto& q : rule) {
            const Point x = map_point(mesh, t, q.l);
            state.evaluate(t, q.l, x, ws);
            residual_at(state, ws, rp);
            const double w = q.w * area;
            acc[0] += w * sumsq(rp.f);
            acc[1] += w * sumsq(rp.F);
            const CoeffValues& cv = ws.coef;
            for (int al = 0; al < m; ++al) {
                const auto A = static_cast<std::size_t>(al);
                double flux[2] = {0.0, 0.0}, zero = 0.0;
                for (int be = 0; be < m; ++be) {
                    const auto B = static_cast<std::size_t>(be);
                    for (int i = 0; i < 2; ++i) {
                        flux[i] += cv.V[static_cast<std::size_t>((i * m + al) * m + be)] * ws.w[B];
                        for (int j = 0; j < 2; ++j) flux[i] += cv.a(i, j, al, be) * ws.dw[B * 2 + static_cast<std::size_t>(j)];
                        zero += cv.B[static_cast<std::size_t>((i * m + al) * m + be)] * ws.dw[B * 2 + static_cast<std::size_t>(i)];
                    }
                    zero += (cv.c[static_cast<std::size_t>(al * m + be)] + (al == be ? lam : 0.0)) * ws.w[B];
                }
                for (std::size_t a = 0; a < 3; ++a) {
                    const double la = q.l[a];
                    const std::size_t slot = (t * 3 + a) * M + A;
                    elemR[slot] += w * (rp.f[A] * g[a].x + rp.f[M + A] * g[a].y + rp.F[A] * la);
                    elemL[slot] += w * (flux[0] * g[a].x + flux[1] * g[a].y + zero * la);
                }
            }
        }
    });
    Vec R(ndof, 0.0), L(ndof, 0.0);
    for (std::size_t t = 0; t < ntri; ++t)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t al = 0; al < M; ++al) {
                const std::size_t dof = static_cast<std::size_t>(mesh.tris[t][a]) * M + al;
                R[dof] += elemR[(t * 3 + a) * M + al];
                L[dof] += elemL[(t * 3 + a) * M + al];
            }

    if (opts.bc == BcKind::Neumann) {
        // eps * int_{boundary} n.J phi_n.
        const auto line = gauss_line(3);
        TwoScaleWorkspace ws = state.workspace();
        ResidualPoint rp;
        for (const auto& e : mesh.boundary) {
            const auto& T = mesh.tris[static_cast<std::size_t>(e.tri)];
            int la = 0, lb = 0;
            for (int a = 0; a < 3; ++a) {
                if (T[static_cast<std::size_t>(a)] == e.a) la = a;
                if (T[static_cast<std::size_t>(a)] == e.b) lb = a;
            }
            const Point pa = mesh.nodes[static_cast<std::size_t>(e.a)], pb = mesh.nodes[static_cast<std::size_t>(e.b)];
            for (const auto& q : line) {
                std::array<double, 3> l{0.0, 0.0, 0.0};
                l[static_cast<std::size_t>(la)] = 1.0 - q.t;
                l[static_cast<std::size_t>(lb)] = q.t;
                const Point x{pa.x + q.t * (pb.x - pa.x), pa.y + q.t * (pb.y - pa.y)};
                state.evaluate(static_cast<std::size_t>(e.tri), l, x, ws);
                residual_at(state, ws, rp);
                for (std::size_t al = 0; al < M; ++al) {
                    const double nJ = e.normal.x * rp.J[al] + e.normal.y * rp.J[M + al];
                    const double c = q.w * e.length * eps * nJ;
                    R[static_cast<std::size_t>(e.a) * M + al] += c * (1.0 - q.t);
                    R[static_cast<std::size_t>(e.b) * M + al] += c * q.t;
                }
            }
        }
    }

    const OscillatingCoefficients osc(coeffs, eps);
    const SparseMatrix Keps = assemble_matrix(osc, mesh);
    Vec r_nodal;
    multiply(Keps, state.w().values, r_nodal);
    Vec r_an(ndof);
    for (std::size_t i = 0; i < ndof; ++i) {
        r_nodal[i] -= R[i];
        r_an[i] = L[i] - R[i];
    }
    std::vector<std::uint8_t> constrained(ndof, 0);
    if (opts.bc == BcKind::Dirichlet)
        for (std::size_t n = 0; n < mesh.num_nodes(); ++n)
            if (mesh.on_boundary[n])
                for (std::size_t al = 0; al < M; ++al) {
                    constrained[n * M + al] = 1;
                    r_nodal[n * M + al] = 0.0;
                    r_an[n * M + al] = 0.0;
                }

    WeakIdentityReport rep;
    rep.eps = eps;
    rep.h = mesh.h;
    rep.scale = std::sqrt(norms[0]) + std::sqrt(norms[1]);
    // Identically vanishing residual fields (constant coefficients) are measured absolutely.
    const double scale = rep.scale > 1e-12 ? rep.scale : 1.0;

    const SparseMatrix G = h1_gram(mesh, m);
    std::mt19937_64 rng(opts.seed);
    Vec Gv;
    for (int k = 0; k < opts.num_tests; ++k) {
        const FemFunction v = random_test_function(mesh, state.domain(), m, opts.bc, opts.max_mode, rng);
        multiply(G, v.values, Gv);
        const double nv = std::sqrt(dot(v.values, Gv));
        rep.defects.push_back(std::abs(dot(v.values, r_nodal)) / (nv * scale));
        rep.defects_analytic.push_back(std::abs(dot(v.values, r_an)) / (nv * scale));
    }
    rep.tests = opts.num_tests;
    rep.max_random_defect = *std::max_element(rep.defects.begin(), rep.defects.end());
    rep.max_random_defect_analytic = *std::max_element(rep.defects_analytic.begin(), rep.defects_analytic.end());

    // Discrete dual norm sup_v |r(v)| / ||v||_H1 through the Riesz representative G y = r.
    auto dual_norm = [&](const Vec& r) {
        AssembledSystem sys;
        sys.mesh = &mesh;
        sys.m = m;
        sys.matrix = G;
        sys.rhs = r;
        sys.symmetric = true;
        sys.constrained = constrained;
        sys.constrained_values.assign(ndof, 0.0);
        eliminate_dirichlet(sys.matrix, sys.rhs, sys.constrained, sys.constrained_values);
        SolveOptions so;
        so.tol = 1e-12;
        const FemFunction y = solve(sys, so);
        return std::sqrt(std::max(0.0, dot(r, y.values)));
    };
    rep.dual_norm_defect = dual_norm(r_nodal) / scale;
    rep.dual_norm_defect_analytic = dual_norm(r_an) / scale;
    // The Riesz representative is itself a test function and attains the supremum.
    rep.max_relative_defect = std::max(rep.max_random_defect, rep.dual_norm_defect);
    rep.max_relative_defect_analytic = std::max(rep.max_random_defect_analytic, rep.dual_norm_defect_analytic);
    return rep;
}

FemFunction solve_adjoint(const TwoScaleState& state, const VectorFunction& Phi, const SolveOptions& opts) {
    const OscillatingCoefficients osc(state.coefficients(), state.epsilon());
    ProblemData data;
    data.bc = BcKind::Dirichlet;
    data.F = Phi;
    AssembleOptions ao;
    ao.adjoint = true;
    const AssembledSystem sys = assemble(osc, state.mesh(), data, ao);
    return solve(sys, opts);
}

DualityResult duality_pairing(const TwoScaleState& state, const FemFunction& phi_eps, const VectorFunction& Phi) {
    const TriMesh& mesh = state.mesh();
    const int m = state.m();
    const auto M = static_cast<std::size_t>(m);
    if (phi_eps.mesh != &mesh || phi_eps.m != m) throw ValidationError("adjoint solution does not match the two-scale state");
    double scale = 0.0, bmax = 0.0;
    for (double v : phi_eps.values) scale = std::max(scale, std::abs(v));
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n)
        if (mesh.on_boundary[n])
            for (int al = 0; al < m; ++al) bmax = std::max(bmax, std::abs(phi_eps.at(n, al)));
    if (bmax > 1e-12 * std::max(scale, 1e-300) && bmax > 0.0)
        throw ValidationError("adjoint solution must vanish on the boundary (Dirichlet problem)");

    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 3, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        thread_local ResidualPoint rp;
        thread_local std::vector<double> pv;
        if (ws.phi.size() != static_cast<std::size_t>((kDim + 1) * m)) ws = state.workspace();
        pv.resize(M);
        const double area = mesh.area(t);
        for (const auto& q : rule) {
            const Point x = map_point(mesh, t, q.l);
            state.evaluate(t, q.l, x, ws);
            residual_at(state, ws, rp);
            if (Phi)
                Phi(x, pv.data());
            else
                std::fill(pv.begin(), pv.end(), 0.0);
            const double w = q.w * area;
            for (int al = 0; al < m; ++al) {
                const auto A = static_cast<std::size_t>(al);
                const Point g = phi_eps.gradient(t, al);
                acc[0] += w * state.w().eval(t, q.l, al) * pv[A];
                acc[1] += w * (rp.f[A] * g.x + rp.f[M + A] * g.y + rp.F[A] * phi_eps.eval(t, q.l, al));
                acc[2] += w * ws.w[A] * pv[A];
            }
        }
    });
    DualityResult r;
    r.lhs = sums[0];
    r.rhs = sums[1];
    r.lhs_analytic = sums[2];
    const double d = std::abs(r.lhs) + std::abs(r.rhs);
    r.defect = d > 0.0 ? std::abs(r.lhs - r.rhs) / d : 0.0;
    const double da = std::abs(r.lhs_analytic) + std::abs(r.rhs);
    r.defect_analytic = da > 0.0 ? std::abs(r.lhs_analytic - r.rhs) / da : 0.0;
    return r;
}

SupportCheck check_support(const TwoScaleState& state) {
    SupportCheck sc;
    sc.radius = state.support_radius();
    const GridFunction& g = state.phi_grid();
    if (g.values.empty()) {
        sc.ok = true;
        return sc;
    }
    const double tol = 1e-9 * g.s;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Point p = g.point(i, j);
            if (state.domain().distance(p) >= sc.radius - tol) continue;
            ++sc.points_checked;
            for (int c = 0; c < g.m; ++c) sc.max_outside = std::max(sc.max_outside, std::abs(g.at(i, j, c)));
        }
    sc.ok = sc.max_outside == 0.0;
    return sc;
}

AntisymmetryCheck check_antisymmetry(const TwoScaleState& state, std::uint64_t seed) {
    const CellData& cell = state.cell();
    const int m = state.m();
    const auto M = static_cast<std::size_t>(m);
    const std::size_t K = kDim + 1;
    if (cell.E.size() != kDim * kDim * K) throw ValidationError("cell data has no flux corrector");
    std::vector<std::size_t> order;
    for (std::size_t f = 0; f < cell.E.size(); ++f) order.push_back(f);
    const auto Es = make_samplers(cell.E, order, m, cell.grid, 4);
    std::mt19937_64 rng(seed);
    const FemFunction v = random_test_function(state.mesh(), state.domain(), m, BcKind::Dirichlet, 3, rng);
    const TriMesh& mesh = state.mesh();
    const double eps = state.epsilon();
    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 2, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        thread_local std::vector<double> E;
        if (ws.phi.size() != (kDim + 1) * M) ws = state.workspace();
        const double area = mesh.area(t);
        std::vector<Point> gv(M);
        for (int al = 0; al < m; ++al) gv[static_cast<std::size_t>(al)] = v.gradient(t, al);
        for (const auto& q : rule) {
            const Point x = map_point(mesh, t, q.l);
            state.evaluate(t, q.l, x, ws);
            sample_all(*Es, bilinear(x.x / eps, x.y / eps, (*Es)[0].resolution()), E);
            const double w = q.w * area;
            for (int al = 0; al < m; ++al) {
                const double gi[2] = {gv[static_cast<std::size_t>(al)].x, gv[static_cast<std::size_t>(al)].y};
                for (int i = 0; i < 2; ++i)
                    for (std::size_t k = 0; k < K; ++k)
                        for (int ga = 0; ga < m; ++ga) {
                            const double ph = ws.phi[k * M + static_cast<std::size_t>(ga)];
                            acc[0] += w * ws.b[((static_cast<std::size_t>(i) * K + k) * M + static_cast<std::size_t>(al)) * M +
                                               static_cast<std::size_t>(ga)] *
                                      ph * gi[i];
                            for (int j = 0; j < 2; ++j) {
                                const double e = E[(((static_cast<std::size_t>(j) * 2 + static_cast<std::size_t>(i)) * K + k) * M +
                                                    static_cast<std::size_t>(al)) *
                                                       M +
                                                   static_cast<std::size_t>(ga)];
                                acc[1] += w * eps * e * ws.dphi[(k * M + static_cast<std::size_t>(ga)) * 2 + static_cast<std::size_t>(j)] * gi[i];
                            }
                        }
            }
        }
    });
    AntisymmetryCheck a;
    a.flux_term = sums[0];
    a.corrector_term = sums[1];
    const double d = std::abs(a.flux_term) + std::abs(a.corrector_term);
    a.defect = d > 0.0 ? std::abs(a.flux_term + a.corrector_term) / d : 0.0;
    return a;
}

double w_norm_h1(const TwoScaleState& state) {
    const TriMesh& mesh = state.mesh();
    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 1, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        if (ws.phi.size() != static_cast<std::size_t>((kDim + 1) * state.m())) ws = state.workspace();
        const double area = mesh.area(t);
        for (const auto& q : rule) {
            state.evaluate(t, q.l, map_point(mesh, t, q.l), ws);
            acc[0] += q.w * area * (sumsq(ws.w) + sumsq(ws.dw));
        }
    });
    return std::sqrt(sums[0]);
}

double w_norm_l2(const TwoScaleState& state) {
    const TriMesh& mesh = state.mesh();
    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 1, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace ws;
        if (ws.phi.size() != static_cast<std::size_t>((kDim + 1) * state.m())) ws = state.workspace();
        const double area = mesh.area(t);
        for (const auto& q : rule) {
            state.evaluate(t, q.l, map_point(mesh, t, q.l), ws);
            acc[0] += q.w * area * sumsq(ws.w);
        }
    });
    return std::sqrt(sums[0]);
}

EnergyBound energy_bound(const TwoScaleState& state) {
    const TriMesh& mesh = state.mesh();
    const int m = state.m();
    const auto M = static_cast<std::size_t>(m);
    const double eps = state.epsilon();
    TwoScaleWorkspace ws = state.workspace();
    auto phi_sq = [&](std::size_t t, const std::array<double, 3>& l, Point x) {
        state.evaluate(t, l, x, ws);
        return sumsq(ws.phi);
    };
    const double layer = std::sqrt(integrate(mesh, state.domain(), RegionSpec{Region::Layer, 2.0 * eps, 0}, phi_sq));
    const TriRule& rule = tri_rule_degree4();
    const auto sums = quad_reduce(mesh, 5, [&](std::size_t t, std::vector<double>& acc) {
        thread_local TwoScaleWorkspace tw;
        if (tw.phi.size() != (kDim + 1) * M) tw = state.workspace();
        const double area = mesh.area(t);
        for (const auto& q : rule) {
            state.evaluate(t, q.l, map_point(mesh, t, q.l), tw);
            const double w = q.w * area;
            double g = 0.0, z = 0.0;
            for (std::size_t b = 0; b < M; ++b) {
                for (std::size_t j = 0; j < 2; ++j) {
                    const double d = tw.du0[b * 2 + j] - tw.phi[(j + 1) * M + b];
                    g += d * d;
                }
                const double d0 = tw.u0[b] - tw.phi[b];
                z += d0 * d0;
            }
            acc[0] += w * g;
            acc[1] += w * z;
            acc[2] += w * sumsq(tw.dphi);
            acc[3] += w * sumsq(tw.phi);
            acc[4] += w * (sumsq(tw.w) + sumsq(tw.dw));
        }
    });
    EnergyBound e;
    e.right_side = layer + std::sqrt(sums[0]) + std::sqrt(sums[1]) + eps * std::sqrt(sums[2]) + eps * std::sqrt(sums[3]);
    e.w_h1 = std::sqrt(sums[4]);
    e.constant = e.right_side > 0.0 ? e.w_h1 / e.right_side : 0.0;
    return e;
}

std::string defect_record_json(const std::string& preset, double eps, double h, double defect,
                               const std::vector<std::pair<std::string, double>>& observed_constants) {
    nlohmann::ordered_json j;
    j["preset"] = preset;
    j["eps"] = eps;
    j["h"] = h;
    j["defect"] = defect;
    nlohmann::ordered_json oc = nlohmann::ordered_json::object();
    for (const auto& [k, v] : observed_constants) oc[k] = v;
    j["observed_constants"] = oc;
    return j.dump();
}

}  // namespace homog
