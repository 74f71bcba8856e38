#include "homog/norms.hpp"

#include "homog/error.hpp"

#include <cmath>

namespace homog {

double integrate(const TriMesh& mesh, const PolygonDomain& domain, const RegionSpec& spec, const Integrand& f, int degree) {
    if (spec.region == Region::Layer && spec.weight_power < 0)
        throw ValidationError("the weight 1/delta is not integrable on the boundary layer");
    if (spec.weight_power < -1 || spec.weight_power > 1) throw ValidationError("weight power must be -1, 0 or 1");
    if (spec.region != Region::All && !(spec.r > 0.0)) throw ValidationError("layer radius must be positive");
    const TriRule& rule = degree == 2 ? tri_rule_degree2() : tri_rule_degree4();
    static const TriRule fine_rule = subdivided_rule(tri_rule_degree2(), 3);
    std::vector<LayerTag> tags;
    if (spec.region != Region::All) tags = layer_mask(mesh, domain, spec.r);

    auto in_region = [&](double delta) { return spec.region == Region::Inside ? delta >= spec.r : delta < spec.r; };
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.num_tris(); ++t) {
        const TriRule* R = &rule;
        bool classify = false;
        if (spec.region != Region::All) {
            const LayerTag tag = tags[t];
            if (tag == LayerTag::Cut) {
                R = &fine_rule;
                classify = true;
            } else if ((tag == LayerTag::Inside) != (spec.region == Region::Inside)) {
                continue;
            }
        }
        const double area = mesh.area(t);
        double s = 0.0;
        for (const auto& q : *R) {
            const Point x = map_point(mesh, t, q.l);
            double w = q.w;
            if (classify || spec.weight_power != 0) {
                const double delta = domain.distance(x);
                if (classify && !in_region(delta)) continue;
                if (spec.weight_power == 1) w *= delta;
                if (spec.weight_power == -1) w /= delta;
            }
            s += w * f(t, q.l, x);
        }
        total += area * s;
    }
    return total;
}

double region_area(const TriMesh& mesh, const PolygonDomain& domain, const RegionSpec& spec) {
    return integrate(mesh, domain, spec, [](std::size_t, const std::array<double, 3>&, Point) { return 1.0; }, 2);
}

double norm(const FemFunction& u, const PolygonDomain& domain, const NormSpec& spec) {
    const int m = u.m;
    const bool grads = spec.kind == NormKind::H1 || spec.kind == NormKind::H1Semi;
    const bool values = spec.kind != NormKind::H1Semi;
    const double p = spec.kind == NormKind::Lp ? spec.p : 2.0;
    if (!(p >= 1.0)) throw ValidationError("Lp norm needs p >= 1");
    std::size_t cached_t = static_cast<std::size_t>(-1);
    double grad_sq = 0.0;
    auto f = [&](std::size_t t, const std::array<double, 3>& l, Point) {
        double s = 0.0;
        if (values) {
            double v2 = 0.0;
            for (int a = 0; a < m; ++a) {
                const double v = u.eval(t, l, a);
                v2 += v * v;
            }
            s += p == 2.0 ? v2 : std::pow(v2, 0.5 * p);
        }
        if (grads) {
            if (t != cached_t) {
                grad_sq = 0.0;
                for (int a = 0; a < m; ++a) {
                    const Point g = u.gradient(t, a);
                    grad_sq += g.x * g.x + g.y * g.y;
                }
                cached_t = t;
            }
            s += grad_sq;
        }
        return s;
    };
    const double I = integrate(*u.mesh, domain, spec.region, f, 4);
    return std::pow(std::max(I, 0.0), 1.0 / p);
}

double norm_l2(const FemFunction& u, const PolygonDomain& domain) { return norm(u, domain, {NormKind::L2, 2.0, {}}); }
double norm_lp(const FemFunction& u, const PolygonDomain& domain, double p) { return norm(u, domain, {NormKind::Lp, p, {}}); }
double norm_h1(const FemFunction& u, const PolygonDomain& domain) { return norm(u, domain, {NormKind::H1, 2.0, {}}); }

}  // namespace homog
