#include "homog/quadrature.hpp"

#include "homog/error.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace homog {

namespace {

TriRule orbit3(double a, double w) {
    const double b = 1.0 - 2.0 * a;
    return {{{b, a, a}, w}, {{a, b, a}, w}, {{a, a, b}, w}};
}

template <int P>
std::vector<LineQuadPoint> gauss_fixed() {
    using G = boost::math::quadrature::gauss<double, P>;
    std::vector<LineQuadPoint> out;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    // Boost stores the nonnegative half of the symmetric rule.
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
            out.push_back({0.5, 0.5 * w[i]});
            continue;
        }
        out.push_back({0.5 * (1.0 - x[i]), 0.5 * w[i]});
        out.push_back({0.5 * (1.0 + x[i]), 0.5 * w[i]});
    }
    return out;
}

}  // namespace

const TriRule& tri_rule_centroid() {
    static const TriRule r{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 1.0}};
    return r;
}

const TriRule& tri_rule_degree2() {
    static const TriRule r = orbit3(1.0 / 6.0, 1.0 / 3.0);
    return r;
}

const TriRule& tri_rule_degree4() {
    static const TriRule r = [] {
        TriRule a = orbit3(0.44594849091596488632, 0.22338158967801146570);
        TriRule b = orbit3(0.091576213509770743460, 0.10995174365532186764);
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }();
    return r;
}

TriRule subdivided_rule(const TriRule& base, int level) {
    // Sub-triangles as barycentric vertex triples.
    using Tri = std::array<std::array<double, 3>, 3>;
    std::vector<Tri> tris{Tri{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
    auto mid = [](const std::array<double, 3>& p, const std::array<double, 3>& q) {
        return std::array<double, 3>{0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])};
    };
    for (int l = 0; l < level; ++l) {
        std::vector<Tri> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const auto m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
            next.push_back({t[0], m01, m20});
            next.push_back({m01, t[1], m12});
            next.push_back({m20, m12, t[2]});
            next.push_back({m01, m12, m20});
        }
        tris.swap(next);
    }
    TriRule out;
    const double scale = 1.0 / static_cast<double>(tris.size());
    for (const auto& t : tris)
        for (const auto& q : base) {
            std::array<double, 3> l{};
            for (int k = 0; k < 3; ++k)
                for (int v = 0; v < 3; ++v) l[static_cast<std::size_t>(k)] += q.l[static_cast<std::size_t>(v)] * t[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)];
            out.push_back({l, q.w * scale});
        }
    return out;
}

std::vector<LineQuadPoint> gauss_line(int points) {
    switch (points) {
        case 1: return {{0.5, 1.0}};
        case 2: return gauss_fixed<2>();
        case 3: return gauss_fixed<3>();
        case 4: return gauss_fixed<4>();
        case 5: return gauss_fixed<5>();
        default: throw ValidationError("unsupported line quadrature order");
    }
}

}  // namespace homog
