// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented below it.
// Usage: acceptance [criterion numbers...] (all twelve when none are given).
// The exit status is nonzero when any selected criterion fails.

#include "homog/cell.hpp"
#include "homog/coefficients.hpp"
#include "homog/domain.hpp"
#include "homog/error.hpp"
#include "homog/fem.hpp"
#include "homog/harness.hpp"
#include "homog/smoothing.hpp"
#include "homog/twoscale.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef HOMOG_CLI_PATH
#define HOMOG_CLI_PATH "homog"
#endif

using namespace homog;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects the detail lines of one criterion and decides its verdict.
class Criterion {
public:
    explicit Criterion(std::string title) : title_(std::move(title)) {}

    void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
        char buf[512];
        va_list args;
        va_start(args, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, args);
        va_end(args);
        lines_.push_back(std::string(ok ? "    ok    " : "    FAIL  ") + buf);
        passed_ = passed_ && ok;
    }

    void note(const char* fmt, ...) __attribute__((format(printf, 2, 3))) {
        char buf[512];
        va_list args;
        va_start(args, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, args);
        va_end(args);
        lines_.push_back(std::string("    note  ") + buf);
    }

    void error(const std::string& what) {
        lines_.push_back("    error " + what);
        passed_ = false;
    }

    bool report(int number) const {
        std::printf("%s criterion %2d: %s\n", passed_ ? "PASS" : "FAIL", number, title_.c_str());
        for (const auto& l : lines_) std::printf("%s\n", l.c_str());
        std::fflush(stdout);
        return passed_;
    }

private:
    std::string title_;
    std::vector<std::string> lines_;
    bool passed_ = true;
};

CellGrid grid_n(int n) {
    CellGrid g;
    g.N = n;
    return g;
}

VectorFunction constant_vector(int m, double v) { return constant_function(std::vector<double>(static_cast<std::size_t>(m), v)); }

// --- 1 -------------------------------------------------------------------------------------

void effective_coefficients(Criterion& c) {
    const auto t0 = Clock::now();
    const CoefficientSet lam = preset("laminate");
    const CellData cell = build_cell_data(lam, grid_n(128));
    const double t = seconds_since(t0);
    const double a11 = cell.hats.a(0, 0, 0, 0);
    const double a22 = cell.hats.a(1, 1, 0, 0);
    // Harmonic mean of 2 + sin(2 pi y) across the layers, arithmetic mean along them.
    c.check(std::abs(a11 - std::sqrt(3.0)) <= 1e-6, "a11 = %.12f, |a11 - sqrt(3)| = %.2e (limit 1e-6)", a11, std::abs(a11 - std::sqrt(3.0)));
    c.check(std::abs(a22 - 2.0) <= 1e-6, "a22 = %.12f, |a22 - 2| = %.2e (limit 1e-6)", a22, std::abs(a22 - 2.0));
    c.check(t < 5.0, "cell solve time %.2f s (limit 5 s)", t);
}

// --- 2 -------------------------------------------------------------------------------------

void cell_invariants(Criterion& c) {
    for (const char* preset_name : {"laminate", "laminate-b", "smooth-trig", "random-trig"}) {
        const std::string name = preset_name;
        const auto t0 = Clock::now();
        const CellData cell = build_cell_data(preset(name, 1), grid_n(128));
        const CellInvariants inv = check_invariants(cell);
        const double mean = std::max({inv.max_mean_chi, inv.max_mean_chi_star, inv.max_mean_theta, inv.max_mean_Pi, inv.max_mean_b,
                                      inv.max_mean_W});
        c.check(mean <= 1e-10, "%-12s mean-zero of chi, theta, Pi, b, W: %.2e (limit 1e-10)", name.c_str(), mean);
        c.check(inv.antisymmetry == 0.0, "%-12s max |E_jik + E_ijk| = %.2e (exact)", name.c_str(), inv.antisymmetry);
        c.check(inv.flux_residual <= 1e-8, "%-12s || d_j E_jik - b_ik || relative %.2e (limit 1e-8)", name.c_str(), inv.flux_residual);
        c.check(inv.divergence_b <= 1e-8, "%-12s || d_i b_ik || relative %.2e (limit 1e-8)", name.c_str(), inv.divergence_b);
        const double t = seconds_since(t0);
        c.check(t < 10.0, "%-12s construction and checks in %.2f s (limit 10 s)", name.c_str(), t);
    }
}

// --- 3 and 4 -------------------------------------------------------------------------------

ProblemData neumann_data(int m, const std::string& F, const std::string& flux) {
    ProblemData d;
    d.bc = BcKind::Neumann;
    d.F = expression_function(std::vector<std::string>(static_cast<std::size_t>(m), F));
    d.flux = expression_function(std::vector<std::string>(static_cast<std::size_t>(m), flux));
    return d;
}

void adjoint_green(Criterion& c) {
    const auto t0 = Clock::now();
    const CoefficientSet st = preset("smooth-trig", 1);
    const TriMesh mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 64);
    const OscillatingCoefficients osc(st, 1.0 / 8);
    const IdentityCheck adj = adjoint_check(osc, mesh, 1);
    c.check(adj.defect <= 1e-10, "adjoint identity B[u,v] = B*[v,u]: relative defect %.2e (limit 1e-10)", adj.defect);

    SolveOptions tight;
    tight.tol = 1e-13;
    const ProblemData du = neumann_data(st.m, "1+x1*x2", "x1-0.3");
    const ProblemData dv = neumann_data(st.m, "cos(x2)", "0.7");
    const FemFunction u = solve(assemble(osc, mesh, du), tight);
    AssembleOptions ao;
    ao.adjoint = true;
    const FemFunction v = solve(assemble(osc, mesh, dv, ao), tight);
    const IdentityCheck g = green_check(du, u, dv, v);
    c.check(g.defect <= 1e-10, "Green identity: relative defect %.2e (limit 1e-10)", g.defect);
    const double t = seconds_since(t0);
    c.check(t < 30.0, "elapsed %.2f s (limit 30 s)", t);
}

void neumann_compatibility(Criterion& c) {
    const TriMesh mesh = triangulate(PolygonDomain::from_name("square"), 1.0 / 64);
    SolveOptions tight;
    tight.tol = 1e-13;
    for (const auto& name : preset_names()) {
        const CoefficientSet s = preset(name, 1);
        const OscillatingCoefficients osc(s, 1.0 / 8);
        const ProblemData d = neumann_data(s.m, "1+x1*x2", "x1-0.3");
        const FemFunction u = solve(assemble(osc, mesh, d), tight);
        const IdentityCheck ch = compatibility_check(osc, d, u);
        c.check(ch.defect <= 1e-8, "%-12s post-solve compatibility defect %.2e (limit 1e-8)", name.c_str(), ch.defect);
    }
}

// --- 5 -------------------------------------------------------------------------------------

void within_factor_two(Criterion& c, const char* what, const std::string& dom, double a, double b) {
    const bool finite = std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0;
    const double r = finite ? b / a : std::numeric_limits<double>::quiet_NaN();
    c.check(finite && r >= 0.5 && r <= 2.0, "%-8s %-34s %.4e -> %.4e (ratio %.3f, allowed [0.5, 2])", dom.c_str(), what, a, b, r);
}

void smoothing_bounds(Criterion& c) {
    for (const char* domain_name : {"square", "L-shape"}) {
        const std::string dn = domain_name;
        const PolygonDomain dom = PolygonDomain::from_name(dn);
        const WeightedBoundsReport r16 = verify_weighted_bounds(dom, 1.0 / 16, 2000, 1, {}, false);
        const WeightedBoundsReport r32 = verify_weighted_bounds(dom, 1.0 / 32, 2000, 1, {}, false);
        for (const auto* r : {&r16, &r32}) {
            c.check(r->max_ratio_delta <= 2.0 + 1e-6, "%-8s eps=1/%g  max S(delta)/delta = %.6f (limit 2 + 1e-6)", dn.c_str(), 1.0 / r->eps,
                    r->max_ratio_delta);
            c.check(r->max_ratio_inv_delta <= 2.0 + 1e-6, "%-8s eps=1/%g  max delta S(1/delta) = %.6f (limit 2 + 1e-6)", dn.c_str(),
                    1.0 / r->eps, r->max_ratio_inv_delta);
            if (r->outside_layer_range) c.note("%-8s eps=1/%g lies outside eps < c0/4; checked anyway", dn.c_str(), 1.0 / r->eps);
        }
        within_factor_two(c, "commutator constant", dn, r16.commutator_constant, r32.commutator_constant);
        const std::size_t np = std::min(r16.products.size(), r32.products.size());
        for (std::size_t i = 0; i < np; ++i) {
            const std::string g = "g=" + r16.products[i].g;
            within_factor_two(c, ("product " + g).c_str(), dn, r16.products[i].c_plain, r32.products[i].c_plain);
            within_factor_two(c, ("product weight 1/delta " + g).c_str(), dn, r16.products[i].c_inv, r32.products[i].c_inv);
            within_factor_two(c, ("product weight delta " + g).c_str(), dn, r16.products[i].c_delta, r32.products[i].c_delta);
        }
        c.note("%-8s observed L^4/3 -> L^2 gain constants %.4e, %.4e", dn.c_str(), r16.lq_gain_constant, r32.lq_gain_constant);
    }
}

// --- 6 and 7 -------------------------------------------------------------------------------

struct IdentityRun {
    double h = 0.0;
    WeakIdentityReport weak;
    DualityResult dual;
    double seconds = 0.0;
};

std::vector<IdentityRun> identity_runs() {
    static std::vector<IdentityRun> runs;
    if (!runs.empty()) return runs;
    const double eps = 1.0 / 8;
    const CoefficientSet lam = preset("laminate");
    const CellData cell = build_cell_data(lam, grid_n(128));
    const PolygonDomain dom = PolygonDomain::from_name("square");
    for (double ratio : {32.0, 64.0}) {
        IdentityRun run;
        const auto t0 = Clock::now();
        run.h = eps / ratio;
        const TriMesh mesh = triangulate(dom, run.h);
        const ProblemData data = make_problem_data(DataSpec{}, dom, lam.m, BcKind::Dirichlet);
        const FemFunction ue = solve(assemble(OscillatingCoefficients(lam, eps), mesh, data));
        const FemFunction u0 = solve(assemble(ConstantCoefficients(cell.hats), mesh, data));
        // The 4 eps cutoff of the H1 variant vanishes identically on the unit square at eps = 1/8,
        // so the identities are exercised with the L2 variant, whose corrector is nonzero there.
        const TwoScaleState st = build_w(ue, u0, cell, lam, dom, eps, TwoScaleVariant::l2_corrector());
        run.weak = check_weak_identity(st);
        const VectorFunction one = constant_vector(lam.m, 1.0);
        run.dual = duality_pairing(st, solve_adjoint(st, one), one);
        run.seconds = seconds_since(t0);
        runs.push_back(run);
    }
    return runs;
}

void weak_identity(Criterion& c) {
    const auto runs = identity_runs();
    const auto& a = runs[0];
    const auto& b = runs[1];
    c.check(a.weak.max_relative_defect <= 1e-2, "laminate eps=1/8 h=eps/32: max relative defect %.3e (limit 1e-2)",
            a.weak.max_relative_defect);
    const double ratio = a.weak.max_relative_defect / b.weak.max_relative_defect;
    c.check(std::abs(ratio - 2.0) <= 0.5, "h=eps/64: defect %.3e, refinement ratio %.3f (required 2 +- 0.5)", b.weak.max_relative_defect,
            ratio);
    c.note("random-test defects %.3e -> %.3e, worst-case (dual norm) %.3e -> %.3e", a.weak.max_random_defect, b.weak.max_random_defect,
           a.weak.dual_norm_defect, b.weak.dual_norm_defect);
    c.check(a.seconds < 300.0, "h=eps/32 run took %.1f s (limit 300 s)", a.seconds);
}

void duality_identity(Criterion& c) {
    const auto runs = identity_runs();
    const auto& a = runs[0];
    const auto& b = runs[1];
    c.check(a.dual.defect <= 1e-2, "laminate eps=1/8 h=eps/32: relative defect %.3e (lhs %.6e, rhs %.6e; limit 1e-2)", a.dual.defect,
            a.dual.lhs, a.dual.rhs);
    const double ratio = a.dual.defect / b.dual.defect;
    c.check(b.dual.defect <= 0.5 * a.dual.defect, "h=eps/64: defect %.3e, refinement ratio %.3f (required >= 2)", b.dual.defect, ratio);
}

// --- 8, 9 and 10 ---------------------------------------------------------------------------

struct SweepCase {
    std::string preset;
    BcKind bc;
    std::string label() const { return preset + (bc == BcKind::Dirichlet ? "/dirichlet" : "/neumann"); }
};

const std::vector<SweepCase>& sweep_cases() {
    static const std::vector<SweepCase> cases{{"laminate", BcKind::Dirichlet},
                                              {"smooth-trig", BcKind::Dirichlet},
                                              {"laminate", BcKind::Neumann},
                                              {"smooth-trig", BcKind::Neumann}};
    return cases;
}

const std::map<std::string, RateReport>& sweeps() {
    static std::map<std::string, RateReport> reports;
    if (!reports.empty()) return reports;
    for (const auto& sc : sweep_cases()) {
        ExperimentPlan plan;
        plan.preset = sc.preset;
        plan.bc = sc.bc;
        const auto t0 = Clock::now();
        reports.emplace(sc.label(), run_plan(plan));
        std::printf("  [sweep %s finished in %.1f s]\n", sc.label().c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return reports;
}

bool rows_ok(Criterion& c, const std::string& label, const RateReport& rep) {
    bool ok = true;
    for (const auto& r : rep.rows)
        if (!r.ok) {
            c.error(label + ": " + r.error);
            ok = false;
        }
    return ok;
}

void h1_rate(Criterion& c) {
    for (const auto& [label, rep] : sweeps()) {
        if (!rows_ok(c, label, rep)) continue;
        const MetricFits& f = rep.fit("h1_w");
        if (!f.power) {
            c.error(label + ": no power fit for h1_w");
            continue;
        }
        c.check(f.power->slope >= 0.35 && f.power->slope <= 0.7, "%-22s ||w||_H1 slope %.3f, 95%% CI [%.3f, %.3f] (required [0.35, 0.7])",
                label.c_str(), f.power->slope, f.power->ci_low, f.power->ci_high);
        std::string vals;
        for (const auto& r : rep.rows) vals += " " + std::to_string(r.h1_w);
        c.note("%-22s ||w||_H1 values:%s", label.c_str(), vals.c_str());
        if (rep.rows.size() >= 2) {
            const auto& r1 = rep.rows[rep.rows.size() - 2];
            const auto& r2 = rep.rows.back();
            c.note("%-22s local slope of the finest pair %.3f", label.c_str(), std::log(r1.h1_w / r2.h1_w) / std::log(r1.eps / r2.eps));
        }
        if (rep.richardson) {
            c.check(rep.richardson->pollution_h1_w <= 0.2, "%-22s Richardson pollution of ||w||_H1 %.2f%% (limit 20%%)", label.c_str(),
                    100.0 * rep.richardson->pollution_h1_w);
            c.check(rep.richardson->pollution_l2 <= 0.2, "%-22s Richardson pollution of the L2 error %.2f%% (limit 20%%)", label.c_str(),
                    100.0 * rep.richardson->pollution_l2);
        } else {
            c.error(label + ": Richardson pair missing");
        }
    }
}

void l2_rate(Criterion& c) {
    for (const auto& [label, rep] : sweeps()) {
        if (!rows_ok(c, label, rep)) continue;
        const MetricFits& f = rep.fit("l2");
        if (!f.power) {
            c.error(label + ": no power fit for l2");
            continue;
        }
        c.check(f.power->slope >= 0.85, "%-22s ||u_eps - u0||_L2 slope %.3f, 95%% CI [%.3f, %.3f] (required >= 0.85)", label.c_str(),
                f.power->slope, f.power->ci_low, f.power->ci_high);
        // The layer constant c0 lies below the largest eps values, where eps ln(c0/eps) is not
        // positive; the logarithmic model is therefore evaluated with the domain diameter.
        const std::optional<FitResult>& lg = f.log_c0 ? f.log_c0 : f.log_r0;
        if (!lg) {
            c.error(label + ": no logarithmic fit");
            continue;
        }
        c.check(lg->residual <= 1.5 * f.power->residual,
                "%-22s log model eps ln(%.4g/eps): residual %.3e vs power residual %.3e (limit x1.5)", label.c_str(), lg->log_constant,
                lg->residual, f.power->residual);
        for (const auto& n : f.notes) c.note("%-22s %s", label.c_str(), n.c_str());
    }
}

void lp_rate(Criterion& c) {
    const double p = ExperimentPlan::lp_exponent(2);
    for (const auto& [label, rep] : sweeps()) {
        if (label.rfind("smooth-trig", 0) != 0) continue;
        if (!rows_ok(c, label, rep)) continue;
        const MetricFits& f = rep.fit("lp");
        if (!f.power) {
            c.error(label + ": no power fit for lp");
            continue;
        }
        c.check(f.power->slope >= 0.85, "%-22s ||u_eps - u0||_L%g slope %.3f, 95%% CI [%.3f, %.3f] (required >= 0.85)", label.c_str(), p,
                f.power->slope, f.power->ci_low, f.power->ci_high);
    }
}

// --- 11 ------------------------------------------------------------------------------------

void layer_study(Criterion& c) {
    const LayerReport rep = run_layer_study(LayerPlan{});
    c.check(std::abs(rep.layer.slope - 0.5) <= 0.15, "L-shape ||u0||_H1(layer t) slope %.3f (required 0.5 +- 0.15)", rep.layer.slope);
    c.check(std::abs(rep.colayer.slope + 0.5) <= 0.2, "L-shape ||grad^2 u0||_L2(co-layer t) slope %.3f (required -0.5 +- 0.2)",
            rep.colayer.slope);
    c.check(std::abs(rep.weighted.slope - 1.0) <= 0.2, "L-shape weighted layer norm slope %.3f (required 1.0 +- 0.2)", rep.weighted.slope);
    for (const auto& r : rep.rows)
        c.note("t=1/%-4g layer %.4e  weighted %.4e  co-layer %.4e", 1.0 / r.t, r.layer_h1, r.weighted_layer_h1, r.colayer);
}

// --- 12 ------------------------------------------------------------------------------------

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ResourceError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void determinism(Criterion& c) {
    const auto base = std::filesystem::temp_directory_path() / ("homog_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(base);
    const auto cfg = base / "rates.ini";
    {
        std::ofstream os(cfg);
        os << "[problem]\npreset = random-trig\n\n[run]\nseed = 7\n\n[rates]\neps_list = 1/8, 1/16, 1/32\nh_ratio = 16\nrichardson = false\n";
    }
    std::vector<std::string> csv;
    for (int i = 0; i < 2; ++i) {
        const auto out = base / ("run" + std::to_string(i));
        const std::string cmd =
            std::string("\"") + HOMOG_CLI_PATH + "\" rates --config \"" + cfg.string() + "\" --out \"" + out.string() + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        c.check(rc == 0, "run %d of `homog rates` exit status %d", i + 1, rc);
        csv.push_back(rc == 0 ? read_bytes(out / "rates.csv") : std::string());
    }
    c.check(!csv[0].empty() && csv[0] == csv[1], "rates.csv of both runs byte-identical (%zu bytes)", csv[0].size());
    std::filesystem::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
    struct Entry {
        const char* title;
        std::function<void(Criterion&)> run;
    };
    const std::vector<Entry> entries{
        {"effective coefficients of the laminate", effective_coefficients},
        {"cell-structure invariants", cell_invariants},
        {"discrete adjoint and Green identities", adjoint_green},
        {"Neumann compatibility on all presets", neumann_compatibility},
        {"smoothing bounds and weighted constants", smoothing_bounds},
        {"weak identity of the two-scale approximant", weak_identity},
        {"duality identity", duality_identity},
        {"H1 rate of the two-scale approximant", h1_rate},
        {"L2 rate", l2_rate},
        {"L4 rate", lp_rate},
        {"layer and co-layer estimates", layer_study},
        {"determinism of rates.csv", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (k < 1 || k > static_cast<int>(entries.size())) {
            std::fprintf(stderr, "unknown criterion '%s' (expected 1..%zu)\n", argv[i], entries.size());
            return 2;
        }
        selected.insert(k);
    }
    int failed = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const int k = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(k)) continue;
        Criterion c(entries[i].title);
        const auto t0 = Clock::now();
        try {
            entries[i].run(c);
        } catch (const std::exception& e) {
            c.error(e.what());
        }
        c.note("criterion time %.1f s", seconds_since(t0));
        if (!c.report(k)) ++failed;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
