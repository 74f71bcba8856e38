#include "homog/harness.hpp"

#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "homog/parallel.hpp"
#include "homog/recovery.hpp"
#include "homog/smoothing.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace homog {

namespace {

using ojson = nlohmann::ordered_json;

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

double point_segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - a.x - t * dx, p.y - a.y - t * dy);
}

// Singular function r^(pi/omega) sin(pi theta/omega) at the first reflex vertex, with theta
// measured counterclockwise from the edge towards the next vertex.
VectorFunction corner_function(const PolygonDomain& domain, int m) {
    const auto& v = domain.vertices();
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point p = v[(i + n - 1) % n], c = v[i], q = v[(i + 1) % n];
        const double cross = (c.x - p.x) * (q.y - c.y) - (c.y - p.y) * (q.x - c.x);
        if (cross >= 0.0) continue;
        const double start = std::atan2(q.y - c.y, q.x - c.x);
        const double back = std::atan2(p.y - c.y, p.x - c.x);
        double omega = back - start;
        while (omega <= 0.0) omega += 2.0 * std::numbers::pi;
        const double alpha = std::numbers::pi / omega;
        return [c, start, omega, alpha, m](Point x, double* out) {
            const double r = std::hypot(x.x - c.x, x.y - c.y);
            double theta = std::atan2(x.y - c.y, x.x - c.x) - start;
            while (theta < 0.0) theta += 2.0 * std::numbers::pi;
            theta = std::min(theta, omega);
            const double val = r > 0.0 ? std::pow(r, alpha) * std::sin(alpha * theta) : 0.0;
            for (int a = 0; a < m; ++a) out[a] = val;
        };
    }
    throw ValidationError("corner data needs a polygon with a reflex vertex");
}

std::vector<std::string> per_component(const std::vector<std::string>& exprs, int m, const char* what) {
    if (exprs.size() == 1) return std::vector<std::string>(static_cast<std::size_t>(m), exprs[0]);
    if (exprs.size() != static_cast<std::size_t>(m))
        throw ValidationError(std::string(what) + " needs one expression or one per component");
    return exprs;
}

std::vector<std::string> split_expressions(const std::string& text) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(";"));
    std::vector<std::string> out;
    for (auto& p : parts) {
        boost::algorithm::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

bool has_custom_coefficients(const Config& cfg) {
    for (const char* s : {"A", "V", "B", "c"})
        if (!cfg.keys(s).empty()) return true;
    return !cfg.has("problem.preset") || cfg.has("problem.lambda") || cfg.has("problem.kappa");
}

CellGrid cell_grid(int N) {
    CellGrid g;
    g.dim = 2;
    g.N = N;
    g.check();
    return g;
}

FemFunction difference(const FemFunction& a, const FemFunction& b) {
    FemFunction d = a;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
    return d;
}

RateRow compute_row(const ExperimentPlan& plan, const CoefficientSet& coeffs, const CellData& cell, const PolygonDomain& dom,
                    double eps, double h) {
    RateRow r;
    r.eps = eps;
    r.h = h;
    const TriMesh mesh = triangulate(dom, h);
    const ProblemData data = make_problem_data(plan.data, dom, coeffs.m, plan.bc);
    const OscillatingCoefficients osc(coeffs, eps);
    const FemFunction ue = solve(assemble(osc, mesh, data));
    const ConstantCoefficients hom(cell.hats);
    const FemFunction u0 = solve(assemble(hom, mesh, data));
    const FemFunction d = difference(ue, u0);
    r.l2 = norm_l2(d, dom);
    r.lp = norm_lp(d, dom, ExperimentPlan::lp_exponent(2));
    r.u0_l2 = norm_l2(u0, dom);
    NormSpec layer;
    layer.kind = NormKind::H1;
    layer.region = {Region::Layer, eps, 0};
    r.layer_h1 = norm(u0, dom, layer);
    layer.region.weight_power = 1;
    r.weighted_layer_h1 = norm(u0, dom, layer);
    const TwoScaleState st = build_w(ue, u0, cell, coeffs, dom, eps, plan.variant);
    r.h1_w = w_norm_h1(st);
    r.ok = true;
    return r;
}

ojson fit_json(const std::optional<FitResult>& f) {
    if (!f) return nullptr;
    ojson j;
    j["model"] = f->model == RateModel::Power ? "power" : "power_log";
    j["slope"] = f->slope;
    j["coefficient"] = f->coefficient;
    j["ci95"] = {f->ci_low, f->ci_high};
    j["residual"] = f->residual;
    j["n"] = f->n;
    if (f->model == RateModel::PowerLog) j["log_constant"] = f->log_constant;
    return j;
}

ojson row_json(const RateRow& r) {
    ojson j;
    j["eps"] = r.eps;
    j["h"] = r.h;
    j["ok"] = r.ok;
    if (r.ok) {
        j["l2"] = r.l2;
        j["lp"] = r.lp;
        j["h1_w"] = r.h1_w;
        j["layer_h1"] = r.layer_h1;
        j["weighted_layer_h1"] = r.weighted_layer_h1;
        j["u0_l2"] = r.u0_l2;
    } else {
        j["error"] = r.error;
    }
    return j;
}

double metric_value(const RateRow& r, const std::string& metric) {
    if (metric == "l2") return r.l2;
    if (metric == "lp") return r.lp;
    if (metric == "h1_w") return r.h1_w;
    if (metric == "layer_h1") return r.layer_h1;
    if (metric == "weighted_layer_h1") return r.weighted_layer_h1;
    throw ValidationError("unknown metric '" + metric + "'");
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"l2", "lp", "h1_w", "layer_h1", "weighted_layer_h1"};
    return names;
}

std::string bc_name(BcKind bc) { return bc == BcKind::Dirichlet ? "dirichlet" : "neumann"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ResourceError("cannot write " + path.string());
    os << text;
    if (!os) throw ResourceError("failed writing " + path.string());
}

}  // namespace

ProblemData make_problem_data(const DataSpec& spec, const PolygonDomain& domain, int m, BcKind bc) {
    ProblemData d;
    d.bc = bc;
    if (!spec.F.empty()) d.F = expression_function(per_component(spec.F, m, "load"));
    if (bc == BcKind::Dirichlet) {
        if (spec.g.size() == 1 && spec.g[0] == "corner")
            d.g = corner_function(domain, m);
        else if (!spec.g.empty())
            d.g = expression_function(per_component(spec.g, m, "Dirichlet data"));
        return d;
    }
    const auto& v = domain.vertices();
    if (spec.flux.empty()) return d;
    if (spec.flux.size() != v.size()) throw ValidationError("Neumann flux needs one value per polygon edge");
    d.flux = [v, values = spec.flux, m](Point p, double* out) {
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < v.size(); ++e) {
            const double de = point_segment_distance(p, v[e], v[(e + 1) % v.size()]);
            if (de < dist) {
                dist = de;
                best = e;
            }
        }
        for (int a = 0; a < m; ++a) out[a] = values[best];
    };
    return d;
}

CoefficientSet ExperimentPlan::coefficients() const { return custom ? *custom : homog::preset(preset, seed); }

void ExperimentPlan::validate() const {
    if (eps_list.empty()) throw ValidationError("plan needs at least one eps");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ValidationError("eps values must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ValidationError("eps list must be strictly decreasing");
    }
    if (h_ratio < 16.0) throw ValidationError("mesh rule must keep eps/h >= 16");
    if (workers < 1) throw ValidationError("worker count must be positive");
    const CoefficientSet c = coefficients();
    if (c.dim != 2) throw ValidationError("rate experiments run in two dimensions");
    const Lambda0Estimate est = estimate_lambda0(c, seed);
    if (c.lambda < est.lambda0)
        throw ValidationError("lambda = " + std::to_string(c.lambda) + " is below the coercivity threshold " + std::to_string(est.lambda0));
}

ExperimentPlan plan_from_config(const Config& cfg) {
    ExperimentPlan p;
    p.preset = cfg.get_string("problem.preset", p.preset);
    p.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", cfg.get_int("problem.seed", static_cast<long long>(p.seed))));
    if (has_custom_coefficients(cfg)) {
        Config c = cfg;
        c.set("problem.seed", std::to_string(p.seed));
        p.custom = coefficients_from_config(c);
    }
    p.domain = cfg.get_string("domain.name", p.domain);
    const std::string bc = boost::algorithm::to_lower_copy(cfg.get_string("rates.bc", "dirichlet"));
    if (bc == "dirichlet")
        p.bc = BcKind::Dirichlet;
    else if (bc == "neumann")
        p.bc = BcKind::Neumann;
    else
        throw ConfigError("rates.bc must be dirichlet or neumann");
    p.eps_list = cfg.get_list("rates.eps_list", p.eps_list);
    p.h_ratio = cfg.get_double("rates.h_ratio", p.h_ratio);
    if (auto F = cfg.get("rates.F")) p.data.F = split_expressions(*F);
    if (auto g = cfg.get("rates.g")) p.data.g = split_expressions(*g);
    p.data.flux = cfg.get_list("rates.flux", p.data.flux);
    const std::string variant = cfg.get_string("rates.variant", "h1");
    if (variant == "h1")
        p.variant = TwoScaleVariant::h1_corrector();
    else if (variant == "l2")
        p.variant = TwoScaleVariant::l2_corrector();
    else
        throw ConfigError("rates.variant must be h1 or l2");
    p.cell_N = static_cast<int>(cfg.get_int("grid.N", p.cell_N));
    p.richardson = cfg.get_bool("rates.richardson", p.richardson);
    p.workers = static_cast<int>(cfg.get_int("run.workers", p.workers));
    return p;
}

FitResult fit_rate(const std::vector<double>& eps, const std::vector<double>& err, RateModel model, double log_constant) {
    if (eps.size() != err.size()) throw ValidationError("fit_rate: eps and error lists differ in length");
    const std::size_t n = eps.size();
    if (n < 3) throw ValidationError("fit_rate needs at least three rows");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(err[i] > 0.0) || !std::isfinite(err[i])) throw ValidationError("fit_rate: error values must be positive");
        if (!(eps[i] > 0.0)) throw ValidationError("fit_rate: eps values must be positive");
    }
    FitResult f;
    f.model = model;
    f.n = static_cast<int>(n);
    const double N = static_cast<double>(n);
    if (model == RateModel::Power) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += std::log(eps[i]);
            my += std::log(err[i]);
        }
        mx /= N;
        my /= N;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = std::log(eps[i]) - mx;
            sxx += dx * dx;
            sxy += dx * (std::log(err[i]) - my);
        }
        if (sxx <= 0.0) throw ValidationError("fit_rate needs distinct eps values");
        f.slope = sxy / sxx;
        const double a = my - f.slope * mx;
        f.coefficient = std::exp(a);
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = std::log(err[i]) - a - f.slope * std::log(eps[i]);
            ssr += r * r;
        }
        f.residual = std::sqrt(ssr / N);
        const boost::math::students_t dist(N - 2.0);
        const double tq = boost::math::quantile(dist, 0.975);
        const double se = std::sqrt(ssr / (N - 2.0) / sxx);
        f.ci_low = f.slope - tq * se;
        f.ci_high = f.slope + tq * se;
        return f;
    }
    f.log_constant = log_constant;
    f.slope = 1.0;
    std::vector<double> y(n);
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eps[i] < log_constant))
            throw ValidationError("fit_rate: the logarithmic model needs eps < " + format_number(log_constant));
        y[i] = std::log(err[i]) - std::log(eps[i] * std::log(log_constant / eps[i]));
        my += y[i];
    }
    my /= N;
    double ssr = 0.0;
    for (double v : y) ssr += (v - my) * (v - my);
    f.coefficient = std::exp(my);
    f.residual = std::sqrt(ssr / N);
    const boost::math::students_t dist(N - 1.0);
    const double half = boost::math::quantile(dist, 0.975) * std::sqrt(ssr / (N - 1.0) / N);
    f.ci_low = std::exp(my - half);
    f.ci_high = std::exp(my + half);
    return f;
}

std::vector<MetricFits> fit_rows(const std::vector<RateRow>& rows, double c0, double r0) {
    std::vector<MetricFits> out;
    for (const auto& metric : metric_names()) {
        MetricFits mf;
        mf.metric = metric;
        std::vector<double> e, v;
        bool all_tiny = true;
        for (const auto& r : rows) {
            if (!r.ok) continue;
            const double val = metric_value(r, metric);
            e.push_back(r.eps);
            v.push_back(val);
            if (std::abs(val) > 1e-8 * std::max(1.0, r.u0_l2)) all_tiny = false;
        }
        if (e.size() < 3) {
            mf.notes.push_back("fewer than three completed rows");
            out.push_back(std::move(mf));
            continue;
        }
        if (all_tiny) {
            mf.degenerate = true;
            mf.notes.push_back("degenerate: every row is at solver-tolerance level");
            out.push_back(std::move(mf));
            continue;
        }
        try {
            mf.power = fit_rate(e, v, RateModel::Power);
        } catch (const ValidationError& ex) {
            mf.notes.push_back(std::string("power fit: ") + ex.what());
        }
        auto log_fit = [&](double c, const char* label, std::optional<FitResult>& target) {
            std::vector<double> es, vs;
            for (std::size_t i = 0; i < e.size(); ++i)
                if (e[i] < c) {
                    es.push_back(e[i]);
                    vs.push_back(v[i]);
                }
            if (es.size() < e.size())
                mf.notes.push_back(std::string("log model with ") + label + " = " + format_number(c) + " is undefined for " +
                                   std::to_string(e.size() - es.size()) + " rows with eps >= " + label);
            if (es.size() < 3) {
                mf.notes.push_back(std::string("log model with ") + label + " not fitted: fewer than three admissible rows");
                return;
            }
            try {
                target = fit_rate(es, vs, RateModel::PowerLog, c);
            } catch (const ValidationError& ex) {
                mf.notes.push_back(std::string("log fit: ") + ex.what());
            }
        };
        log_fit(c0, "c0", mf.log_c0);
        log_fit(r0, "r0", mf.log_r0);
        out.push_back(std::move(mf));
    }
    return out;
}

const MetricFits& RateReport::fit(const std::string& metric) const {
    for (const auto& f : fits)
        if (f.metric == metric) return f;
    throw ValidationError("no fit recorded for metric '" + metric + "'");
}

std::string RateReport::csv() const {
    std::string s = "eps,l2,lp,h1_w,layer_h1,weighted_layer_h1,h,status\n";
    for (const auto& r : rows) {
        s += format_number(r.eps);
        for (double v : {r.l2, r.lp, r.h1_w, r.layer_h1, r.weighted_layer_h1}) s += "," + (r.ok ? format_number(v) : std::string("nan"));
        s += "," + format_number(r.h) + "," + (r.ok ? "ok" : "failed") + "\n";
    }
    return s;
}

std::string RateReport::dat() const {
    std::string s = "# eps l2 lp h1_w layer_h1 weighted_layer_h1 h\n";
    for (const auto& r : rows) {
        if (!r.ok) continue;
        s += format_number(r.eps);
        for (double v : {r.l2, r.lp, r.h1_w, r.layer_h1, r.weighted_layer_h1, r.h}) s += " " + format_number(v);
        s += "\n";
    }
    return s;
}

std::string RateReport::json() const {
    ojson j;
    ojson pl;
    pl["preset"] = plan.custom ? plan.custom->name : plan.preset;
    pl["seed"] = plan.seed;
    pl["domain"] = plan.domain;
    pl["bc"] = bc_name(plan.bc);
    pl["eps_list"] = plan.eps_list;
    pl["h_ratio"] = plan.h_ratio;
    pl["variant"] = plan.variant.name();
    pl["cell_N"] = plan.cell_N;
    pl["F"] = plan.data.F;
    if (plan.bc == BcKind::Dirichlet)
        pl["g"] = plan.data.g;
    else
        pl["flux"] = plan.data.flux;
    j["plan"] = pl;
    j["c0"] = c0;
    j["r0"] = r0;
    j["p"] = p;
    ojson rs = ojson::array();
    for (const auto& r : rows) rs.push_back(row_json(r));
    j["rows"] = rs;
    if (richardson) {
        ojson rp;
        rp["coarse"] = row_json(richardson->coarse);
        rp["fine"] = row_json(richardson->fine);
        rp["pollution_l2"] = richardson->pollution_l2;
        rp["pollution_h1_w"] = richardson->pollution_h1_w;
        j["richardson"] = rp;
    } else {
        j["richardson"] = nullptr;
    }
    ojson fs = ojson::object();
    for (const auto& f : fits) {
        ojson m;
        m["degenerate"] = f.degenerate;
        m["power"] = fit_json(f.power);
        m["power_log_c0"] = fit_json(f.log_c0);
        m["power_log_r0"] = fit_json(f.log_r0);
        m["notes"] = f.notes;
        fs[f.metric] = m;
    }
    j["fits"] = fs;
    return j.dump(2) + "\n";
}

RateReport run_plan(const ExperimentPlan& plan, const std::function<void(const std::string&)>& progress) {
    plan.validate();
    const CoefficientSet coeffs = plan.coefficients();
    validate(coeffs, cell_grid(plan.cell_N));
    const CellData cell = build_cell_data(coeffs, cell_grid(plan.cell_N));
    const PolygonDomain dom = PolygonDomain::from_name(plan.domain);

    RateReport rep;
    rep.plan = plan;
    rep.c0 = dom.c0();
    rep.r0 = dom.r0();
    rep.p = ExperimentPlan::lp_exponent(2);

    const std::size_t n = plan.eps_list.size();
    rep.rows.resize(n);
    auto run_row = [&](std::size_t i, double eps, double h) {
        RateRow r;
        try {
            r = compute_row(plan, coeffs, cell, dom, eps, h);
        } catch (const Error& e) {
            r = RateRow{};
            r.eps = eps;
            r.h = h;
            r.error = "row " + std::to_string(i) + " (eps=" + format_number(eps) + ", h=" + format_number(h) + "): " + e.what();
        }
        return r;
    };
    const int outer = std::min<int>(plan.workers, static_cast<int>(n));
    const int saved = default_workers();
    if (outer > 1) set_default_workers(1);
    parallel_for(
        n,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const double eps = plan.eps_list[i];
                rep.rows[i] = run_row(i, eps, eps / plan.h_ratio);
            }
        },
        outer);
    set_default_workers(saved);
    if (progress)
        for (const auto& r : rep.rows)
            progress(r.ok ? "eps=" + format_number(r.eps) + " l2=" + format_number(r.l2) + " h1_w=" + format_number(r.h1_w) : r.error);

    if (plan.richardson && rep.rows[0].ok) {
        RichardsonPair rp;
        rp.coarse = rep.rows[0];
        rp.fine = run_row(0, rp.coarse.eps, rp.coarse.h / 2.0);
        if (rp.fine.ok) {
            rp.pollution_l2 = 4.0 / 3.0 * std::abs(rp.coarse.l2 - rp.fine.l2) / rp.fine.l2;
            rp.pollution_h1_w = 2.0 * std::abs(rp.coarse.h1_w - rp.fine.h1_w) / rp.fine.h1_w;
            if (progress)
                progress("richardson pollution l2=" + format_number(rp.pollution_l2) + " h1_w=" + format_number(rp.pollution_h1_w));
        } else if (progress) {
            progress(rp.fine.error);
        }
        rep.richardson = rp;
    }
    rep.fits = fit_rows(rep.rows, rep.c0, rep.r0);
    return rep;
}

void write_report(const RateReport& report, const std::string& dir, bool dat) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_text(d / "rates.csv", report.csv());
    write_text(d / "report.json", report.json());
    if (dat) write_text(d / "rates.dat", report.dat());
}

LayerPlan layer_plan_from_config(const Config& cfg) {
    LayerPlan p;
    p.preset = cfg.get_string("problem.preset", p.preset);
    p.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", cfg.get_int("problem.seed", static_cast<long long>(p.seed))));
    if (has_custom_coefficients(cfg)) {
        Config c = cfg;
        c.set("problem.seed", std::to_string(p.seed));
        p.custom = coefficients_from_config(c);
    }
    p.domain = cfg.get_string("layers.domain", p.domain);
    p.h = cfg.get_double("layers.h", p.h);
    p.t_list = cfg.get_list("layers.t_list", p.t_list);
    if (auto F = cfg.get("layers.F")) p.data.F = split_expressions(*F);
    if (auto g = cfg.get("layers.g")) p.data.g = split_expressions(*g);
    p.cell_N = static_cast<int>(cfg.get_int("layers.cell_N", p.cell_N));
    return p;
}

LayerReport run_layer_study(const LayerPlan& plan) {
    for (double t : plan.t_list)
        if (t < 2.0 * plan.h) throw ValidationError("layer widths must be at least 2h");
    const CoefficientSet coeffs = plan.custom ? *plan.custom : preset(plan.preset, plan.seed);
    const CellData cell = build_cell_data(coeffs, cell_grid(plan.cell_N));
    const PolygonDomain dom = PolygonDomain::from_name(plan.domain);
    const TriMesh mesh = triangulate(dom, plan.h);
    const ConstantCoefficients hom(cell.hats);
    const FemFunction u0 = solve(assemble(hom, mesh, make_problem_data(plan.data, dom, coeffs.m, BcKind::Dirichlet)));

    LayerReport rep;
    rep.plan = plan;
    std::vector<double> ts, a, b, c;
    for (double t : plan.t_list) {
        LayerRow r;
        r.t = t;
        NormSpec s;
        s.kind = NormKind::H1;
        s.region = {Region::Layer, t, 0};
        r.layer_h1 = norm(u0, dom, s);
        s.region.weight_power = 1;
        r.weighted_layer_h1 = norm(u0, dom, s);
        const SeminormResult co = second_derivative_seminorm(u0, dom, t, false);
        r.colayer = co.value;
        r.skipped_elements = co.skipped_elements;
        rep.rows.push_back(r);
        ts.push_back(t);
        a.push_back(r.layer_h1);
        b.push_back(r.weighted_layer_h1);
        c.push_back(r.colayer);
    }
    rep.layer = fit_rate(ts, a, RateModel::Power);
    rep.weighted = fit_rate(ts, b, RateModel::Power);
    rep.colayer = fit_rate(ts, c, RateModel::Power);
    return rep;
}

std::string LayerReport::csv() const {
    std::string s = "t,layer_h1,weighted_layer_h1,colayer\n";
    for (const auto& r : rows)
        s += format_number(r.t) + "," + format_number(r.layer_h1) + "," + format_number(r.weighted_layer_h1) + "," + format_number(r.colayer) + "\n";
    return s;
}

std::string LayerReport::json() const {
    ojson j;
    j["domain"] = plan.domain;
    j["h"] = plan.h;
    j["g"] = plan.data.g;
    ojson rs = ojson::array();
    for (const auto& r : rows) {
        ojson x;
        x["t"] = r.t;
        x["layer_h1"] = r.layer_h1;
        x["weighted_layer_h1"] = r.weighted_layer_h1;
        x["colayer"] = r.colayer;
        x["skipped_elements"] = r.skipped_elements;
        rs.push_back(x);
    }
    j["rows"] = rs;
    j["layer_fit"] = fit_json(layer);
    j["weighted_fit"] = fit_json(weighted);
    j["colayer_fit"] = fit_json(colayer);
    return j.dump(2) + "\n";
}

bool SuiteReport::ok() const {
    return skipped_stages.empty() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SuiteReport::json() const {
    ojson j;
    j["ok"] = ok();
    ojson cs = ojson::array();
    for (const auto& c : checks) {
        ojson x;
        x["stage"] = c.stage;
        x["name"] = c.name;
        x["value"] = c.value;
        x["threshold"] = c.threshold;
        x["passed"] = c.passed;
        if (!c.detail.empty()) x["detail"] = c.detail;
        cs.push_back(x);
    }
    j["checks"] = cs;
    j["skipped_stages"] = skipped_stages;
    ojson recs = ojson::array();
    for (const auto& r : defect_records) recs.push_back(ojson::parse(r));
    j["defect_records"] = recs;
    return j.dump(2) + "\n";
}

SuiteReport verify_all(const Config& cfg) {
    SuiteReport rep;
    auto record = [&](const std::string& stage, const std::string& name, double value, double threshold, std::string detail = {}) {
        CheckResult c;
        c.stage = stage;
        c.name = name;
        c.value = value;
        c.threshold = threshold;
        c.passed = std::isfinite(value) && value <= threshold;
        c.detail = std::move(detail);
        rep.checks.push_back(c);
        return c.passed;
    };
    auto failure = [&](const std::string& stage, const std::string& name, const std::string& detail) {
        CheckResult c;
        c.stage = stage;
        c.name = name;
        c.value = std::numeric_limits<double>::quiet_NaN();
        c.passed = false;
        c.detail = detail;
        rep.checks.push_back(c);
    };
    const std::vector<std::string> stages{"coeff", "cell", "fem", "smoothing", "twoscale", "layers"};

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", cfg.get_int("problem.seed", 1)));
    CoefficientSet coeffs;
    CellGrid grid;
    try {
        Config c = cfg;
        if (!c.has("problem.preset") && c.keys("A").empty()) c.set("problem.preset", "laminate");
        c.set("problem.seed", std::to_string(seed));
        coeffs = coefficients_from_config(c);
        grid = grid_from_config(c);
        const ValidationReport v = validate(coeffs, grid);
        record("coeff", "ellipticity", -v.mu_observed, 0.0, "negated observed ellipticity constant");
        if (v.mu_observed <= 0.0) throw ValidationError("A is not elliptic");
    } catch (const Error& e) {
        failure("coeff", "validation", e.what());
        for (std::size_t i = 1; i < stages.size(); ++i) rep.skipped_stages.push_back(stages[i]);
        return rep;
    }

    const PolygonDomain dom = PolygonDomain::from_name(cfg.get_string("domain.name", "square"));
    const double eps = cfg.get_double("verify.eps", 1.0 / 8);
    const double h = cfg.get_double("verify.h", eps / 32.0);

    CellData cell;
    bool have_cell = false;
    try {
        cell = build_cell_data(coeffs, grid);
        have_cell = true;
        const CellInvariants inv = check_invariants(cell);
        const double mean = std::max({inv.max_mean_chi, inv.max_mean_chi_star, inv.max_mean_theta, inv.max_mean_Pi, inv.max_mean_b, inv.max_mean_W});
        record("cell", "mean_zero", mean, 1e-10);
        record("cell", "E_antisymmetry", inv.antisymmetry, 0.0);
        record("cell", "flux_corrector_residual", inv.flux_residual, 1e-8);
        record("cell", "divergence_b", inv.divergence_b, 1e-8);
        record("cell", "theta_residual", inv.theta_residual, 1e-8);
        record("cell", "A_hat_coercive", -inv.min_eig_A_hat, 0.0, "negated smallest eigenvalue of the symmetric part");
    } catch (const Error& e) {
        failure("cell", "construction", e.what());
    }

    try {
        const double mesh_h = cfg.get_double("verify.identity_h", 1.0 / 64);
        const TriMesh mesh = triangulate(dom, mesh_h);
        const OscillatingCoefficients osc(coeffs, eps);
        record("fem", "adjoint_identity", adjoint_check(osc, mesh, seed).defect, 1e-10);
        ProblemData du;
        du.bc = BcKind::Neumann;
        du.F = expression_function(std::vector<std::string>(static_cast<std::size_t>(coeffs.m), "1+x1*x2"));
        du.flux = expression_function(std::vector<std::string>(static_cast<std::size_t>(coeffs.m), "x1-0.3"));
        ProblemData dv;
        dv.bc = BcKind::Neumann;
        dv.F = expression_function(std::vector<std::string>(static_cast<std::size_t>(coeffs.m), "cos(x2)"));
        dv.flux = constant_function(std::vector<double>(static_cast<std::size_t>(coeffs.m), 0.7));
        SolveOptions tight;
        tight.tol = 1e-13;
        const FemFunction u = solve(assemble(osc, mesh, du), tight);
        AssembleOptions adj;
        adj.adjoint = true;
        const FemFunction v = solve(assemble(osc, mesh, dv, adj), tight);
        record("fem", "neumann_compatibility", compatibility_check(osc, du, u).defect, 1e-8);
        record("fem", "green_identity", green_check(du, u, dv, v).defect, 1e-10);
    } catch (const Error& e) {
        failure("fem", "identities", "row eps=" + format_number(eps) + ": " + e.what());
    }

    try {
        const double se = cfg.get_double("verify.smoothing_eps", 1.0 / 16);
        const auto samples = static_cast<std::size_t>(cfg.get_int("verify.samples", 2000));
        const WeightedBoundsReport wb = verify_weighted_bounds(dom, se, samples, seed, {}, false);
        record("smoothing", "S_delta_over_delta", wb.max_ratio_delta, 2.0 + 1e-6);
        record("smoothing", "S_inv_delta_times_delta", wb.max_ratio_inv_delta, 2.0 + 1e-6);
        record("smoothing", "commutator_constant_finite", std::isfinite(wb.commutator_constant) ? 0.0 : 1.0, 0.0);
    } catch (const Error& e) {
        failure("smoothing", "weighted_bounds", e.what());
    }

    if (have_cell) {
        try {
            const TriMesh mesh = triangulate(dom, h);
            const ProblemData data = make_problem_data(DataSpec{}, dom, coeffs.m, BcKind::Dirichlet);
            const OscillatingCoefficients osc(coeffs, eps);
            const FemFunction ue = solve(assemble(osc, mesh, data));
            const ConstantCoefficients hom(cell.hats);
            const FemFunction u0 = solve(assemble(hom, mesh, data));
            const std::string variant = cfg.get_string("verify.variant", "l2");
            const TwoScaleState st = build_w(ue, u0, cell, coeffs, dom, eps,
                                             variant == "h1" ? TwoScaleVariant::h1_corrector() : TwoScaleVariant::l2_corrector());
            WeakIdentityOptions wo;
            wo.seed = seed;
            const WeakIdentityReport wi = check_weak_identity(st, wo);
            record("twoscale", "weak_identity", wi.max_relative_defect, 1e-2);
            const VectorFunction one = constant_function(std::vector<double>(static_cast<std::size_t>(coeffs.m), 1.0));
            const FemFunction phi = solve_adjoint(st, one);
            const DualityResult du = duality_pairing(st, phi, one);
            record("twoscale", "duality_identity", du.defect, 1e-2);
            const SupportCheck sc = check_support(st);
            record("twoscale", "phi_support", sc.max_outside, 0.0);
            const AntisymmetryCheck ac = check_antisymmetry(st, seed);
            record("twoscale", "flux_corrector_antisymmetry", ac.defect, 1e-6);
            const EnergyBound eb = energy_bound(st);
            const std::string name = coeffs.name;
            rep.defect_records.push_back(defect_record_json(name, eps, h, wi.max_relative_defect,
                                                            {{"random_test_defect", wi.max_random_defect},
                                                             {"analytic_defect", wi.max_relative_defect_analytic},
                                                             {"residual_scale", wi.scale},
                                                             {"energy_constant", eb.constant},
                                                             {"antisymmetry_defect", ac.defect}}));
            rep.defect_records.push_back(defect_record_json(name, eps, h, du.defect,
                                                            {{"lhs", du.lhs}, {"rhs", du.rhs}, {"analytic_defect", du.defect_analytic}}));
        } catch (const Error& e) {
            failure("twoscale", "identities", "row eps=" + format_number(eps) + ", h=" + format_number(h) + ": " + e.what());
        }
    } else {
        rep.skipped_stages.push_back("twoscale");
    }

    try {
        const TriMesh mesh = triangulate(dom, cfg.get_double("verify.identity_h", 1.0 / 64));
        double prev = 0.0;
        for (double r : {1.0 / 32, 1.0 / 16, 1.0 / 8}) {
            const double layer = region_area(mesh, dom, {Region::Layer, r, 0});
            const double inside = region_area(mesh, dom, {Region::Inside, r, 0});
            const std::string tag = "r=" + format_number(r);
            record("layers", "partition " + tag, std::abs(layer + inside - dom.area()) / dom.area(), 1e-10);
            record("layers", "perimeter_bound " + tag, layer - dom.perimeter() * r, 1e-12);
            record("layers", "monotone " + tag, prev - layer, 0.0);
            prev = layer;
        }
    } catch (const Error& e) {
        failure("layers", "geometry", e.what());
    }
    return rep;
}

}  // namespace homog
