#include "homog/config.hpp"
#include "homog/error.hpp"
#include "homog/harness.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace homog;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double> kEps{1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};

std::vector<double> map_eps(const std::vector<double>& eps, double (*f)(double)) {
    std::vector<double> out;
    for (double e : eps) out.push_back(f(e));
    return out;
}

ExperimentPlan small_plan(const std::string& preset) {
    ExperimentPlan p;
    p.preset = preset;
    p.eps_list = {1.0 / 4, 1.0 / 8, 1.0 / 16};
    p.h_ratio = 16.0;
    p.cell_N = 32;
    p.richardson = false;
    return p;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("exact power data is fitted with zero residual", "[harness]") {
    const auto err = map_eps(kEps, [](double e) { return 3.0 * e; });
    const FitResult f = fit_rate(kEps, err, RateModel::Power);
    CHECK_THAT(f.slope, WithinAbs(1.0, 1e-12));
    CHECK_THAT(f.coefficient, WithinRel(3.0, 1e-12));
    CHECK(f.residual < 1e-12);
    CHECK(f.n == 5);
    CHECK(f.ci_low <= f.slope);
    CHECK(f.ci_high >= f.slope);

    const auto half = map_eps(kEps, [](double e) { return 0.7 * std::sqrt(e); });
    CHECK_THAT(fit_rate(kEps, half, RateModel::Power).slope, WithinAbs(0.5, 1e-12));
}

TEST_CASE("slope interval uses the Student t quantile", "[harness]") {
    // Three points: log-log slope by hand; the 97.5% quantile of t with one degree of freedom
    // is 12.7062047361747.
    const std::vector<double> eps{0.5, 0.25, 0.125};
    const std::vector<double> err{0.5, 0.3, 0.125};
    double mx = 0, my = 0;
    for (int i = 0; i < 3; ++i) {
        mx += std::log(eps[i]) / 3;
        my += std::log(err[i]) / 3;
    }
    double sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        sxx += (std::log(eps[i]) - mx) * (std::log(eps[i]) - mx);
        sxy += (std::log(eps[i]) - mx) * (std::log(err[i]) - my);
    }
    const double slope = sxy / sxx;
    double sse = 0;
    for (int i = 0; i < 3; ++i) {
        const double r = std::log(err[i]) - (my + slope * (std::log(eps[i]) - mx));
        sse += r * r;
    }
    const double half_width = 12.7062047361747 * std::sqrt(sse / 1.0 / sxx);

    const FitResult f = fit_rate(eps, err, RateModel::Power);
    CHECK_THAT(f.slope, WithinRel(slope, 1e-12));
    CHECK_THAT(f.ci_high - f.slope, WithinRel(half_width, 1e-8));
    CHECK_THAT(f.slope - f.ci_low, WithinRel(half_width, 1e-8));
    CHECK_THAT(f.residual, WithinRel(std::sqrt(sse / 3.0), 1e-12));
}

TEST_CASE("logarithmic model recovers eps ln(c/eps) data", "[harness]") {
    const double c = 2.0;
    std::vector<double> err;
    for (double e : kEps) err.push_back(0.4 * e * std::log(c / e));
    const FitResult lg = fit_rate(kEps, err, RateModel::PowerLog, c);
    CHECK_THAT(lg.coefficient, WithinRel(0.4, 1e-12));
    CHECK(lg.residual < 1e-12);
    CHECK(lg.slope == 1.0);
    CHECK(lg.log_constant == c);
    const FitResult pw = fit_rate(kEps, err, RateModel::Power);
    CHECK(pw.slope < 1.0);
    CHECK(lg.residual < pw.residual);
}

TEST_CASE("fit input is validated", "[harness]") {
    CHECK_THROWS_AS(fit_rate({0.5, 0.25}, {1.0, 0.5}, RateModel::Power), ValidationError);
    CHECK_THROWS_AS(fit_rate({0.5, 0.25, 0.125}, {1.0, 0.0, 0.2}, RateModel::Power), ValidationError);
    CHECK_THROWS_AS(fit_rate({0.5, 0.25, 0.125}, {1.0, 0.5, 0.2}, RateModel::PowerLog, 0.4), ValidationError);
    CHECK_NOTHROW(fit_rate({0.5, 0.25, 0.125}, {1.0, 0.5, 0.2}, RateModel::PowerLog, 0.6));
}

TEST_CASE("fit_rows restricts the c0 log model to admissible rows", "[harness]") {
    std::vector<RateRow> rows;
    for (double e : kEps) {
        RateRow r;
        r.eps = e;
        r.h = e / 16;
        r.l2 = r.lp = r.layer_h1 = r.weighted_layer_h1 = e;
        r.h1_w = std::sqrt(e);
        r.u0_l2 = 1.0;
        r.ok = true;
        rows.push_back(r);
    }
    const auto fits = fit_rows(rows, 0.1, std::sqrt(2.0));
    const auto& l2 = *std::find_if(fits.begin(), fits.end(), [](const MetricFits& m) { return m.metric == "l2"; });
    REQUIRE(l2.power);
    CHECK_THAT(l2.power->slope, WithinAbs(1.0, 1e-12));
    // eps < 0.1 leaves 1/16, 1/32, 1/64.
    REQUIRE(l2.log_c0);
    CHECK(l2.log_c0->n == 3);
    REQUIRE(l2.log_r0);
    CHECK(l2.log_r0->n == 5);
    CHECK_FALSE(l2.notes.empty());
}

TEST_CASE("plan validation rejects bad sweeps", "[harness]") {
    ExperimentPlan p = small_plan("laminate");
    CHECK_NOTHROW(p.validate());
    p.h_ratio = 8.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = small_plan("laminate");
    p.eps_list = {1.0 / 8, 1.0 / 4};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    CHECK(ExperimentPlan::lp_exponent(2) == 4.0);
    CHECK(ExperimentPlan::lp_exponent(3) == 3.0);
}

TEST_CASE("plan_from_config reads the rates section", "[harness]") {
    const Config cfg = Config::from_string(
        "[problem]\npreset = smooth-trig\n[rates]\nbc = neumann\neps_list = 1/4, 1/8, 1/16\nh_ratio = 20\nvariant = l2\n"
        "F = x1*x2\nflux = 1, 2, 3, 4\nrichardson = false\n");
    const ExperimentPlan p = plan_from_config(cfg);
    CHECK(p.preset == "smooth-trig");
    CHECK(p.bc == BcKind::Neumann);
    REQUIRE(p.eps_list.size() == 3);
    CHECK(p.eps_list[2] == 1.0 / 16);
    CHECK(p.h_ratio == 20.0);
    CHECK(p.data.F == std::vector<std::string>{"x1*x2"});
    CHECK(p.data.flux == std::vector<double>{1, 2, 3, 4});
    CHECK_FALSE(p.richardson);
}

TEST_CASE("corner data vanishes on the reentrant edges", "[harness]") {
    const PolygonDomain L = PolygonDomain::from_name("L-shape");
    DataSpec spec;
    spec.g = {"corner"};
    const ProblemData d = make_problem_data(spec, L, 1, BcKind::Dirichlet);
    REQUIRE(d.g);
    double v = 1.0;
    for (double s : {0.1, 0.25, 0.4}) {
        d.g({0.5, 0.5 + s}, &v);
        CHECK_THAT(v, WithinAbs(0.0, 1e-14));
        d.g({0.5 - s, 0.5}, &v);
        CHECK_THAT(v, WithinAbs(0.0, 1e-14));
    }
    // On the bisector of the 3pi/2 opening: theta = 3pi/4, so the sine factor is 1.
    d.g({0.75, 0.25}, &v);
    CHECK_THAT(v, WithinRel(std::pow(0.125, 1.0 / 3.0), 1e-12));
    CHECK_THROWS_AS(make_problem_data(spec, PolygonDomain::from_name("square"), 1, BcKind::Dirichlet), ValidationError);
}

TEST_CASE("Neumann flux is constant per edge", "[harness]") {
    const PolygonDomain sq = PolygonDomain::from_name("square");
    DataSpec spec;
    spec.flux = {1.0, 2.0, 3.0, 4.0};
    const ProblemData d = make_problem_data(spec, sq, 1, BcKind::Neumann);
    REQUIRE(d.flux);
    const auto& v = sq.vertices();
    for (std::size_t e = 0; e < v.size(); ++e) {
        const Point a = v[e], b = v[(e + 1) % v.size()];
        double out = 0.0;
        d.flux({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, &out);
        CHECK(out == spec.flux[e]);
    }
    spec.flux = {1.0, 2.0};
    CHECK_THROWS_AS(make_problem_data(spec, sq, 1, BcKind::Neumann), ValidationError);
}

TEST_CASE("identity coefficients give degenerate error metrics", "[harness]") {
    const RateReport rep = run_plan(small_plan("identity"));
    for (const auto& r : rep.rows) REQUIRE(r.ok);
    CHECK(rep.fit("l2").degenerate);
    CHECK(rep.fit("h1_w").degenerate);
    CHECK_FALSE(rep.fit("layer_h1").degenerate);
    CHECK_FALSE(rep.fit("l2").power);
}

TEST_CASE("a failing row is reported with its parameters", "[harness]") {
    ExperimentPlan p = small_plan("laminate");
    // h = 0.3/16 does not divide the unit square, so triangulation of that row fails.
    p.eps_list = {0.3, 1.0 / 4, 1.0 / 8, 1.0 / 16};
    const RateReport rep = run_plan(p);
    REQUIRE(rep.rows.size() == 4);
    CHECK_FALSE(rep.rows[0].ok);
    CHECK_THAT(rep.rows[0].error, ContainsSubstring("row 0") && ContainsSubstring("eps="));
    for (std::size_t i = 1; i < 4; ++i) CHECK(rep.rows[i].ok);
    REQUIRE(rep.fit("l2").power);
    CHECK(rep.fit("l2").power->n == 3);
    CHECK_THAT(rep.csv(), ContainsSubstring(",failed\n"));
}

TEST_CASE("rates output is reproducible and well formed", "[harness]") {
    ExperimentPlan p = small_plan("random-trig");
    p.seed = 5;
    const RateReport a = run_plan(p);
    const RateReport b = run_plan(p);
    CHECK(a.csv() == b.csv());
    const std::string csv = a.csv();
    CHECK(csv.rfind("eps,l2,lp,h1_w,layer_h1,weighted_layer_h1,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    const auto j = nlohmann::json::parse(a.json());
    CHECK(j["rows"].size() == 3);
    CHECK(j["fits"].contains("l2"));

    const auto dir = std::filesystem::temp_directory_path() / "homog_harness_test";
    std::filesystem::remove_all(dir);
    write_report(a, dir.string(), true);
    CHECK(read_file(dir / "rates.csv") == csv);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(read_file(dir / "rates.dat").rfind("#", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("verify_all passes on the default configuration", "[harness]") {
    const SuiteReport rep = verify_all(Config::from_string("[problem]\npreset = laminate\n"));
    for (const auto& c : rep.checks) INFO(c.stage << " " << c.name << " " << c.value << " " << c.detail);
    CHECK(rep.ok());
    CHECK(rep.skipped_stages.empty());
    REQUIRE(rep.defect_records.size() == 2);
    const auto rec = nlohmann::json::parse(rep.defect_records[0]);
    for (const char* key : {"preset", "eps", "h", "defect", "observed_constants"}) CHECK(rec.contains(key));
    CHECK(nlohmann::json::parse(rep.json())["checks"].size() == rep.checks.size());
}

TEST_CASE("verify_all stops after a failed coefficient validation", "[harness]") {
    const SuiteReport rep = verify_all(Config::from_string("[problem]\nlambda = 1\n[A]\na11 = -1\na22 = -1\n[grid]\nN = 16\n"));
    CHECK_FALSE(rep.ok());
    REQUIRE_FALSE(rep.checks.empty());
    CHECK(rep.checks[0].stage == "coeff");
    CHECK_FALSE(rep.checks[0].passed);
    CHECK(rep.skipped_stages == std::vector<std::string>{"cell", "fem", "smoothing", "twoscale", "layers"});
}
