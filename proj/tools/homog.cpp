// Command-line front end: cell, homogenize, solve, rates and verify.

#include "homog/cell.hpp"
#include "homog/config.hpp"
#include "homog/error.hpp"
#include "homog/harness.hpp"
#include "homog/parallel.hpp"

#include <CLI11.hpp>

#include <boost/algorithm/string.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace homog;

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    int workers = 1;
    long long seed = -1;
    std::string eps_list;
    std::string preset;
};

Config load_config(const Common& c) {
    Config cfg = c.config.empty() ? Config::from_string("") : Config::from_file(c.config);
    if (!c.preset.empty()) cfg.set("problem.preset", c.preset);
    if (c.seed >= 0) cfg.set("run.seed", std::to_string(c.seed));
    if (!c.eps_list.empty()) cfg.set("rates.eps_list", c.eps_list);
    cfg.set("run.workers", std::to_string(c.workers));
    if (!cfg.has("problem.preset") && cfg.keys("A").empty()) cfg.set("problem.preset", "laminate");
    if (cfg.has("run.seed")) cfg.set("problem.seed", *cfg.get("run.seed"));
    return cfg;
}

std::filesystem::path out_dir(const Common& c) {
    std::filesystem::create_directories(c.out);
    return c.out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ResourceError("cannot write " + p.string());
    os << text;
}

int cmd_cell(const Common& c) {
    const Config cfg = load_config(c);
    const CoefficientSet coeffs = coefficients_from_config(cfg);
    const CellGrid grid = grid_from_config(cfg);
    validate(coeffs, grid);
    const CellData cell = build_cell_data(coeffs, grid);
    const auto path = out_dir(c) / "celldata.json";
    save_cell_data(cell, path.string());
    const CellInvariants inv = check_invariants(cell);
    std::printf("cell bundle written to %s\n", path.string().c_str());
    std::printf("flux corrector residual %.3e, divergence of b %.3e, E antisymmetry %.3e\n", inv.flux_residual, inv.divergence_b,
                inv.antisymmetry);
    return 0;
}

int cmd_homogenize(const Common& c) {
    const Config cfg = load_config(c);
    const CoefficientSet coeffs = coefficients_from_config(cfg);
    const CellGrid grid = grid_from_config(cfg);
    validate(coeffs, grid);
    const CellData cell = build_cell_data(coeffs, grid);
    const std::string text = tensors_json(cell.hats);
    std::cout << text << "\n";
    write_file(out_dir(c) / "homogenized.json", text + "\n");
    return 0;
}

int cmd_solve(const Common& c) {
    const Config cfg = load_config(c);
    const CoefficientSet coeffs = coefficients_from_config(cfg);
    const CellGrid grid = grid_from_config(cfg);
    validate(coeffs, grid);
    const PolygonDomain dom = PolygonDomain::from_name(cfg.get_string("domain.name", "square"));
    const double eps = cfg.get_double("solve.eps", 1.0 / 8);
    const double h = cfg.get_double("solve.h", eps > 0.0 ? eps / 32.0 : 1.0 / 64);
    const std::string bc = boost::algorithm::to_lower_copy(cfg.get_string("solve.bc", "dirichlet"));
    if (bc != "dirichlet" && bc != "neumann") throw ConfigError("solve.bc must be dirichlet or neumann");
    const BcKind kind = bc == "dirichlet" ? BcKind::Dirichlet : BcKind::Neumann;

    Config rates = cfg;
    for (const char* k : {"F", "g", "flux"})
        if (auto v = cfg.get(std::string("solve.") + k)) rates.set(std::string("rates.") + k, *v);
    const DataSpec spec = plan_from_config(rates).data;
    const TriMesh mesh = triangulate(dom, h);
    const ProblemData data = make_problem_data(spec, dom, coeffs.m, kind);
    SolveStats stats;
    FemFunction u;
    if (eps > 0.0) {
        u = solve(assemble(OscillatingCoefficients(coeffs, eps), mesh, data), {}, &stats);
    } else {
        const CellData cell = build_cell_data(coeffs, grid);
        u = solve(assemble(ConstantCoefficients(cell.hats), mesh, data), {}, &stats);
    }
    const auto dir = out_dir(c);
    write_solution_csv(u, (dir / "solution.csv").string());
    if (cfg.get_bool("solve.write_mesh", false)) write_mesh(mesh, (dir / "nodes.txt").string(), (dir / "elements.txt").string());
    std::printf("%s solve: %zu nodes, %d iterations, relative residual %.2e (%s)\n", stats.method.c_str(), mesh.num_nodes(),
                stats.iterations, stats.relative_residual, stats.preconditioner.c_str());
    return 0;
}

int cmd_rates(const Common& c, bool dat, bool layers) {
    const Config cfg = load_config(c);
    set_default_workers(c.workers);
    ExperimentPlan plan = plan_from_config(cfg);
    const auto dir = out_dir(c);
    const RateReport rep = run_plan(plan, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
    write_report(rep, dir.string(), dat);
    for (const auto& f : rep.fits) {
        if (f.power)
            std::printf("%-18s slope %.3f  [%.3f, %.3f]  residual %.3e\n", f.metric.c_str(), f.power->slope, f.power->ci_low,
                        f.power->ci_high, f.power->residual);
        for (const auto& n : f.notes) std::printf("%-18s note: %s\n", f.metric.c_str(), n.c_str());
    }
    if (layers || !cfg.keys("layers").empty()) {
        const LayerReport lr = run_layer_study(layer_plan_from_config(cfg));
        write_file(dir / "layers.csv", lr.csv());
        write_file(dir / "layers.json", lr.json());
        std::printf("layer slope %.3f, weighted layer slope %.3f, co-layer slope %.3f\n", lr.layer.slope, lr.weighted.slope,
                    lr.colayer.slope);
    }
    for (const auto& r : rep.rows)
        if (!r.ok) return 1;
    return 0;
}

int cmd_verify(const Common& c) {
    const Config cfg = load_config(c);
    set_default_workers(c.workers);
    const SuiteReport rep = verify_all(cfg);
    const auto dir = out_dir(c);
    write_file(dir / "report.json", rep.json());
    {
        std::string lines;
        for (const auto& r : rep.defect_records) lines += r + "\n";
        write_file(dir / "defects.jsonl", lines);
    }
    for (const auto& ch : rep.checks)
        std::printf("%-4s %-10s %-32s %.3e (limit %.1e)%s%s\n", ch.passed ? "ok" : "FAIL", ch.stage.c_str(), ch.name.c_str(), ch.value,
                    ch.threshold, ch.detail.empty() ? "" : "  ", ch.detail.c_str());
    for (const auto& s : rep.skipped_stages) std::printf("skipped stage %s\n", s.c_str());
    return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic homogenization toolkit: cell problems, two-scale errors and convergence rates"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", common.out, "output directory");
    app.add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", common.seed, "random seed (presets and test functions)")->check(CLI::NonNegativeNumber);
    app.add_option("--eps-list", common.eps_list, "comma separated eps values, fractions allowed (1/8,1/16)");
    app.add_option("--preset", common.preset, "coefficient preset");

    auto* cell = app.add_subcommand("cell", "solve the cell problems and write the CellData bundle");
    auto* hom = app.add_subcommand("homogenize", "print the effective tensors");
    auto* solve_cmd = app.add_subcommand("solve", "solve one boundary value problem and write solution.csv");
    auto* rates = app.add_subcommand("rates", "run an eps sweep and fit convergence rates");
    bool dat = false, layers = false;
    rates->add_flag("--dat", dat, "also write gnuplot-compatible rates.dat");
    rates->add_flag("--layers", layers, "also run the layer and co-layer study");
    auto* verify = app.add_subcommand("verify", "run every invariant and identity check");
    for (auto* sub : {cell, hom, solve_cmd, rates, verify}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*cell) return cmd_cell(common);
        if (*hom) return cmd_homogenize(common);
        if (*solve_cmd) return cmd_solve(common);
        if (*rates) return cmd_rates(common, dat, layers);
        if (*verify) return cmd_verify(common);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
