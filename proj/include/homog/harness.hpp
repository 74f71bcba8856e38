#pragma once

#include "homog/cell.hpp"
#include "homog/config.hpp"
#include "homog/domain.hpp"
#include "homog/fem.hpp"
#include "homog/twoscale.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace homog {

/// Load and boundary data of a run, given as expressions in x1, x2 (one per component).
struct DataSpec {
    /// Volume load; empty means zero.
    std::vector<std::string> F{"1"};
    /// Dirichlet trace. The single entry "corner" selects r^(pi/omega) sin(pi theta/omega) about the
    /// reflex vertex of the polygon (interior angle omega), the classical corner singular function.
    std::vector<std::string> g{"0.5*x1 + x1*x2"};
    /// Neumann flux density: one constant per polygon edge (edge e joins vertex e to vertex e+1),
    /// applied to every component.
    std::vector<double> flux{1.0, 0.0, -0.5, 0.25};
};

/// Builds ProblemData for the boundary condition kind.
ProblemData make_problem_data(const DataSpec& spec, const PolygonDomain& domain, int m, BcKind bc);

struct ExperimentPlan {
    std::string preset = "laminate";
    std::uint64_t seed = 1;
    /// Coefficients from a configuration file; the named preset is used when absent.
    std::optional<CoefficientSet> custom;
    std::string domain = "square";
    BcKind bc = BcKind::Dirichlet;
    std::vector<double> eps_list{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    /// Mesh rule h = eps / h_ratio.
    double h_ratio = 32.0;
    DataSpec data;
    TwoScaleVariant variant = TwoScaleVariant::h1_corrector();
    int cell_N = 128;
    /// Solve the largest eps again at h/2 to estimate the discretization pollution.
    bool richardson = true;
    /// Rows computed concurrently.
    int workers = 1;

    CoefficientSet coefficients() const;
    /// Lebesgue exponent p = 2d/(d-1) of the L^p rate (4 in two dimensions).
    static double lp_exponent(int d) { return 2.0 * d / (d - 1); }
    /// Throws ValidationError unless eps is strictly decreasing, eps/h >= 16 and lambda >= lambda0.
    void validate() const;
};

/// Reads [problem], [grid], [domain], [rates] and [run] sections.
ExperimentPlan plan_from_config(const Config& cfg);

struct RateRow {
    double eps = 0.0;
    double h = 0.0;
    double l2 = 0.0;                 // ||u_eps - u0||_L2
    double lp = 0.0;                 // ||u_eps - u0||_Lp
    double h1_w = 0.0;               // ||w_eps||_H1
    double layer_h1 = 0.0;           // ||u0||_H1(Omega \ Sigma_eps)
    double weighted_layer_h1 = 0.0;  // same with weight delta
    double u0_l2 = 0.0;              // scale used by the degeneracy test
    bool ok = false;
    std::string error;
};

/// Richardson pair at the largest eps. Pollution of a metric is the extrapolated discretization
/// error 2^p/(2^p - 1) |e_h - e_{h/2}| relative to e_{h/2}, with p = 2 for L2 and p = 1 for H1.
struct RichardsonPair {
    RateRow coarse, fine;
    double pollution_l2 = 0.0;
    double pollution_h1_w = 0.0;
};

enum class RateModel { Power, PowerLog };

struct FitResult {
    RateModel model = RateModel::Power;
    /// Power: fitted exponent; PowerLog: 1 (the exponent is fixed).
    double slope = 0.0;
    /// Power: prefactor C of C eps^s; PowerLog: C of C eps ln(c/eps).
    double coefficient = 0.0;
    /// 95% interval of the slope (Power) or of the coefficient (PowerLog).
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// Root mean square of the residuals in log coordinates.
    double residual = 0.0;
    int n = 0;
    /// The constant c of the logarithmic model.
    double log_constant = 0.0;
};

/// Least squares in log coordinates. Throws ValidationError for fewer than three rows,
/// nonpositive errors, or (PowerLog) any eps >= log_constant.
FitResult fit_rate(const std::vector<double>& eps, const std::vector<double>& err, RateModel model, double log_constant = 0.0);

struct MetricFits {
    std::string metric;
    /// Every row at solver-tolerance level: no fit is attempted.
    bool degenerate = false;
    std::optional<FitResult> power;
    /// Logarithmic models under the layer-constant and the diameter normalization.
    std::optional<FitResult> log_c0;
    std::optional<FitResult> log_r0;
    std::vector<std::string> notes;
};

struct RateReport {
    ExperimentPlan plan;
    double c0 = 0.0;
    double r0 = 0.0;
    double p = 4.0;
    std::vector<RateRow> rows;
    std::optional<RichardsonPair> richardson;
    std::vector<MetricFits> fits;

    const MetricFits& fit(const std::string& metric) const;
    /// eps,l2,lp,h1_w,layer_h1,weighted_layer_h1,h,status with %.12e numbers.
    std::string csv() const;
    std::string json() const;
    /// Whitespace-separated columns with a '#' header (gnuplot).
    std::string dat() const;
};

/// Solves u_eps and u0 on a common mesh per eps, builds w_eps and records the norms, then fits
/// slopes. Rows that throw are recorded with their message and skipped by the fits.
/// `progress` receives one line per finished row.
RateReport run_plan(const ExperimentPlan& plan, const std::function<void(const std::string&)>& progress = {});

/// Fits the recorded metrics of already computed rows (also used for injected rows).
std::vector<MetricFits> fit_rows(const std::vector<RateRow>& rows, double c0, double r0);

/// Writes rates.csv, report.json and optionally rates.dat into dir (created if needed).
void write_report(const RateReport& report, const std::string& dir, bool dat = false);

/// Layer and co-layer norms of the homogenized solution over dyadic layer widths t.
struct LayerPlan {
    std::string preset = "laminate";
    std::uint64_t seed = 1;
    std::optional<CoefficientSet> custom;
    std::string domain = "L-shape";
    DataSpec data{{"0"}, {"corner"}, {}};
    double h = 1.0 / 1024;
    std::vector<double> t_list{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    int cell_N = 64;
};

LayerPlan layer_plan_from_config(const Config& cfg);

struct LayerRow {
    double t = 0.0;
    double layer_h1 = 0.0;           // ||u0||_H1(Omega \ Sigma_t)
    double weighted_layer_h1 = 0.0;  // ||u0||_H1(Omega \ Sigma_t; delta)
    double colayer = 0.0;            // ||grad^2 u0||_L2(Sigma_t)
    std::size_t skipped_elements = 0;
};

struct LayerReport {
    LayerPlan plan;
    std::vector<LayerRow> rows;
    FitResult layer, weighted, colayer;
    std::string csv() const;
    std::string json() const;
};

/// Requires every t >= 2h (the Hessian recovery stays away from the boundary).
LayerReport run_layer_study(const LayerPlan& plan);

struct CheckResult {
    std::string stage;
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
    std::string detail;
};

struct SuiteReport {
    std::vector<CheckResult> checks;
    std::vector<std::string> skipped_stages;
    /// One JSON defect record per identity check of the two-scale stage.
    std::vector<std::string> defect_records;
    bool ok() const;
    std::string json() const;
};

/// Coefficient validation, cell invariants, adjoint/Green/compatibility identities, smoothing
/// bounds, weak and duality identities and layer geometry, in that order. A failing coefficient
/// validation skips every later stage; other failures are recorded and the suite continues.
SuiteReport verify_all(const Config& cfg);

}  // namespace homog
