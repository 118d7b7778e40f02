#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "klab/coefficients.hpp"
#include "klab/grid.hpp"
#include "klab/report.hpp"

namespace klab {

struct SchemeParams {
    double theta = 0.5;  // 0.5 Crank-Nicolson, 1 implicit Euler
    double dt = 1e-3;
    double h = 0.02;     // target spacing for evolution_operator
    // Leading steps replaced by two implicit-Euler half steps each (only when theta < 1).
    int rannacher_steps = 2;
};

struct ExhaustionParams {
    double R_start = 6.0;
    double R_step = 2.0;
    int max_levels = 8;
    double tol_exhaust = 1e-4;
    double core_fraction = 0.8;
};

struct EvolutionResult {
    double s = 0.0;
    std::vector<double> t_grid;
    std::vector<GridFunction> snapshots;
    int domain_level = 0;
    double theta = 0.5;
    double dt = 0.0;
    double h = 0.0;
    // "single box" | "converged" | "exhaustion not converged"
    std::string status = "single box";
    std::vector<std::string> warnings;
    bool maximum_principle = false;
    double max_peclet = 0.0;
    // sup of c over the box and the run; the sup-norm bound e^{c0 (t-s)} sup|f| uses it.
    double c0_box = 0.0;
    // max over snapshots of (sup|u| - e^{c0 (t-s)} sup|f|) / sup|f| (<= 0 when the bound holds).
    double reality_excess = 0.0;
    std::vector<double> level_radii;
    std::vector<double> level_differences;
    // max over levels of (u_n - u_{n+1}) on shared nodes; only when f >= 0 and c <= 0.
    double monotone_violation = 0.0;
    bool monotone_checked = false;

    const GridFunction& final() const { return snapshots.back(); }
    // Snapshot whose time is closest to t.
    const GridFunction& at_time(double t) const;
};

// Cauchy-Dirichlet problem on the box of f with zero boundary data, theta-scheme in time.
// 1-D: tridiagonal solves. 2-D: Douglas ADI, cross derivatives explicit.
EvolutionResult solve_dirichlet(const OperatorSpec& spec, const GridFunction& f, double s, double t_end,
                                const SchemeParams& params, const std::vector<double>& snapshot_times = {});

// G(t,s)f by domain exhaustion; the result lives on the core region of the last certified box.
EvolutionResult evolution_operator(const OperatorSpec& spec, const ScalarFn& f, double s, double t_end,
                                   const ExhaustionParams& ex, const SchemeParams& params,
                                   const std::vector<double>& snapshot_times = {});

// Compares G(t,s)f with G(t,r)G(r,s)f on one box (the final exhaustion level for G(t,s)f).
EstimateReport check_evolution_law(const OperatorSpec& spec, const ScalarFn& f, double s, double r, double t,
                                   const ExhaustionParams& ex, const SchemeParams& params,
                                   double tol_law = 5e-3);

// One row per node and snapshot: t,x[,y],u.
void export_csv(const EvolutionResult& res, std::ostream& os);
// Little endian: int32 d, int32 n, float64 R, int32 time count, then per snapshot
// float64 t followed by n^d float64 values.
void export_binary(const EvolutionResult& res, std::ostream& os);

}  // namespace klab
