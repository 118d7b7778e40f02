#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "klab/coefficients.hpp"
#include "klab/estimate_verifier.hpp"
#include "klab/evolution_solver.hpp"
#include "klab/grid.hpp"
#include "klab/reference_oracles.hpp"
#include "klab/report.hpp"

namespace klab {

enum class MeasureMethod { Analytic, Burnin };

struct MeasureOptions {
    double R = 10.0;
    double h = 0.01;
    double dt = 1e-3;
    // Burn-in starts this long before the first requested time; doubled on every retry.
    double burn_length = 10.0;
    double tol_forget = 1e-6;
    int max_retries = 3;
};

// Tight evolution system of measures on a 1-D box, one density per requested time.
struct MeasureFamily {
    std::vector<double> times;
    std::vector<GridFunction> densities;
    // "analytic-gaussian" | "fokker-planck-burnin"
    std::string provenance;
    std::vector<GaussianDensity> gaussians;
    double burnin_s0 = 0.0;
    double forgetting_gap = 0.0;
    bool gap_monotone = true;
    int retries = 0;
    std::vector<std::string> notes;

    bool analytic() const { return !gaussians.empty(); }
    std::size_t index_of(double t) const;
    // Radius beyond which integrals against mu_t are truncated by default.
    double default_radius(std::size_t i) const;
};

MeasureFamily compute_measures(const OperatorSpec& spec, const std::vector<double>& t_grid, MeasureMethod method,
                               const MeasureOptions& opt = {});

// int_{|x| <= R} g dmu_t for the i-th time; R defaults to the family's radius.
double integrate_against(const MeasureFamily& fam, std::size_t i, const Fn1& g,
                         std::optional<double> R = std::nullopt);

// G(t,s)f for a list of times, either by the solver or by the OU closed form.
struct Propagated {
    std::vector<double> times;
    std::vector<Fn1> u;
    std::vector<Fn1> du;
    // Values are trusted for |x| <= radius.
    double radius = INFINITY;
};

class Propagator {
public:
    static Propagator solver(const OperatorSpec& spec, const ExhaustionParams& ex, const SchemeParams& scheme);
    static Propagator ou_oracle(const OperatorSpec& spec);

    Propagated apply(const Fn1& f, double s, const std::vector<double>& times) const;
    const std::string& label() const { return label_; }

private:
    std::string label_;
    std::function<Propagated(const Fn1&, double, const std::vector<double>&)> run_;
};

struct InvarianceOptions {
    std::optional<double> tol;  // default 1e-5 analytic, 1e-3 burn-in
    ExhaustionParams ex{10.0, 2.0, 6, 1e-8, 0.8};
    SchemeParams scheme{0.5, 1e-3, 0.01, 2};
};

EstimateReport check_invariance(const OperatorSpec& spec, const MeasureFamily& fam, const Fn1& f, double s,
                                double t, const InvarianceOptions& opt = {});

struct TightnessReport {
    std::vector<double> radii;
    std::vector<double> sup_tail;
    double epsilon = 1e-3;
    std::optional<double> tight_radius;
    nlohmann::json to_json() const;
};

TightnessReport check_tightness(const MeasureFamily& fam, const std::vector<double>& radii, double epsilon = 1e-3);

struct AverageNorm {
    double average = 0.0;
    double norm = 0.0;
};
AverageNorm average_and_norms(const MeasureFamily& fam, const Fn1& f, double s, double p);

// L1 distance between a density and a closed form (normalized on the same grid).
double l1_distance_to(const GridFunction& density, const Fn1& unnormalized);

}  // namespace klab
