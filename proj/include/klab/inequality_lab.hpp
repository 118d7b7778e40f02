#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "klab/measure_flow.hpp"
#include "klab/operator_model.hpp"
#include "klab/report.hpp"

namespace klab {

// f together with its derivative, both one-dimensional.
struct TestFunction {
    std::string name;
    Fn1 f;
    Fn1 df;
};

// Families used by the checks and the acceptance suite.
std::vector<TestFunction> lsi_family();
TestFunction exponential_function(double theta);
TestFunction affine_function(double a, double b);
TestFunction power_function(int n);

// Ent(|f|^p) <= C_p int |f|^{p-2} |f'|^2 1_{f != 0} dmu_s with C_p = p^2 Lambda0 / (2|r0|).
EstimateReport check_log_sobolev(const MeasureFamily& fam, double Lambda0, double r0, const TestFunction& f, double s,
                                 double p, double tol = 1e-6);

// ||f - fbar_s||_{L^2(mu_s)} <= (C2/2) ||f'||_{L^2(mu_s)}.
EstimateReport check_poincare(const MeasureFamily& fam, const TestFunction& f, double s, double C2 = 2.0,
                              double tol = 1e-6);

struct HyperParams {
    double Lambda0 = 1.0;
    double nu0 = 1.0;
    double r0 = -1.0;
    double tol = 1e-6;
};

// ||G(t,s)f||_{L^q(mu_t)} <= (1 + tol) ||f||_{L^p(mu_s)} at t - s = T, 1.5T, 2T with T the threshold;
// 0.5T is recorded without pass semantics. The family must contain s + {0.5, 1, 1.5, 2} T.
EstimateReport check_hypercontractivity(const MeasureFamily& fam, const Propagator& prop, const Fn1& f, double s,
                                        double p, double q, const HyperParams& hp = {});

struct SuperReport {
    std::vector<double> lambdas;
    std::vector<double> sup_norm;  // +inf when divergence is detected
    std::string verdict;
    std::optional<double> delta;
    std::vector<std::string> notes;
    nlohmann::json to_json() const;
};

// sup over the family's times of ||exp(lambda x^2)||_{L^1(mu_t)}.
SuperReport supercontractivity_probe(const MeasureFamily& fam, const std::vector<double>& lambdas,
                                     std::optional<double> delta = std::nullopt);

struct DriftGrowthReport {
    // "none" | "supercontractive-sufficient" | "ultrabounded-sufficient" | "ultracontractive-sufficient"
    std::string verdict = "none";
    double K = 0.0;       // <b,x> <= -K |x|^2 log|x|
    double K1 = 0.0;      // <b,x> <= -K1 |x|^2 (log|x|)^alpha
    double alpha = 0.0;
    double K2 = 0.0;      // <b,x> <= -K2 |x|^gamma
    double gamma = 0.0;
    double r_min = 0.0, r_max = 0.0;
    std::string label = "sampled, not proven";
    nlohmann::json to_json() const;
};

// Templates fitted over |x| in [e, window.radius] (log-spaced); local exponents from the outer decade.
DriftGrowthReport classify_drift_growth(const OperatorSpec& spec, const SamplingWindow& window);

struct DecayEstimate {
    double p = 2.0;
    std::vector<double> times;  // t - s
    std::vector<double> norms;
    std::vector<double> grad_norms;
    double slope = 0.0;
    double grad_slope = 0.0;
    double residual = 0.0;
    double grad_residual = 0.0;
    std::vector<std::string> notes;
    nlohmann::json to_json() const;
};

// Slopes of log ||G(t,s)f - fbar_s||_{L^p(mu_t)} and log ||grad G(t,s)f||_{L^p(mu_t)} against t - s,
// fitted on t - s >= 1. The family must contain s and every s + tau.
DecayEstimate estimate_decay(const MeasureFamily& fam, const Propagator& prop, const Fn1& f, double s, double p,
                             const std::vector<double>& taus);

}  // namespace klab
