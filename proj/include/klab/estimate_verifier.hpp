#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "klab/coefficients.hpp"
#include "klab/evolution_solver.hpp"
#include "klab/operator_model.hpp"
#include "klab/report.hpp"

namespace klab {

// Initial datum with analytic derivatives keyed by multi-index; the zero multi-index holds f.
struct Datum {
    std::string name;
    int d = 1;
    std::map<MultiIndex, ScalarFn> parts;

    ScalarFn f() const;
    bool has(const MultiIndex& mi) const;
    double eval(const MultiIndex& mi, std::span<const double> x) const;
    // Highest order n such that every derivative of order <= n is registered.
    int max_order() const;

    // f(x) = g(x_0) with g and its first derivatives given in order (g, g', g'', g''').
    static Datum from_1d(std::string name, int d, std::vector<std::function<double(double)>> g);
};

// Named data: tanh, x, const, sin, gauss, step (mollified with width eps).
Datum datum_by_name(const std::string& name, int d = 1, double eps = 0.02);

// All distinct components D^beta u, |beta| = order, of the final snapshot (multi_indices order).
std::vector<GridFunction> extract_derivatives(const EvolutionResult& res, int order);
std::vector<GridFunction> extract_derivatives(const GridFunction& u, int order);

// |D^order u|^2 summed over ordered index tuples (multinomial weights on the components).
GridFunction derivative_norm_sq(const GridFunction& u, int order);

enum class EstimateKind { AA, AAAA, PoiEs };

struct PointwiseOptions {
    ExhaustionParams ex;
    SchemeParams scheme;
    SamplingWindow window{8.0, 64, 16, std::nullopt, std::nullopt, 1e-3};
    double tol_rel = 1e-6;
    // Repeat both runs at (2h, 2dt) and add the margin change to the tolerance.
    bool refine = true;
};

// aa: |D^k G f|^p <= e^{p phi_{p,k} r} G (sum_{j=1..k} |D^j f|^2)^{p/2}   (p = 1: rate_p1)
// aaaa(h): |D^k G f|^p <= Gamma_{p,h,k}(r) G (sum_{j=0..h} |D^j f|^2)^{p/2}
// poi-es: |grad G f|^p <= e^{p sigma r} G |grad f|^p with sigma the sampled sup of r0.
EstimateReport verify_pointwise(const OperatorSpec& spec, const Datum& f, double s, double t, int k, double p,
                                EstimateKind kind, int h = 0, const PointwiseOptions& opt = {});

struct RateReport {
    int h = 0;
    int m = 1;
    std::vector<double> times;
    std::vector<double> norms;
    double slope = 0.0;
    double predicted = 0.0;
    double deviation = 0.0;
    std::string region = "core region";
    nlohmann::json to_json() const;
};

RateReport verify_smoothing_rate(const OperatorSpec& spec, const ScalarFn& f, double s, int h, int m,
                                 const std::vector<double>& times, const ExhaustionParams& ex,
                                 const SchemeParams& scheme);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace klab
