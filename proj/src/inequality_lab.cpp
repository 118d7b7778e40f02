#include "klab/inequality_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "klab/errors.hpp"
#include "klab/estimate_verifier.hpp"
#include "klab/explicit_constants.hpp"

namespace klab {

namespace {

double lp_norm(const MeasureFamily& fam, std::size_t i, const Fn1& g, double p, std::optional<double> R = std::nullopt) {
    return std::pow(integrate_against(fam, i, [&](double x) { return std::pow(std::abs(g(x)), p); }, R), 1.0 / p);
}

std::optional<double> truncation(const MeasureFamily& fam, std::size_t i, const Propagated& pr) {
    if (!std::isfinite(pr.radius)) return std::nullopt;
    return std::min(fam.default_radius(i), pr.radius);
}

struct LineFit {
    double slope = 0.0;
    double residual = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LineFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - f.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - icpt - f.slope * x[i], 2);
    f.residual = std::sqrt(ss / n);
    return f;
}

std::vector<double> window_times(const OperatorSpec& spec, const SamplingWindow& w) {
    const double t0 = w.t0.value_or(std::max(spec.t_min, -50.0));
    const double t1 = w.t1.value_or(std::min(spec.t_max, 50.0));
    if (spec.autonomous) return {t0};
    const int n = std::max(2, std::min(w.time_samples, 32));
    std::vector<double> ts;
    for (int i = 0; i < n; ++i) ts.push_back(t0 + (t1 - t0) * i / (n - 1.0));
    return ts;
}

}  // namespace

TestFunction exponential_function(double theta) {
    return {"exp(" + nlohmann::json(theta).dump() + "x)", [theta](double x) { return std::exp(theta * x); },
            [theta](double x) { return theta * std::exp(theta * x); }};
}

TestFunction affine_function(double a, double b) {
    return {nlohmann::json(a).dump() + "+" + nlohmann::json(b).dump() + "x", [a, b](double x) { return a + b * x; },
            [b](double) { return b; }};
}

TestFunction power_function(int n) {
    return {"x^" + std::to_string(n), [n](double x) { return std::pow(x, n); },
            [n](double x) { return n == 0 ? 0.0 : n * std::pow(x, n - 1); }};
}

std::vector<TestFunction> lsi_family() {
    std::vector<TestFunction> fam;
    for (double b : {0.1, 0.3, 0.5}) fam.push_back(affine_function(1.0, b));
    for (double th : {-0.5, 0.25, 0.5, 1.0}) fam.push_back(exponential_function(th));
    fam.push_back({"2+sin(x)", [](double x) { return 2.0 + std::sin(x); }, [](double x) { return std::cos(x); }});
    fam.push_back({"1+x^2", [](double x) { return 1.0 + x * x; }, [](double x) { return 2.0 * x; }});
    fam.push_back({"tanh(x)", [](double x) { return std::tanh(x); },
                   [](double x) { return 1.0 - std::tanh(x) * std::tanh(x); }});
    fam.push_back({"x", [](double x) { return x; }, [](double) { return 1.0; }});
    fam.push_back({"3+x^3", [](double x) { return 3.0 + x * x * x; }, [](double x) { return 3.0 * x * x; }});
    fam.push_back({"exp(-x^2)", [](double x) { return std::exp(-x * x); },
                   [](double x) { return -2.0 * x * std::exp(-x * x); }});
    fam.push_back({"1+0.5cos(2x)", [](double x) { return 1.0 + 0.5 * std::cos(2 * x); },
                   [](double x) { return -std::sin(2 * x); }});
    fam.push_back({"sqrt(1+x^2)", [](double x) { return std::sqrt(1.0 + x * x); },
                   [](double x) { return x / std::sqrt(1.0 + x * x); }});
    fam.push_back({"atan(x)+2", [](double x) { return std::atan(x) + 2.0; }, [](double x) { return 1.0 / (1.0 + x * x); }});
    fam.push_back({"cosh(x/2)", [](double x) { return std::cosh(0.5 * x); }, [](double x) { return 0.5 * std::sinh(0.5 * x); }});
    fam.push_back({"1+x exp(-x^2)", [](double x) { return 1.0 + x * std::exp(-x * x); },
                   [](double x) { return (1.0 - 2.0 * x * x) * std::exp(-x * x); }});
    fam.push_back({"const", [](double) { return 2.0; }, [](double) { return 0.0; }});
    fam.push_back({"erf(x)+1.5", [](double x) { return std::erf(x) + 1.5; },
                   [](double x) { return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x); }});
    return fam;
}

EstimateReport check_log_sobolev(const MeasureFamily& fam, double Lambda0, double r0, const TestFunction& f, double s,
                                 double p, double tol) {
    if (!(r0 < 0.0)) throw Error("precondition", "log-Sobolev needs r0 < 0");
    if (!(p >= 2.0)) throw Error("precondition", "log-Sobolev is checked for p >= 2");
    const std::size_t i = fam.index_of(s);
    const double Cp = log_sobolev_constant(p, Lambda0, r0);
    const double N = integrate_against(fam, i, [&](double x) { return std::pow(std::abs(f.f(x)), p); });
    const double ent = integrate_against(fam, i, [&](double x) {
        const double a = std::abs(f.f(x));
        return a < 1e-14 ? 0.0 : std::pow(a, p) * p * std::log(a);
    });
    const double lhs = N > 0.0 ? ent - N * std::log(N) : 0.0;
    const double dirichlet = integrate_against(fam, i, [&](double x) {
        const double a = std::abs(f.f(x));
        return a < 1e-14 ? 0.0 : std::pow(a, p - 2.0) * f.df(x) * f.df(x);
    });
    const double rhs = Cp * dirichlet;
    EstimateReport rep;
    rep.id = "lsi(p=" + nlohmann::json(p).dump() + ")";
    rep.constants["C_p"] = Cp;
    rep.constants["Lambda0"] = Lambda0;
    rep.constants["r0"] = r0;
    rep.values["lhs"] = lhs;
    rep.values["rhs"] = rhs;
    rep.worst_margin = rhs - lhs;
    rep.tolerance = tol * std::max(1.0, std::abs(rhs));
    rep.notes.push_back("test function " + f.name + "; measures: " + fam.provenance);
    rep.finalize();
    return rep;
}

EstimateReport check_poincare(const MeasureFamily& fam, const TestFunction& f, double s, double C2, double tol) {
    const std::size_t i = fam.index_of(s);
    const double mean = integrate_against(fam, i, f.f);
    const double lhs = lp_norm(fam, i, [&](double x) { return f.f(x) - mean; }, 2.0);
    const double rhs = 0.5 * C2 * lp_norm(fam, i, f.df, 2.0);
    EstimateReport rep;
    rep.id = "poincare";
    rep.constants["C2"] = C2;
    rep.values["lhs"] = lhs;
    rep.values["rhs"] = rhs;
    rep.values["average"] = mean;
    rep.worst_margin = rhs - lhs;
    rep.tolerance = tol * std::max(1.0, rhs);
    rep.notes.push_back("test function " + f.name);
    rep.finalize();
    return rep;
}

EstimateReport check_hypercontractivity(const MeasureFamily& fam, const Propagator& prop, const Fn1& f, double s,
                                        double p, double q, const HyperParams& hp) {
    if (!(1.0 < p && p < q)) throw Error("precondition", "hypercontractivity needs 1 < p < q");
    if (!(hp.r0 < 0.0)) throw Error("precondition", "hypercontractivity needs r0 < 0");
    const double T = hypercontractivity_threshold(p, q, hp.Lambda0, hp.nu0, hp.r0);
    const std::vector<double> factors = {0.5, 1.0, 1.5, 2.0};
    std::vector<double> times;
    for (double fct : factors) times.push_back(s + fct * T);
    const double base = lp_norm(fam, fam.index_of(s), f, p);
    Propagated pr = prop.apply(f, s, times);
    EstimateReport rep;
    rep.id = "hyper(p=" + nlohmann::json(p).dump() + ",q=" + nlohmann::json(q).dump() + ")";
    rep.constants["threshold"] = T;
    rep.values["norm_p_s"] = base;
    double worst = INFINITY;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const std::size_t it = fam.index_of(times[k]);
        const double nq = lp_norm(fam, it, pr.u[k], q, truncation(fam, it, pr));
        const double ratio = base > 0.0 ? nq / base : (nq == 0.0 ? 1.0 : INFINITY);
        rep.values["ratio_at_" + nlohmann::json(factors[k]).dump() + "T"] = ratio;
        if (factors[k] >= 1.0) worst = std::min(worst, 1.0 - ratio);
    }
    rep.worst_margin = worst;
    rep.tolerance = hp.tol;
    rep.notes.push_back("0.5T recorded without pass semantics");
    rep.notes.push_back("propagator: " + prop.label());
    rep.finalize();
    return rep;
}

SuperReport supercontractivity_probe(const MeasureFamily& fam, const std::vector<double>& lambdas,
                                     std::optional<double> delta) {
    SuperReport rep;
    rep.lambdas = lambdas;
    rep.delta = delta;
    rep.notes.push_back(delta ? "delta recorded; the uniform bound's delta does not enter the displayed condition"
                              : "no delta supplied; the uniform bound's delta is ambiguous and unused");
    bool divergent_any = false;
    for (double lam : lambdas) {
        if (!(lam > 0.0)) throw Error("precondition", "lambda must be positive");
        Fn1 phi = [lam](double x) { return std::exp(lam * x * x); };
        double sup = 0.0;
        bool divergent = false;
        for (std::size_t i = 0; i < fam.times.size() && !divergent; ++i) {
            double inner, outer;
            const double R = fam.default_radius(i);
            if (fam.analytic()) {
                inner = integrate_against(fam, i, phi, R);
                outer = integrate_against(fam, i, phi, 2.0 * R);
            } else {
                inner = integrate_against(fam, i, phi, 0.5 * R);
                outer = integrate_against(fam, i, phi, R);
            }
            if (!std::isfinite(outer) || outer > 1.1 * inner) divergent = true;
            else sup = std::max(sup, outer);
        }
        rep.sup_norm.push_back(divergent ? INFINITY : sup);
        divergent_any = divergent_any || divergent;
    }
    rep.verdict = divergent_any ? "not supercontractive on evidence" : "consistent with supercontractivity";
    rep.notes.push_back(fam.analytic() ? "divergence: value grows by more than 10% when the radius doubles"
                                       : "divergence: value grows by more than 10% from R/2 to the box radius R");
    return rep;
}

nlohmann::json SuperReport::to_json() const {
    nlohmann::json norms = nlohmann::json::array();
    for (double v : sup_norm) norms.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
    nlohmann::json j = {{"lambdas", lambdas}, {"sup_norm", norms}, {"verdict", verdict}, {"notes", notes}};
    if (delta) j["delta"] = *delta;
    return j;
}

DriftGrowthReport classify_drift_growth(const OperatorSpec& spec, const SamplingWindow& window) {
    const double e = std::numbers::e;
    if (!(window.radius >= e)) throw Error("precondition", "drift growth needs a window radius of at least e");
    DriftGrowthReport rep;
    rep.r_min = e;
    rep.r_max = window.radius;
    const int nr = 200;
    std::vector<double> radii, z;
    std::vector<std::vector<double>> dirs;
    if (spec.d == 1) {
        dirs = {{1.0}, {-1.0}};
    } else {
        for (int k = 0; k < 16; ++k) {
            const double a = 2.0 * std::numbers::pi * k / 16.0;
            dirs.push_back({std::cos(a), std::sin(a)});
        }
    }
    const std::vector<double> ts = window_times(spec, window);
    for (int k = 0; k < nr; ++k) {
        const double rho = e * std::pow(window.radius / e, k / (nr - 1.0));
        double worst = -INFINITY;
        std::vector<double> x(spec.d);
        for (const auto& dir : dirs)
            for (double t : ts) {
                for (int a = 0; a < spec.d; ++a) x[a] = rho * dir[a];
                const auto b = spec.b.value(t, x);
                double bx = 0.0;
                for (int a = 0; a < spec.d; ++a) bx += b[a] * x[a];
                worst = std::max(worst, bx);
            }
        if (!(worst < 0.0)) return rep;
        radii.push_back(rho);
        z.push_back(-worst);
    }
    std::vector<double> lx, lz, llx, lz2;
    const double outer_from = std::max(e, window.radius / 10.0);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (radii[k] < outer_from - 1e-12) continue;
        lx.push_back(std::log(radii[k]));
        lz.push_back(std::log(z[k]));
        llx.push_back(std::log(std::log(radii[k])));
        lz2.push_back(std::log(z[k] / (radii[k] * radii[k])));
    }
    if (lx.size() < 3) return rep;
    rep.gamma = fit_line(lx, lz).slope;
    rep.alpha = fit_line(llx, lz2).slope;
    rep.K2 = INFINITY;
    rep.K1 = INFINITY;
    double k_inner = INFINITY, k_outer = INFINITY;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double r = radii[k], lr = std::log(r);
        rep.K2 = std::min(rep.K2, z[k] / std::pow(r, rep.gamma));
        rep.K1 = std::min(rep.K1, z[k] / (r * r * std::pow(lr, rep.alpha)));
        const double c = z[k] / (r * r * lr);
        if (r >= outer_from - 1e-12) k_outer = std::min(k_outer, c);
        else k_inner = std::min(k_inner, c);
    }
    rep.K = std::min(k_inner, k_outer);
    const bool k_holds = rep.K > 0.0 && (!std::isfinite(k_inner) || k_outer >= 0.9 * k_inner);
    if (rep.gamma > 2.2 && rep.K2 > 0.0) rep.verdict = "ultracontractive-sufficient";
    else if (rep.alpha > 1.1 && rep.K1 > 0.0) rep.verdict = "ultrabounded-sufficient";
    else if (k_holds) rep.verdict = "supercontractive-sufficient";
    return rep;
}

nlohmann::json DriftGrowthReport::to_json() const {
    return {{"verdict", verdict}, {"K", K}, {"K1", K1}, {"alpha", alpha}, {"K2", K2}, {"gamma", gamma},
            {"r_min", r_min}, {"r_max", r_max}, {"label", label}};
}

DecayEstimate estimate_decay(const MeasureFamily& fam, const Propagator& prop, const Fn1& f, double s, double p,
                             const std::vector<double>& taus) {
    if (taus.size() < 5) throw Error("precondition", "decay needs at least 5 sample times");
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    if (!(sorted.front() > 0.0) || sorted.back() < 10.0 * sorted.front())
        throw Error("precondition", "decay sample times must span at least one decade");
    if (!(p >= 1.0)) throw Error("domain", "p must be at least 1");
    DecayEstimate est;
    est.p = p;
    est.times = sorted;
    if (p == 1.0) est.notes.push_back("p = 1: the decay set for p = 1 need not contain negative rates; interpret with care");
    const double fbar = integrate_against(fam, fam.index_of(s), f);
    std::vector<double> abs_times;
    for (double tau : sorted) abs_times.push_back(s + tau);
    Propagated pr = prop.apply(f, s, abs_times);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const std::size_t it = fam.index_of(abs_times[k]);
        const auto R = truncation(fam, it, pr);
        est.norms.push_back(lp_norm(fam, it, [&](double x) { return pr.u[k](x) - fbar; }, p, R));
        est.grad_norms.push_back(lp_norm(fam, it, pr.du[k], p, R));
    }
    if (est.norms.front() < 1e-12) throw Error("already converged", "already converged");
    std::vector<double> x, y, yg;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (sorted[k] < 1.0) continue;
        x.push_back(sorted[k]);
        y.push_back(std::log(est.norms[k]));
        yg.push_back(std::log(std::max(est.grad_norms[k], 1e-300)));
    }
    if (x.size() < 2) throw Error("precondition", "decay fit needs at least two times with t - s >= 1");
    const LineFit a = fit_line(x, y), g = fit_line(x, yg);
    est.slope = a.slope;
    est.residual = a.residual;
    est.grad_slope = g.slope;
    est.grad_residual = g.residual;
    est.notes.push_back("propagator: " + prop.label());
    return est;
}

nlohmann::json DecayEstimate::to_json() const {
    return {{"p", p}, {"times", times}, {"norms", norms}, {"grad_norms", grad_norms}, {"slope", slope},
            {"grad_slope", grad_slope}, {"residual", residual}, {"grad_residual", grad_residual}, {"notes", notes}};
}

}  // namespace klab
