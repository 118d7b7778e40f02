#include "klab/estimate_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "klab/errors.hpp"
#include "klab/explicit_constants.hpp"
#include "klab/fd.hpp"

namespace klab {

namespace {

double multinomial(const MultiIndex& mi) {
    double num = std::tgamma(order_of(mi) + 1.0);
    for (int o : mi) num /= std::tgamma(o + 1.0);
    return num;
}

// Sum of |D^j f|^2 over j in [lo, hi], evaluated from the registered derivatives.
double datum_norm_sq(const Datum& f, int lo, int hi, std::span<const double> x) {
    double s = 0.0;
    for (int j = lo; j <= hi; ++j)
        for (const MultiIndex& mi : multi_indices(f.d, j)) {
            const double v = f.eval(mi, x);
            s += multinomial(mi) * v * v;
        }
    return s;
}

GridFunction pow_field(GridFunction g, double e) {
    for (double& v : g.values) v = std::pow(std::max(v, 0.0), e);
    return g;
}

// Restricts a and b to the smaller of their boxes and gives both the larger core margin.
void align(GridFunction& a, GridFunction& b) {
    const double R = std::min(a.R - a.core_margin * a.h, b.R - b.core_margin * b.h);
    const double Ra = std::min(a.R, b.R);
    a = a.restrict_to(Ra);
    b = b.restrict_to(Ra);
    const int margin = std::max(0, static_cast<int>(std::lround((Ra - R) / a.h)));
    a.core_margin = b.core_margin = std::max({a.core_margin, b.core_margin, margin});
}

struct Pair {
    GridFunction lhs;
    GridFunction rhs;
    EvolutionResult run_f;
    EvolutionResult run_g;
};

Pair run_pair(const OperatorSpec& spec, const Datum& f, const ScalarFn& g, double s, double t, int k, double p,
              double Gamma, const ExhaustionParams& ex, const SchemeParams& scheme) {
    Pair out;
    out.run_f = evolution_operator(spec, f.f(), s, t, ex, scheme);
    out.run_g = evolution_operator(spec, g, s, t, ex, scheme);
    out.lhs = pow_field(derivative_norm_sq(out.run_f.final(), k), 0.5 * p);
    out.rhs = Gamma * out.run_g.final();
    align(out.lhs, out.rhs);
    return out;
}

GridFunction margin_field(const Pair& pr) { return pr.rhs - pr.lhs; }

double core_min(const GridFunction& g) {
    double m = INFINITY;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.in_core(i, g.core_margin)) m = std::min(m, g.values[i]);
    return m;
}

}  // namespace

ScalarFn Datum::f() const {
    auto it = parts.find(MultiIndex(d, 0));
    if (it == parts.end()) throw Error("domain", "datum '" + name + "' has no value function");
    return it->second;
}

bool Datum::has(const MultiIndex& mi) const { return parts.count(mi) > 0; }

double Datum::eval(const MultiIndex& mi, std::span<const double> x) const {
    auto it = parts.find(mi);
    if (it == parts.end())
        throw Error("insufficient derivative data", "datum '" + name + "' lacks D_" + multi_index_name(mi));
    return it->second(x);
}

int Datum::max_order() const {
    int n = -1;
    for (int o = 0;; ++o) {
        for (const MultiIndex& mi : multi_indices(d, o))
            if (!has(mi)) return n;
        n = o;
    }
}

Datum Datum::from_1d(std::string name, int d, std::vector<std::function<double(double)>> g) {
    Datum out;
    out.name = std::move(name);
    out.d = d;
    for (int o = 0; o < static_cast<int>(g.size()); ++o)
        for (const MultiIndex& mi : multi_indices(d, o)) {
            if (mi[0] == o) {
                auto fn = g[o];
                out.parts[mi] = [fn](std::span<const double> x) { return fn(x[0]); };
            } else {
                out.parts[mi] = [](std::span<const double>) { return 0.0; };
            }
        }
    return out;
}

Datum datum_by_name(const std::string& name, int d, double eps) {
    using F = std::function<double(double)>;
    if (name == "tanh") {
        return Datum::from_1d(name, d, {
            [](double x) { return std::tanh(x); },
            [](double x) { double t = std::tanh(x); return 1.0 - t * t; },
            [](double x) { double t = std::tanh(x); return -2.0 * t * (1.0 - t * t); },
            [](double x) { double t = std::tanh(x); return -2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t); }});
    }
    if (name == "x") {
        return Datum::from_1d(name, d, {[](double x) { return x; }, [](double) { return 1.0; },
                                        [](double) { return 0.0; }, [](double) { return 0.0; }});
    }
    if (name == "const") {
        return Datum::from_1d(name, d, {[](double) { return 1.0; }, [](double) { return 0.0; },
                                        [](double) { return 0.0; }, [](double) { return 0.0; }});
    }
    if (name == "sin") {
        return Datum::from_1d(name, d, {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
                                        [](double x) { return -std::sin(x); }, [](double x) { return -std::cos(x); }});
    }
    if (name == "gauss") {
        return Datum::from_1d(name, d, {
            [](double x) { return std::exp(-x * x); },
            [](double x) { return -2.0 * x * std::exp(-x * x); },
            [](double x) { return (4.0 * x * x - 2.0) * std::exp(-x * x); },
            [](double x) { return (-8.0 * x * x * x + 12.0 * x) * std::exp(-x * x); }});
    }
    if (name == "step") {
        if (!(eps > 0.0)) throw Error("domain", "mollifier width must be positive");
        F bump = [eps](double x) { return std::exp(-x * x / (eps * eps)) / (eps * std::sqrt(std::numbers::pi)); };
        return Datum::from_1d(name, d, {
            [eps](double x) { return 0.5 * (1.0 + std::erf(x / eps)); },
            bump,
            [eps, bump](double x) { return -2.0 * x / (eps * eps) * bump(x); },
            [eps, bump](double x) { return (4.0 * x * x / std::pow(eps, 4) - 2.0 / (eps * eps)) * bump(x); }});
    }
    throw Error("parse", "unknown datum '" + name + "'");
}

std::vector<GridFunction> extract_derivatives(const GridFunction& u, int order) {
    if (order < 1 || order > 3) throw Error("unsupported", "derivatives of order " + std::to_string(order));
    const int core_nodes = u.n - 2 * u.core_margin;
    if (core_nodes < 4 * order + 1) throw Error("grid too coarse", "need at least 4*order+1 core nodes per axis");
    std::vector<GridFunction> out;
    for (const MultiIndex& mi : multi_indices(u.d, order)) {
        GridFunction g = u;
        for (int a = 0; a < u.d; ++a)
            if (mi[a] > 0) g = diff_axis(g, a, mi[a]);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GridFunction> extract_derivatives(const EvolutionResult& res, int order) {
    return extract_derivatives(res.final(), order);
}

GridFunction derivative_norm_sq(const GridFunction& u, int order) {
    auto comps = extract_derivatives(u, order);
    const auto mis = multi_indices(u.d, order);
    GridFunction out = comps[0];
    int margin = 0;
    for (const auto& c : comps) margin = std::max(margin, c.core_margin);
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.core_margin = margin;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const double w = multinomial(mis[i]);
        for (std::size_t k = 0; k < out.size(); ++k) out.values[k] += w * comps[i].values[k] * comps[i].values[k];
    }
    return out;
}

EstimateReport verify_pointwise(const OperatorSpec& spec, const Datum& f, double s, double t, int k, double p,
                                EstimateKind kind, int h, const PointwiseOptions& opt) {
    if (k < 1 || k > 3) throw Error("unsupported", "k must be 1, 2 or 3");
    if (!(t > s)) throw Error("domain", "need t > s");
    if (!(p >= 1.0)) throw Error("domain", "p must be at least 1");
    if (kind == EstimateKind::AAAA && (h < 0 || h > k)) throw Error("domain", "need 0 <= h <= k");
    if (kind == EstimateKind::AAAA && p <= 1.0) throw Error("domain", "aaaa needs p > 1");
    if (kind == EstimateKind::PoiEs) k = 1;
    if (f.d != spec.d) throw Error("domain", "datum dimension differs from the operator's");
    const int lo = kind == EstimateKind::AAAA ? 0 : 1;
    const int hi = kind == EstimateKind::AAAA ? h : k;
    if (f.max_order() < std::max(hi, 0))
        throw Error("insufficient derivative data", "datum '" + f.name + "' needs derivatives up to order " +
                                                        std::to_string(hi));
    const double r = t - s;

    EstimateReport rep;
    const std::string ps = nlohmann::json(p).dump();
    switch (kind) {
        case EstimateKind::AA: rep.id = "aa(k=" + std::to_string(k) + ",p=" + ps + ")"; break;
        case EstimateKind::AAAA:
            rep.id = "aaaa(h=" + std::to_string(h) + ",k=" + std::to_string(k) + ",p=" + ps + ")";
            break;
        case EstimateKind::PoiEs: rep.id = "poi-es(p=" + ps + ")"; break;
    }

    Profile profile = Profile::H4_1;
    if (kind == EstimateKind::AA) profile = p > 1.0 ? Profile::H4_2 : Profile::H4_3;
    if (kind == EstimateKind::PoiEs) profile = Profile::H4_3;
    std::optional<HypothesisReport> hyp;
    bool preconditions = false;
    try {
        hyp = check_hypotheses(spec, profile, opt.window, k);
        preconditions = hyp->satisfied();
        if (!preconditions) rep.notes.push_back("hypothesis profile " + to_string(profile) + " fails on the window");
    } catch (const Error& e) {
        rep.notes.push_back(std::string("hypothesis check not possible: ") + e.what());
    }
    if (!preconditions) rep.status = "preconditions unverified";

    auto constant = [&](const std::string& key, double fallback) {
        if (auto v = spec.params.get(key)) {
            rep.notes.push_back(key + ": declared");
            return *v;
        }
        if (hyp && hyp->inferred.count(key)) {
            rep.notes.push_back(key + ": sampled on the window, not proven");
            return hyp->inferred.at(key);
        }
        return fallback;
    };

    ConstantInputs in;
    in.d = spec.d;
    in.p = p;
    in.k = k;
    in.gamma = spec.params.get_or("gamma", 0.5);
    in.L = spec.params.get_or("L", 1.0);
    in.r0 = constant("r0", 0.0);
    in.C = constant("C", 0.0);
    in.K = constant("K", 0.0);
    double c0 = -INFINITY;
    double nu_min = INFINITY;
    for_each_sample(spec, opt.window, [&](double tt, std::span<const double> x) {
        const double nu = spec.nu(tt, x);
        in.nu_samples.push_back(nu);
        nu_min = std::min(nu_min, nu);
        c0 = std::max(c0, spec.c.scalar(tt, x));
    });
    in.nu0 = spec.params.get_or("nu0", nu_min);
    in.c0 = spec.params.get_or("c0", c0);

    double Gamma = 1.0;
    if (kind == EstimateKind::AA && p > 1.0) {
        if (k >= 2) in.M = constant(k == 2 ? "M2" : "M3", 0.0);
        const ConstantReport phi = phi_pk(in);
        Gamma = std::exp(p * phi.value * r);
        rep.constants["phi"] = phi.value;
        for (const auto& [key, v] : phi.intermediates) rep.constants["phi." + key] = v;
        if (k == 1) {
            const double p0 = spec.params.get_or("p0", 2.0);
            rep.values["p0"] = p0;
            if (p < p0) {
                rep.values["p_below_p0"] = 1.0;
                rep.notes.push_back("p is below p0; the estimate is not covered for this p");
            }
        }
    } else if (kind == EstimateKind::AA) {
        const ConstantReport rate = rate_p1(k, spec.d, in.r0, constant("r", 0.0));
        Gamma = std::exp(rate.value * r);
        rep.constants["rate_p1"] = rate.value;
        for (const auto& [key, v] : rate.intermediates) rep.constants["rate_p1." + key] = v;
    } else if (kind == EstimateKind::AAAA) {
        in.M = constant("M", 0.0);
        const ConstantReport g = gamma_hk(r, h, k, in);
        Gamma = g.value;
        for (const auto& [key, v] : g.intermediates) rep.constants["Gamma." + key] = v;
    } else {
        Gamma = std::exp(p * in.r0 * r);
        rep.constants["sigma"] = in.r0;
    }
    rep.constants["Gamma"] = Gamma;
    rep.constants["r"] = r;
    rep.constants["r0"] = in.r0;
    rep.constants["nu0"] = in.nu0;
    rep.constants["c0"] = in.c0;

    const double half_p = 0.5 * p;
    ScalarFn g = [f, lo, hi, half_p](std::span<const double> x) {
        return std::pow(datum_norm_sq(f, lo, hi, x), half_p);
    };

    Pair fine = run_pair(spec, f, g, s, t, k, p, Gamma, opt.ex, opt.scheme);
    GridFunction margin = margin_field(fine);
    rep.lhs = fine.lhs;
    rep.rhs = fine.rhs;
    rep.worst_margin = core_min(margin);
    const double scale = std::max(fine.rhs.sup_abs(), 1e-300);

    double refinement = 0.0;
    if (opt.refine) {
        SchemeParams coarse_scheme = opt.scheme;
        coarse_scheme.h *= 2.0;
        coarse_scheme.dt *= 2.0;
        Pair coarse = run_pair(spec, f, g, s, t, k, p, Gamma, opt.ex, coarse_scheme);
        GridFunction cm = margin_field(coarse);
        const double R_trust = cm.R - cm.core_margin * cm.h;
        std::array<double, 2> x{};
        for (std::size_t i = 0; i < margin.size(); ++i) {
            if (!margin.in_core(i, margin.core_margin)) continue;
            margin.point(i, std::span<double>(x.data(), margin.d));
            bool inside = true;
            for (int a = 0; a < margin.d; ++a) inside = inside && std::abs(x[a]) <= R_trust + 1e-12;
            if (!inside) continue;
            refinement = std::max(refinement,
                                  std::abs(margin.values[i] - cm.interpolate(std::span<const double>(x.data(), margin.d))));
        }
        rep.values["coarse_worst_margin"] = core_min(cm);
    }
    rep.tolerance = opt.tol_rel * scale + refinement;
    rep.values["scale"] = scale;
    rep.values["refinement_error"] = refinement;
    rep.values["lhs_sup"] = fine.lhs.sup_abs();
    rep.values["rhs_sup"] = fine.rhs.sup_abs();
    rep.values["rhs_reality_excess"] = fine.run_g.reality_excess;
    rep.values["h"] = opt.scheme.h;
    rep.values["dt"] = opt.scheme.dt;
    rep.values["domain_level_f"] = fine.run_f.domain_level;
    rep.values["domain_level_rhs"] = fine.run_g.domain_level;
    rep.values["core_radius"] = margin.R - margin.core_margin * margin.h;
    rep.notes.push_back("sup and min taken over the core region only");
    rep.finalize();
    return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("domain", "slope fit needs matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw Error("domain", "log-log fit needs positive samples");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RateReport verify_smoothing_rate(const OperatorSpec& spec, const ScalarFn& f, double s, int h, int m,
                                 const std::vector<double>& times, const ExhaustionParams& ex,
                                 const SchemeParams& scheme) {
    if (times.size() < 4) throw Error("domain", "smoothing rate needs at least 4 time samples");
    if (h < 0 || h > 3 || m < 1 || m > 3 || m < h) throw Error("domain", "need 0 <= h <= m <= 3, m >= 1");
    std::vector<double> taus = times;
    std::sort(taus.begin(), taus.end());
    if (!(taus.front() > 0.0)) throw Error("domain", "times must be positive");
    std::vector<double> snaps;
    for (double tau : taus) snaps.push_back(s + tau);
    EvolutionResult res = evolution_operator(spec, f, s, s + taus.back(), ex, scheme, snaps);
    RateReport rep;
    rep.h = h;
    rep.m = m;
    rep.times = taus;
    for (double tau : taus) {
        GridFunction n2 = derivative_norm_sq(res.at_time(s + tau), m);
        rep.norms.push_back(std::sqrt(n2.sup_abs()));
    }
    rep.slope = loglog_slope(rep.times, rep.norms);
    rep.predicted = -0.5 * (m - h);
    rep.deviation = std::abs(rep.slope - rep.predicted);
    return rep;
}

nlohmann::json RateReport::to_json() const {
    return {{"id", "stimasem(h=" + std::to_string(h) + ",m=" + std::to_string(m) + ")"},
            {"times", times},
            {"norms", norms},
            {"slope", slope},
            {"predicted", predicted},
            {"deviation", deviation},
            {"region", region}};
}

}  // namespace klab
