// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "klab/catalogue.hpp"
#include "klab/estimate_verifier.hpp"
#include "klab/evolution_solver.hpp"
#include "klab/explicit_constants.hpp"
#include "klab/feller1d.hpp"
#include "klab/inequality_lab.hpp"
#include "klab/measure_flow.hpp"
#include "klab/reference_oracles.hpp"

using namespace klab;

namespace {

constexpr double kOracleSup = 1e-3;
constexpr double kOracleSeconds = 10.0;
constexpr double kMonotoneSlack = 1e-10;
constexpr double kExhaustTarget = 1e-4;
constexpr double kRealityRel = 1e-6;
constexpr double kMass = 1e-6;
constexpr double kLaw = 5e-3;
constexpr double kEstimateRel = 1e-6;
constexpr double kSharpness = 1e-4;
constexpr double kRateHalf = 0.1;
constexpr double kRateOne = 0.15;
constexpr double kProbe = 1e-3;
constexpr double kInvariance = 1e-5;
constexpr double kBurninL1 = 1e-3;
constexpr double kLsiSlack = 1e-6;
constexpr double kPoincare = 1e-6;
constexpr double kHyperRatio = 1e-6;
constexpr double kThreshold = 1e-5;
constexpr double kDecay = 0.05;

struct Outcome {
    bool ok = true;
    std::string detail;
};

ScalarFn on_x0(double (*f)(double)) {
    return [f](std::span<const double> x) { return f(x[0]); };
}
double tanh_fn(double x) { return std::tanh(x); }

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

Outcome ou_oracle_agreement() {
    const auto start = std::chrono::steady_clock::now();
    auto spec = make_ou(1.0, 1.0);
    auto res = evolution_operator(spec, on_x0(tanh_fn), 0.0, 1.0, ExhaustionParams{6, 2, 6, 1e-8, 0.8},
                                  SchemeParams{0.5, 1e-3, 0.02, 2});
    const auto& u = res.final();
    double worst = 0.0;
    for (int i = 0; i < u.n; ++i) {
        const double x = u.coord(i);
        if (std::abs(x) <= 3.0 + 1e-12)
            worst = std::max(worst, std::abs(u.at(i) - ou_evolution(*spec.ou, tanh_fn, 0.0, 1.0, x)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= kOracleSup && secs <= kOracleSeconds, fmt("sup error %.3g on |x|<=3, %.2f s", worst, secs)};
}

Outcome monotone_exhaustion() {
    Outcome out;
    std::string parts;
    struct Case {
        const char* name;
        OperatorSpec spec;
        ScalarFn f;
    };
    std::vector<Case> cases{{"heat f=1", make_heat(), [](std::span<const double>) { return 1.0; }},
                            {"ou f=1/(1+x^2)", make_ou(), [](std::span<const double> x) { return 1.0 / (1.0 + x[0] * x[0]); }}};
    for (auto& c : cases) {
        auto res = evolution_operator(c.spec, c.f, 0.0, 0.5, ExhaustionParams{4, 2, 10, kExhaustTarget, 0.8},
                                      SchemeParams{1.0, 1e-3, 0.05, 0});
        const auto& d = res.level_differences;
        const bool decreasing = std::is_sorted(d.rbegin(), d.rend());
        const bool ok = res.monotone_checked && res.monotone_violation <= kMonotoneSlack && decreasing && !d.empty() &&
                        d.back() <= kExhaustTarget;
        out.ok = out.ok && ok;
        parts += std::string(c.name) + fmt(": violation %.2g, last difference %.2g, %g levels; ", res.monotone_violation,
                                           d.empty() ? NAN : d.back(), static_cast<double>(res.level_radii.size()));
    }
    out.detail = parts;
    return out;
}

Outcome reality_catalogue() {
    using nlohmann::json;
    const std::vector<json> specs{
        {{"catalogue", "ou"}},
        {{"catalogue", "ou"}, {"a", 2.0}, {"q", 0.5}},
        {{"catalogue", "ou_periodic"}},
        {{"catalogue", "heat"}},
        {{"catalogue", "heat"}, {"d", 2}},
        {{"catalogue", "cubic_minus"}},
        {{"catalogue", "power"}, {"eps", 1.0}},
        {{"catalogue", "log"}},
        {{"catalogue", "ou"}, {"potential", {{"type", "constant"}, {"value", -0.5}}}},
        {{"catalogue", "heat"}, {"potential", {{"type", "constant"}, {"value", 0.3}}}},
    };
    double worst = -INFINITY;
    for (const auto& j : specs) {
        auto spec = spec_from_json(j);
        const double h = spec.d == 2 ? 0.05 : 0.02;
        auto res = evolution_operator(spec, [](std::span<const double> x) { return std::tanh(x[0]); }, 0.0, 1.0,
                                      ExhaustionParams{4, 2, 2, 1e-8, 0.8}, SchemeParams{0.5, 1e-3, h, 2});
        worst = std::max(worst, res.reality_excess);
    }
    return {worst <= kRealityRel, fmt("max relative excess %.3g over 10 specs", worst)};
}

Outcome mass_conservation() {
    double worst = 0.0;
    for (auto spec : {make_ou(), make_heat()}) {
        auto res = evolution_operator(spec, [](std::span<const double>) { return 1.0; }, 0.0, 0.5,
                                      ExhaustionParams{4, 2, 8, 1e-7, 0.5}, SchemeParams{0.5, 1e-3, 0.05, 2});
        for (double v : res.final().values) worst = std::max(worst, std::abs(v - 1.0));
    }
    return {worst <= kMass, fmt("sup |G1 - 1| = %.3g on the core", worst)};
}

Outcome evolution_law() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> U(0.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
        double a = U(rng), b = U(rng), c = U(rng);
        double v[3] = {a, b, c};
        std::sort(v, v + 3);
        if (v[2] - v[0] < 0.1) v[2] = v[0] + 0.1;
        auto rep = check_evolution_law(make_ou(), on_x0(tanh_fn), v[0], v[1], v[2], ExhaustionParams{6, 2, 3, 1e-6, 0.8},
                                       SchemeParams{0.5, 1e-3, 0.02, 2}, kLaw);
        worst = std::max(worst, rep.values.at("sup_difference"));
    }
    return {worst <= kLaw, fmt("max sup difference %.3g over 5 triples", worst)};
}

Outcome gradient_estimate() {
    PointwiseOptions opt;
    opt.ex = ExhaustionParams{6, 2, 3, 1e-6, 0.8};
    opt.scheme = SchemeParams{0.5, 1e-3, 0.02, 2};
    auto spec = make_ou();
    auto rep = verify_pointwise(spec, datum_by_name("tanh"), 0.0, 1.0, 1, 2.0, EstimateKind::AA, 0, opt);
    const double scale = rep.values.at("scale");
    auto sharp = verify_pointwise(spec, datum_by_name("x"), 0.0, 1.0, 1, 2.0, EstimateKind::AA, 0, opt);
    double gap = 0.0;
    for (std::size_t i = 0; i < sharp.lhs.size(); ++i)
        if (sharp.lhs.in_core(i, sharp.lhs.core_margin))
            gap = std::max(gap, std::abs(sharp.lhs.values[i] - sharp.rhs.values[i]));
    return {rep.worst_margin >= -kEstimateRel * scale && gap <= kSharpness,
            fmt("worst margin %.3g (scale %.3g), sharpness gap %.3g", rep.worst_margin, scale, gap)};
}

Outcome smoothing_rates() {
    const std::vector<double> times{0.01, 0.02, 0.04, 0.08};
    auto step = datum_by_name("step", 1, 0.02).f();
    bool ok = true;
    std::string detail;
    for (const char* id : {"heat", "ou"}) {
        auto spec = std::string(id) == "heat" ? make_heat() : make_ou();
        for (int m : {1, 2}) {
            auto rr = verify_smoothing_rate(spec, step, 0.0, 0, m, times, ExhaustionParams{3, 1, 2, 1e-6, 0.8},
                                            SchemeParams{0.5, 1e-4, 0.005, 2});
            const double tol = m == 1 ? kRateHalf : kRateOne;
            ok = ok && std::abs(rr.slope - rr.predicted) <= tol;
            detail += std::string(id) + fmt(" m=%g slope %.3f; ", m, rr.slope);
        }
    }
    return {ok, detail};
}

Outcome feller_classifier() {
    const auto plus = classify(feller_problem("const", "cubic_plus"));
    const auto minus = classify(feller_problem("const", "cubic_minus"));
    const auto power = classify(feller_problem("const", "power:1"));
    const double probe = asymptotic_probe(feller_problem("const", "power:1"), 1.5);
    const bool ok = plus.conclusion == "infinitely many bounded solutions" &&
                    minus.conclusion == "unique bounded solution" &&
                    power.Q_plus.verdict == Integrability::Integrable &&
                    power.R_plus.verdict == Integrability::NonIntegrable && std::abs(probe) <= kProbe;
    return {ok, "plus: " + plus.conclusion + "; minus: " + minus.conclusion + "; power:1 Q " +
                    to_string(power.Q_plus.verdict) + ", R " + to_string(power.R_plus.verdict) +
                    fmt("; probe %.3g", probe)};
}

Outcome invariance() {
    auto spec = make_ou();
    auto fam = compute_measures(spec, {0.0, 1.0}, MeasureMethod::Analytic);
    double worst = 0.0;
    for (const auto& f : lsi_family()) {
        auto rep = check_invariance(spec, fam, f.f, 0.0, 1.0);
        worst = std::max(worst, -rep.worst_margin);
    }
    MeasureOptions opt;
    opt.R = 6.0;
    opt.h = 0.02;
    opt.dt = 2e-3;
    auto burn = compute_measures(make_cubic(-1.0), {0.0}, MeasureMethod::Burnin, opt);
    const double l1 = l1_distance_to(burn.densities[0], [](double x) { return std::exp(-std::pow(x, 4) / 4); });
    return {worst <= kInvariance && l1 <= kBurninL1, fmt("worst invariance defect %.3g; cubic burn-in L1 %.3g", worst, l1)};
}

Outcome lsi_poincare() {
    auto fam = compute_measures(make_ou(), {0.0}, MeasureMethod::Analytic);
    bool family_ok = true;
    for (const auto& f : lsi_family()) family_ok = family_ok && check_log_sobolev(fam, 1.0, -1.0, f, 0.0, 2.0).pass;
    auto ext = check_log_sobolev(fam, 1.0, -1.0, exponential_function(0.5), 0.0, 2.0);
    const double slack = ext.values.at("rhs") - ext.values.at("lhs");
    auto lin = check_poincare(fam, affine_function(0.0, 1.0), 0.0);
    const double gap = std::abs(lin.values.at("rhs") - lin.values.at("lhs"));
    return {family_ok && std::abs(slack) <= kLsiSlack && gap <= kPoincare,
            std::string(family_ok ? "family passes" : "family FAILS") +
                fmt("; extremal slack %.3g; Poincare gap on x %.3g", slack, gap)};
}

Outcome hypercontractivity() {
    const double T = hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0);
    auto spec = make_ou();
    auto fam = compute_measures(spec, {0.0, 0.5 * T, T, 1.5 * T, 2.0 * T}, MeasureMethod::Analytic);
    auto prop = Propagator::ou_oracle(spec);
    double worst = 0.0;
    for (const auto& f : lsi_family())
        worst = std::max(worst, check_hypercontractivity(fam, prop, f.f, 0.0, 2.0, 4.0).values.at("ratio_at_1.0T"));
    return {worst <= 1.0 + kHyperRatio && std::abs(T - 0.54931) <= kThreshold,
            fmt("threshold %.6f, max ratio at T %.9f", T, worst)};
}

Outcome decay() {
    const std::vector<double> taus{1.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    std::vector<double> times{0.0};
    times.insert(times.end(), taus.begin(), taus.end());
    auto spec = make_ou();
    auto fam = compute_measures(spec, times, MeasureMethod::Analytic);
    auto prop = Propagator::ou_oracle(spec);
    const double s2 = estimate_decay(fam, prop, [](double x) { return x; }, 0.0, 2.0, taus).slope;
    const double s4 = estimate_decay(fam, prop, [](double x) { return x; }, 0.0, 4.0, taus).slope;
    return {std::abs(s2 + 1.0) <= kDecay && std::abs(s4 + 1.0) <= kDecay && std::abs(s2 - s4) <= kDecay,
            fmt("slopes p=2 %.4f, p=4 %.4f", s2, s4)};
}

Outcome constant_regressions() {
    std::vector<std::pair<double, double>> pairs;  // (computed, hand value)
    ConstantInputs base;
    base.d = 1;
    base.k = 1;
    base.C = 0.0;
    base.M = -0.5;
    base.L = 1.0;
    base.c0 = 0.0;
    base.gamma = 0.5;
    base.nu0 = 1.0;
    base.sup_term = -1.5;
    auto in = base;
    in.p = 2.0;
    pairs.push_back({sigma_kp(in).value, 0.0});
    in.p = 4.0;
    pairs.push_back({sigma_kp(in).value, 0.0});
    in = base;
    in.p = 2.0;
    in.c0 = 1.0;
    in.sup_term = 0.5;
    pairs.push_back({sigma_kp(in).value, 2.5});
    in.p = 4.0;
    pairs.push_back({sigma_kp(in).value, 5.0});
    ConstantInputs phi;
    phi.r0 = -1.0;
    phi.C = 0.0;
    phi.k = 1;
    pairs.push_back({phi_pk(phi).value, -1.0});
    phi.k = 2;
    phi.p = 2.0;
    phi.M = 0.3;
    phi.nu0 = 1.0;
    pairs.push_back({phi_pk(phi).value, 0.3});
    ConstantInputs diss;
    diss.p = 2.0;
    diss.M = -10.0;
    diss.nu_samples = {1.0};
    pairs.push_back({gamma_p23(1.0, diss).value, 9.0});
    pairs.push_back({hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0), 0.5 * std::log(3.0)});
    pairs.push_back({hypercontractivity_threshold(2.0, 5.0, 2.0, 1.0, -2.0), std::log(2.0)});
    pairs.push_back({log_sobolev_constant(2.0, 1.0, -1.0), 2.0});
    pairs.push_back({log_sobolev_constant(4.0, 1.0, -1.0), 8.0});
    pairs.push_back({c_dk(1, 1, 1.0), 0.25});
    pairs.push_back({c_dk(2, 2, 1.0), 3.0});
    pairs.push_back({rate_p1(1, 1, -1.0, 0.0).value, -1.0});
    pairs.push_back({L_prime_k(1, 2), 0.0});
    int exact = 0;
    for (auto [a, b] : pairs) exact += (a == b);
    return {exact == static_cast<int>(pairs.size()) && pairs.size() >= 10,
            fmt("%g of %g evaluations reproduced exactly", exact, static_cast<double>(pairs.size()))};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"OU oracle agreement", ou_oracle_agreement},
        {"monotone domain exhaustion", monotone_exhaustion},
        {"sup bound over a 10-spec catalogue", reality_catalogue},
        {"mass conservation", mass_conservation},
        {"evolution law", evolution_law},
        {"pointwise gradient estimate (aa, k=1, p=2)", gradient_estimate},
        {"smoothing rates", smoothing_rates},
        {"Feller classifier", feller_classifier},
        {"invariance of the measure family", invariance},
        {"log-Sobolev and Poincare", lsi_poincare},
        {"hypercontractivity", hypercontractivity},
        {"decay rate", decay},
        {"constant calculators", constant_regressions},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        while (!o.detail.empty() && (o.detail.back() == ' ' || o.detail.back() == ';')) o.detail.pop_back();
        failures += !o.ok;
        std::printf("%s %2zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
