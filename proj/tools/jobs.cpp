#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "klab/catalogue.hpp"
#include "klab/errors.hpp"
#include "klab/estimate_verifier.hpp"
#include "klab/evolution_solver.hpp"
#include "klab/explicit_constants.hpp"
#include "klab/feller1d.hpp"
#include "klab/inequality_lab.hpp"
#include "klab/measure_flow.hpp"
#include "klab/operator_model.hpp"
#include "klab/reference_oracles.hpp"
#include "runner.hpp"

namespace klab::cli {

namespace {

double number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw Error("parse", std::string("parameter '") + key + "' must be a number");
    return j.at(key).get<double>();
}

int integer(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw Error("parse", std::string("parameter '") + key + "' must be an integer");
    return j.at(key).get<int>();
}

std::string text(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw Error("parse", std::string("parameter '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

bool flag(const json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw Error("parse", std::string("parameter '") + key + "' must be true or false");
    return j.at(key).get<bool>();
}

std::vector<double> numbers(const json& j, const char* key, std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    const json& a = j.at(key);
    if (a.is_number()) return {a.get<double>()};
    if (!a.is_array()) throw Error("parse", std::string("parameter '") + key + "' must be a number list");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw Error("parse", std::string("parameter '") + key + "' must be a number list");
        out.push_back(v.get<double>());
    }
    return out;
}

// Job parameter first, then the scenario's global tolerance table, then the built-in default.
double tolerance(const json& job, const JobContext& ctx, const char* key, double fallback) {
    if (job.contains("tol")) return number(job, "tol", fallback);
    return number(ctx.tolerances, key, fallback);
}

struct Precondition : Error {
    explicit Precondition(const std::string& why) : Error("precondition", why) {}
};

ExhaustionParams exhaustion_from(const json& j, ExhaustionParams ex = {}) {
    ex.R_start = number(j, "R0", ex.R_start);
    ex.R_step = number(j, "step", ex.R_step);
    ex.max_levels = integer(j, "levels", ex.max_levels);
    ex.tol_exhaust = number(j, "tol_exhaust", ex.tol_exhaust);
    ex.core_fraction = number(j, "core_fraction", ex.core_fraction);
    return ex;
}

SchemeParams scheme_from(const json& j, SchemeParams sc = {}) {
    sc.theta = number(j, "theta", sc.theta);
    sc.dt = number(j, "dt", sc.dt);
    sc.h = number(j, "grid_h", sc.h);
    sc.rannacher_steps = integer(j, "rannacher", sc.rannacher_steps);
    return sc;
}

SamplingWindow window_from(const json& j, SamplingWindow w = {}) {
    w.radius = number(j, "radius", w.radius);
    w.space_samples = integer(j, "space_samples", w.space_samples);
    w.time_samples = integer(j, "time_samples", w.time_samples);
    if (j.contains("t0")) w.t0 = number(j, "t0", 0.0);
    if (j.contains("t1")) w.t1 = number(j, "t1", 0.0);
    return w;
}

std::vector<TestFunction> test_functions(const std::string& name) {
    if (name == "family") return lsi_family();
    for (auto& f : lsi_family())
        if (f.name == name) return {f};
    auto colon = name.find(':');
    if (colon != std::string::npos) {
        const std::string head = name.substr(0, colon);
        std::vector<double> args;
        std::stringstream ss(name.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ':')) {
            try {
                args.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw Error("parse", "bad number '" + item + "' in test function '" + name + "'");
            }
        }
        if (head == "exp" && args.size() == 1) return {exponential_function(args[0])};
        if (head == "affine" && args.size() == 2) return {affine_function(args[0], args[1])};
        if (head == "power" && args.size() == 1) return {power_function(static_cast<int>(args[0]))};
        throw Error("parse", "unknown test function '" + name + "'");
    }
    Datum dat = datum_by_name(name, 1);
    auto f0 = dat.parts.at({0});
    auto f1 = dat.parts.at({1});
    return {{name, [f0](double x) { return f0(std::span<const double>(&x, 1)); },
             [f1](double x) { return f1(std::span<const double>(&x, 1)); }}};
}

struct SampledBounds {
    double nu0 = std::numeric_limits<double>::infinity();
    double Lambda0 = 0.0;
};

SampledBounds sample_diffusion(const OperatorSpec& spec, double radius) {
    SampledBounds out;
    SamplingWindow w{radius, 33, 8, std::nullopt, std::nullopt, 1e-3};
    for_each_sample(spec, w, [&](double t, std::span<const double> x) {
        auto q = spec.Q.value(t, x);
        out.nu0 = std::min(out.nu0, min_eigenvalue_sym(q, spec.d));
        out.Lambda0 = std::max(out.Lambda0, max_eigenvalue_sym(q, spec.d));
    });
    return out;
}

// r0 = sup of the largest eigenvalue of the symmetrized Jacobian of b, from the declared value or H3.1(1).
double gradient_rate(const OperatorSpec& spec, const json& job) {
    if (job.contains("r0")) return number(job, "r0", 0.0);
    if (auto v = spec.params.get("r0")) return *v;
    SamplingWindow w{number(job, "radius", 10.0), 65, 8, std::nullopt, std::nullopt, 1e-3};
    auto rep = check_hypotheses(spec, Profile::H3_1, w, 1);
    auto it = rep.inferred.find("r0");
    if (it == rep.inferred.end()) throw Precondition("r0 could not be inferred on the sampling window");
    return it->second;
}

double diffusion_sup(const OperatorSpec& spec, const json& job) {
    if (job.contains("Lambda0")) return number(job, "Lambda0", 1.0);
    if (auto v = spec.params.get("Lambda0")) return *v;
    return sample_diffusion(spec, number(job, "radius", 10.0)).Lambda0;
}

MeasureFamily measures_for(const OperatorSpec& spec, const json& job, std::vector<double> times) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                times.end());
    const std::string method = text(job, "method", spec.ou ? "analytic" : "burnin");
    MeasureOptions mo;
    mo.R = number(job, "measure_R", mo.R);
    mo.h = number(job, "measure_h", mo.h);
    mo.dt = number(job, "measure_dt", mo.dt);
    mo.burn_length = number(job, "burn_length", mo.burn_length);
    mo.tol_forget = number(job, "tol_forget", mo.tol_forget);
    mo.max_retries = integer(job, "max_retries", mo.max_retries);
    if (method == "analytic") {
        if (!spec.ou) throw Precondition("analytic measures need a 1-D Ornstein-Uhlenbeck operator");
        return compute_measures(spec, times, MeasureMethod::Analytic, mo);
    }
    if (method == "burnin") return compute_measures(spec, times, MeasureMethod::Burnin, mo);
    throw Error("parse", "method must be 'analytic' or 'burnin'");
}

Propagator propagator_for(const OperatorSpec& spec, const json& job) {
    const std::string kind = text(job, "propagator", spec.ou ? "oracle" : "solver");
    if (kind == "oracle") {
        if (!spec.ou) throw Precondition("the closed-form propagator needs a 1-D Ornstein-Uhlenbeck operator");
        return Propagator::ou_oracle(spec);
    }
    if (kind == "solver")
        return Propagator::solver(spec, exhaustion_from(job, ExhaustionParams{10.0, 2.0, 6, 1e-8, 0.8}),
                                  scheme_from(job));
    throw Error("parse", "propagator must be 'oracle' or 'solver'");
}

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void set_pass(JobOutcome& out, bool pass) { out.status = pass ? "pass" : "fail"; }

void job_solve(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    Datum f = datum_by_name(text(job, "f", "tanh"), spec.d, number(job, "eps", 0.02));
    const double s = number(job, "s", 0.0), t = number(job, "t", 1.0);
    ExhaustionParams ex = exhaustion_from(job);
    SchemeParams sc = scheme_from(job);
    std::vector<double> snaps = numbers(job, "snapshots", {});
    EvolutionResult res = evolution_operator(spec, f.f(), s, t, ex, sc, snaps);

    json r;
    r["status"] = res.status;
    r["domain_level"] = res.domain_level;
    r["level_radii"] = res.level_radii;
    r["level_differences"] = res.level_differences;
    r["core_radius"] = res.final().R;
    r["h"] = res.h;
    r["dt"] = res.dt;
    r["theta"] = res.theta;
    r["reality_excess"] = res.reality_excess;
    r["max_peclet"] = res.max_peclet;
    r["maximum_principle"] = res.maximum_principle;
    if (res.monotone_checked) r["monotone_violation"] = res.monotone_violation;
    r["warnings"] = res.warnings;
    r["snapshot_times"] = res.t_grid;

    const double reality_tol = tolerance(job, ctx, "reality", 1e-6);
    bool pass = res.reality_excess <= reality_tol && res.status != "exhaustion not converged";
    if (spec.ou && spec.d == 1 && flag(job, "oracle", true)) {
        const double radius = std::min(number(job, "oracle_radius", 3.0), res.final().R);
        const GridFunction& u = res.final();
        auto g = f.parts.at({0});
        Fn1 f1 = [g](double x) { return g(std::span<const double>(&x, 1)); };
        double err = 0.0;
        for (int i = 0; i < u.n; ++i) {
            const double x = u.coord(i);
            if (std::abs(x) > radius + 1e-12) continue;
            err = std::max(err, std::abs(u.at(i) - ou_evolution(*spec.ou, f1, s, t, x)));
        }
        const double tol = tolerance(job, ctx, "oracle", 1e-3);
        r["oracle"] = {{"sup_error", err}, {"radius", radius}, {"tolerance", tol}};
        pass = pass && err <= tol;
    }
    out.report = r;
    set_pass(out, pass);

    std::ostringstream csv;
    export_csv(res, csv);
    out.exports.push_back({"solution.csv", csv.str()});
    if (flag(job, "binary", false)) {
        std::ostringstream bin(std::ios::binary);
        export_binary(res, bin);
        out.exports.push_back({"solution.bin", bin.str()});
    }
}

void job_law(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    Datum f = datum_by_name(text(job, "f", "tanh"), spec.d, number(job, "eps", 0.02));
    std::vector<std::array<double, 3>> triples;
    if (job.contains("triples")) {
        for (const auto& tr : job.at("triples")) {
            auto v = tr.get<std::vector<double>>();
            if (v.size() != 3) throw Error("parse", "each triple needs s, r, t");
            triples.push_back({v[0], v[1], v[2]});
        }
    } else {
        std::mt19937_64 rng(ctx.seed + static_cast<unsigned long long>(integer(job, "seed_offset", 0)));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int i = 0, n = integer(job, "count", 5); i < n; ++i) {
            const double s = 0.5 * U(rng);
            const double t = s + 0.3 + 0.7 * U(rng);
            triples.push_back({s, s + U(rng) * (t - s), t});
        }
    }
    const double tol = tolerance(job, ctx, "law", 5e-3);
    ExhaustionParams ex = exhaustion_from(job);
    SchemeParams sc = scheme_from(job);
    json rows = json::array();
    bool pass = true;
    for (auto [s, r, t] : triples) {
        auto rep = check_evolution_law(spec, f.f(), s, r, t, ex, sc, tol);
        rows.push_back(rep.to_json());
        pass = pass && rep.pass;
    }
    out.report = {{"tolerance", tol}, {"checks", rows}};
    set_pass(out, pass);
}

void job_hypotheses(const json& job, const OperatorSpec& spec, const JobContext&, JobOutcome& out) {
    const std::string profile = text(job, "profile", "H3.1");
    SamplingWindow w = window_from(job);
    HypothesisReport rep = profile == "Lp"
                               ? check_lp_preservation(spec, w)
                               : check_hypotheses(spec, profile_from_string(profile), w, integer(job, "k", 1));
    out.report = rep.to_json();
    if (flag(job, "expect_satisfied", true))
        set_pass(out, rep.satisfied());
    else
        out.status = "computed";
}

EstimateKind estimate_kind(const std::string& e) {
    if (e == "aa") return EstimateKind::AA;
    if (e == "aaaa") return EstimateKind::AAAA;
    if (e == "poi-es") return EstimateKind::PoiEs;
    throw Error("parse", "estimate must be aa, aaaa, stimasem or poi-es");
}

void job_verify(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const std::string est = text(job, "estimate", "aa");
    const int k = integer(job, "k", 1);
    const int h = integer(job, "h", 0);
    const double p = number(job, "p", 2.0);
    const double s = number(job, "s", 0.0);

    if (est == "stimasem") {
        const int m = integer(job, "m", k);
        Datum f = datum_by_name(text(job, "f", "step"), spec.d, number(job, "eps", 0.02));
        SchemeParams sc = scheme_from(job, SchemeParams{0.5, 1e-4, 0.005, 2});
        auto times = numbers(job, "times", {0.01, 0.02, 0.04, 0.08});
        RateReport rr = verify_smoothing_rate(spec, f.f(), s, h, m, times, exhaustion_from(job), sc);
        const double tol = job.contains("tol") ? number(job, "tol", 0.1)
                                               : (rr.predicted >= -0.5 ? number(ctx.tolerances, "rate_half", 0.1)
                                                                       : number(ctx.tolerances, "rate_one", 0.15));
        out.report = rr.to_json();
        out.report["id"] = "stimasem(h=" + std::to_string(h) + ",m=" + std::to_string(m) + ")";
        out.report["tolerance"] = tol;
        set_pass(out, rr.deviation <= tol);
        std::string csv = "tau,norm\n";
        for (std::size_t i = 0; i < rr.times.size(); ++i) csv += csv_number(rr.times[i]) + "," + csv_number(rr.norms[i]) + "\n";
        out.exports.push_back({"rate.csv", csv});
        return;
    }

    EstimateKind kind = estimate_kind(est);
    if (p < 1.0 || (kind == EstimateKind::AAAA && p <= 1.0)) throw Precondition("p ≤ 1 unsupported");
    Datum f = datum_by_name(text(job, "f", "tanh"), spec.d, number(job, "eps", 0.02));
    PointwiseOptions opt;
    opt.ex = exhaustion_from(job, opt.ex);
    opt.scheme = scheme_from(job, opt.scheme);
    opt.window = window_from(job, opt.window);
    opt.tol_rel = tolerance(job, ctx, "estimate_rel", opt.tol_rel);
    opt.refine = flag(job, "refine", true);
    EstimateReport rep = verify_pointwise(spec, f, s, number(job, "t", 1.0), k, p, kind, h, opt);
    out.report = rep.to_json();
    set_pass(out, rep.pass);
    std::ostringstream csv;
    rep.write_csv(csv);
    out.exports.push_back({"pointwise.csv", csv.str()});
}

ConstantInputs constant_inputs(const json& job, const OperatorSpec& spec) {
    ConstantInputs in;
    in.d = integer(job, "d", spec.d);
    in.p = number(job, "p", in.p);
    in.k = integer(job, "k", in.k);
    in.gamma = number(job, "gamma", spec.params.get_or("gamma", in.gamma));
    in.nu0 = number(job, "nu0", spec.params.get_or("nu0", in.nu0));
    in.c0 = number(job, "c0", spec.params.get_or("c0", in.c0));
    in.M = number(job, "M", spec.params.get_or("M", in.M));
    in.L = number(job, "L", spec.params.get_or("L", in.L));
    in.K = number(job, "K", spec.params.get_or("K", in.K));
    in.C = number(job, "C", spec.params.get_or("C", in.C));
    in.r0 = number(job, "r0", spec.params.get_or("r0", in.r0));
    in.Lambda0 = number(job, "Lambda0", spec.params.get_or("Lambda0", in.Lambda0));
    in.alpha = number(job, "alpha", in.alpha);
    in.K1p = number(job, "K1p", in.K1p);
    in.K2p = number(job, "K2p", in.K2p);
    if (job.contains("sup_term")) in.sup_term = number(job, "sup_term", 0.0);
    if (job.contains("nu_samples")) in.nu_samples = numbers(job, "nu_samples", {});
    if (!in.sup_term && in.nu_samples.empty()) {
        SamplingWindow w{number(job, "radius", 10.0), 33, 8, std::nullopt, std::nullopt, 1e-3};
        for_each_sample(spec, w, [&](double t, std::span<const double> x) { in.nu_samples.push_back(spec.nu(t, x)); });
    }
    return in;
}

void job_constants(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const std::string which = text(job, "constant", "sigma_kp");
    ConstantInputs in = constant_inputs(job, spec);
    ConstantReport rep;
    if (which == "sigma_kp") {
        rep = sigma_kp(in);
    } else if (which == "phi_pk") {
        rep = phi_pk(in);
    } else if (which == "gamma_p23") {
        rep = gamma_p23(number(job, "r", 1.0), in);
    } else if (which == "gamma_hk") {
        rep = gamma_hk(number(job, "r", 1.0), integer(job, "h", 0), in.k, in);
    } else if (which == "rate_p1") {
        rep = rate_p1(in.k, in.d, in.r0, number(job, "r", 0.0));
    } else if (which == "hypercontractivity_threshold") {
        rep.id = which;
        rep.value = hypercontractivity_threshold(in.p, number(job, "q", 4.0), in.Lambda0, in.nu0, in.r0);
        rep.intermediates = {{"p", in.p}, {"q", number(job, "q", 4.0)}, {"Lambda0", in.Lambda0}, {"nu0", in.nu0}, {"r0", in.r0}};
    } else if (which == "log_sobolev_constant") {
        rep.id = which;
        rep.value = log_sobolev_constant(in.p, in.Lambda0, in.r0);
        rep.intermediates = {{"p", in.p}, {"Lambda0", in.Lambda0}, {"r0", in.r0}};
    } else {
        throw Error("parse", "unknown constant '" + which + "'");
    }
    out.report = rep.to_json();
    if (job.contains("expected")) {
        const double expected = number(job, "expected", 0.0);
        const double tol = tolerance(job, ctx, "constants", 0.0);
        out.report["expected"] = expected;
        out.report["tolerance"] = tol;
        set_pass(out, std::abs(rep.value - expected) <= tol);
    }
}

std::vector<double> cutoffs_from(const json& job) {
    if (!job.contains("cutoffs")) return default_feller_cutoffs();
    if (job.at("cutoffs").is_string()) {
        std::vector<double> out;
        std::stringstream ss(job.at("cutoffs").get<std::string>());
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
        return out;
    }
    return numbers(job, "cutoffs", {});
}

void job_feller(const json& job, const OperatorSpec&, const JobContext&, JobOutcome& out) {
    FellerProblem prob = feller_problem(text(job, "q", "const"), text(job, "b", "zero"));
    prob.lambda = number(job, "lambda", prob.lambda);
    FellerVerdict v = classify(prob, cutoffs_from(job));
    out.report = v.to_json();
    out.report["problem"] = prob.name;
    if (job.contains("probe_weight")) {
        const double w = number(job, "probe_weight", 1.5);
        const double lim = asymptotic_probe(prob, w);
        out.report["asymptotic_probe"] = {{"weight", w}, {"limit", std::isfinite(lim) ? json(lim) : json("inf")}};
    }
    if (job.contains("expect")) {
        const std::string want = text(job, "expect", "");
        set_pass(out, v.conclusion == want);
    }
}

void job_measures(const json& job, const OperatorSpec& spec, const JobContext&, JobOutcome& out) {
    MeasureFamily fam = measures_for(spec, job, numbers(job, "times", {0.0, 1.0}));
    json r;
    r["provenance"] = fam.provenance;
    r["times"] = fam.times;
    r["notes"] = fam.notes;
    if (fam.analytic()) {
        json g = json::array();
        for (const auto& d : fam.gaussians) g.push_back({{"mean", d.mean}, {"var", d.var}});
        r["gaussians"] = g;
    } else {
        r["burnin_start"] = fam.burnin_s0;
        r["forgetting_gap"] = fam.forgetting_gap;
        r["gap_monotone"] = fam.gap_monotone;
        r["retries"] = fam.retries;
    }
    json masses = json::array();
    for (std::size_t i = 0; i < fam.times.size(); ++i)
        masses.push_back(integrate_against(fam, i, [](double) { return 1.0; }));
    r["mass"] = masses;
    r["tightness"] = check_tightness(fam, numbers(job, "radii", {1.0, 2.0, 4.0}), number(job, "epsilon", 1e-3)).to_json();
    out.report = r;

    std::ostringstream csv;
    csv.precision(17);
    csv << "x";
    for (double t : fam.times) csv << ",t=" << t;
    csv << '\n';
    const GridFunction& g0 = fam.densities.front();
    for (int i = 0; i < g0.n; ++i) {
        csv << g0.coord(i);
        for (const auto& d : fam.densities) csv << ',' << d.at(i);
        csv << '\n';
    }
    out.exports.push_back({"densities.csv", csv.str()});
}

void job_invariance(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const double s = number(job, "s", 0.0), t = number(job, "t", 1.0);
    MeasureFamily fam = measures_for(spec, job, {s, t});
    InvarianceOptions opt;
    if (job.contains("tol") || ctx.tolerances.contains("invariance"))
        opt.tol = tolerance(job, ctx, "invariance", 1e-5);
    opt.ex = exhaustion_from(job, opt.ex);
    opt.scheme = scheme_from(job, opt.scheme);
    json rows = json::array();
    bool pass = true;
    double worst = 0.0;
    for (const auto& f : test_functions(text(job, "f", "family"))) {
        EstimateReport rep = check_invariance(spec, fam, f.f, s, t, opt);
        json row = rep.to_json();
        row["function"] = f.name;
        rows.push_back(row);
        pass = pass && rep.pass;
        worst = std::max(worst, std::abs(rep.worst_margin));
    }
    out.report = {{"provenance", fam.provenance}, {"worst_difference", worst}, {"checks", rows}};
    set_pass(out, pass);
}

void job_lsi(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const double s = number(job, "s", 0.0), p = number(job, "p", 2.0);
    if (p < 2.0) throw Precondition("log-Sobolev is checked for p >= 2");
    const double r0 = gradient_rate(spec, job);
    const double Lambda0 = diffusion_sup(spec, job);
    if (!(r0 < 0.0)) throw Precondition("gradient estimate of negative type required (r0 < 0)");
    MeasureFamily fam = measures_for(spec, job, {s});
    const double tol = tolerance(job, ctx, "lsi", 1e-6);
    json rows = json::array();
    bool pass = true;
    for (const auto& f : test_functions(text(job, "f", "family"))) {
        EstimateReport rep = check_log_sobolev(fam, Lambda0, r0, f, s, p, tol);
        json row = rep.to_json();
        row["function"] = f.name;
        rows.push_back(row);
        pass = pass && rep.pass;
    }
    out.report = {{"C_p", log_sobolev_constant(p, Lambda0, r0)}, {"r0", r0}, {"Lambda0", Lambda0},
                  {"provenance", fam.provenance}, {"checks", rows}};
    set_pass(out, pass);
}

void job_poincare(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const double s = number(job, "s", 0.0);
    double C2 = 0.0;
    if (job.contains("C2")) {
        C2 = number(job, "C2", 2.0);
    } else {
        const double r0 = gradient_rate(spec, job);
        if (!(r0 < 0.0)) throw Precondition("gradient estimate of negative type required (r0 < 0)");
        C2 = log_sobolev_constant(2.0, diffusion_sup(spec, job), r0);
    }
    MeasureFamily fam = measures_for(spec, job, {s});
    const double tol = tolerance(job, ctx, "poincare", 1e-6);
    json rows = json::array();
    bool pass = true;
    for (const auto& f : test_functions(text(job, "f", "family"))) {
        EstimateReport rep = check_poincare(fam, f, s, C2, tol);
        json row = rep.to_json();
        row["function"] = f.name;
        rows.push_back(row);
        pass = pass && rep.pass;
    }
    out.report = {{"C2", C2}, {"factor", C2 / 2.0}, {"provenance", fam.provenance}, {"checks", rows}};
    set_pass(out, pass);
}

void job_hyper(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const double s = number(job, "s", 0.0), p = number(job, "p", 2.0), q = number(job, "q", 4.0);
    if (!(1.0 < p && p < q)) throw Precondition("hypercontractivity needs 1 < p < q");
    HyperParams hp;
    hp.r0 = gradient_rate(spec, job);
    if (!(hp.r0 < 0.0)) throw Precondition("gradient estimate of negative type required (r0 < 0)");
    hp.Lambda0 = diffusion_sup(spec, job);
    hp.nu0 = job.contains("nu0") ? number(job, "nu0", 1.0)
                                 : spec.params.get_or("nu0", sample_diffusion(spec, number(job, "radius", 10.0)).nu0);
    hp.tol = tolerance(job, ctx, "hyper", 1e-6);
    const double T = hypercontractivity_threshold(p, q, hp.Lambda0, hp.nu0, hp.r0);
    MeasureFamily fam = measures_for(spec, job, {s, s + 0.5 * T, s + T, s + 1.5 * T, s + 2.0 * T});
    Propagator prop = propagator_for(spec, job);
    json rows = json::array();
    bool pass = true;
    std::string csv = "function,t_minus_s,ratio\n";
    for (const auto& f : test_functions(text(job, "f", "family"))) {
        EstimateReport rep = check_hypercontractivity(fam, prop, f.f, s, p, q, hp);
        json row = rep.to_json();
        row["function"] = f.name;
        rows.push_back(row);
        pass = pass && rep.pass;
        for (double m : {0.5, 1.0, 1.5, 2.0}) {
            std::ostringstream key;
            key << "ratio_at_" << std::fixed;
            key.precision(1);
            key << m << "T";
            auto it = rep.values.find(key.str());
            if (it != rep.values.end()) csv += "\"" + f.name + "\"," + csv_number(m * T) + "," + csv_number(it->second) + "\n";
        }
    }
    out.report = {{"threshold", T}, {"propagator", prop.label()}, {"provenance", fam.provenance}, {"checks", rows}};
    set_pass(out, pass);
    out.exports.push_back({"hyper.csv", csv});
}

void job_super(const json& job, const OperatorSpec& spec, const JobContext&, JobOutcome& out) {
    json r;
    if (spec.d == 1 && spec.c_zero) {
        MeasureFamily fam = measures_for(spec, job, numbers(job, "times", {0.0, 1.0}));
        std::optional<double> delta;
        if (job.contains("delta")) delta = number(job, "delta", 0.0);
        r["probe"] = supercontractivity_probe(fam, numbers(job, "lambdas", {0.01, 0.1, 0.25, 0.5, 1.0}), delta).to_json();
        r["provenance"] = fam.provenance;
    }
    SamplingWindow w = window_from(job, SamplingWindow{1e4, 128, 8, std::nullopt, std::nullopt, 1e-3});
    r["drift_growth"] = classify_drift_growth(spec, w).to_json();
    out.report = r;
}

void job_decay(const json& job, const OperatorSpec& spec, const JobContext& ctx, JobOutcome& out) {
    const double s = number(job, "s", 0.0);
    auto taus = numbers(job, "taus", {1.0, 2.0, 4.0, 6.0, 8.0, 10.0});
    auto ps = numbers(job, "p", {2.0});
    std::vector<double> times{s};
    for (double tau : taus) times.push_back(s + tau);
    MeasureFamily fam = measures_for(spec, job, times);
    Propagator prop = propagator_for(spec, job);
    auto fs = test_functions(text(job, "f", "x"));
    if (fs.size() != 1) throw Error("parse", "decay takes a single test function");
    json rows = json::array();
    std::vector<double> slopes;
    std::string csv = "p,tau,norm,grad_norm\n";
    for (double p : ps) {
        DecayEstimate de = estimate_decay(fam, prop, fs[0].f, s, p, taus);
        rows.push_back(de.to_json());
        slopes.push_back(de.slope);
        for (std::size_t i = 0; i < de.times.size(); ++i)
            csv += csv_number(p) + "," + csv_number(de.times[i]) + "," + csv_number(de.norms[i]) + "," +
                   csv_number(de.grad_norms[i]) + "\n";
    }
    const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
    out.report = {{"propagator", prop.label()}, {"provenance", fam.provenance}, {"estimates", rows},
                  {"p_spread", *hi - *lo}};
    if (job.contains("expected_slope")) {
        const double want = number(job, "expected_slope", -1.0);
        const double tol = tolerance(job, ctx, "decay", 0.05);
        bool pass = *hi - *lo <= tol;
        for (double sl : slopes) pass = pass && std::abs(sl - want) <= tol;
        out.report["expected_slope"] = want;
        out.report["tolerance"] = tol;
        set_pass(out, pass);
    }
    out.exports.push_back({"decay.csv", csv});
}

using Handler = void (*)(const json&, const OperatorSpec&, const JobContext&, JobOutcome&);

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table = {
        {"solve", job_solve},       {"law", job_law},           {"hypotheses", job_hypotheses},
        {"verify", job_verify},     {"constants", job_constants}, {"feller", job_feller},
        {"measures", job_measures}, {"invariance", job_invariance}, {"lsi", job_lsi},
        {"poincare", job_poincare}, {"hyper", job_hyper},       {"super", job_super},
        {"decay", job_decay}};
    return table;
}

bool is_precondition_kind(const std::string& kind) {
    return kind == "precondition" || kind == "unsupported" || kind == "insufficient derivative data";
}

}  // namespace

std::vector<std::string> job_operations() {
    std::vector<std::string> ops;
    for (const auto& [name, h] : handlers()) ops.push_back(name);
    return ops;
}

json spec_description(const std::string& arg) {
    if (!arg.empty() && arg.front() == '{') return json::parse(arg);
    std::error_code ec;
    if (std::filesystem::is_regular_file(arg, ec)) {
        std::ifstream in(arg);
        return json::parse(in);
    }
    json j;
    const auto colon = arg.find(':');
    j["catalogue"] = arg.substr(0, colon);
    if (colon != std::string::npos) {
        std::stringstream ss(arg.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw Error("parse", "expected key=value in '" + item + "'");
            try {
                j[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            } catch (const std::exception&) {
                throw Error("parse", "bad number in '" + item + "'");
            }
        }
    }
    return j;
}

OperatorSpec resolve_spec(const json& description) {
    if (description.is_string()) return spec_from_json(spec_description(description.get<std::string>()));
    return spec_from_json(description);
}

JobOutcome run_job(const json& job, const JobContext& ctx) {
    JobOutcome out;
    out.op = job.value("op", std::string());
    out.id = job.value("id", out.op);
    const auto start = std::chrono::steady_clock::now();
    try {
        auto it = handlers().find(out.op);
        if (it == handlers().end()) throw Error("parse", "unknown operation '" + out.op + "'");
        const OperatorSpec spec = resolve_spec(job.contains("spec") ? job.at("spec") : ctx.spec_json);
        it->second(job, spec, ctx, out);
    } catch (const Error& e) {
        out.exports.clear();
        if (is_precondition_kind(e.kind())) {
            out.status = "skipped: precondition";
            out.report = {{"reason", e.what()}};
        } else {
            out.status = "error";
            out.report = {{"error", e.kind()}, {"message", e.what()}};
        }
    } catch (const std::exception& e) {
        out.exports.clear();
        out.status = "error";
        out.report = {{"error", "exception"}, {"message", e.what()}};
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace klab::cli
