#include "klab/feller1d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "klab/errors.hpp"

namespace klab {

namespace {

constexpr double kMaxCells = 4e6;

// Five-point Gauss-Legendre rule on [0, 1].
constexpr std::array<double, 5> kNodes = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                                          0.95308992296933200};
constexpr std::array<double, 5> kWeights = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                            0.23931433524968324, 0.11846344252809454};

double log_add(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log of the integral of exp(f) over a cell of width w where f is linear from fa to fb.
double log_exp_linear(double fa, double fb, double w) {
    const double d = fb - fa;
    if (std::abs(d) < 1e-8) return std::log(w) + 0.5 * (fa + fb);
    const double m = std::max(fa, fb);
    return m + std::log(w * std::abs(std::expm1(-std::abs(d))) / std::abs(d));
}

// Tabulates, along one half-line from 0 to sign*X, with |.| magnitudes for x < 0:
//   L = -int_0^x b/q      (log W)
//   logS = log |int_0^x exp(-L)/q|,   logP = log |int_0^x exp(L)|
struct HalfLine {
    std::vector<double> x, L, logS, logP, logq;
    bool ok = true;
    std::string diagnostic;

    double logR(std::size_t i) const { return L[i] + logS[i]; }
    double logQ(std::size_t i) const { return logP[i] - logq[i] - L[i]; }
    std::size_t index_of(double xv) const {
        auto it = std::lower_bound(x.begin(), x.end(), xv - 1e-12, [](double a, double v) { return std::abs(a) < std::abs(v); });
        return static_cast<std::size_t>(it - x.begin());
    }
};

HalfLine build(const FellerProblem& pb, double sign, double X, const std::vector<double>& stops) {
    HalfLine hl;
    auto ratio = [&](double y) { return pb.b(y) / pb.q(y); };
    hl.x.push_back(0.0);
    hl.L.push_back(0.0);
    hl.logS.push_back(-INFINITY);
    hl.logP.push_back(-INFINITY);
    hl.logq.push_back(std::log(pb.q(0.0)));
    std::vector<double> targets = stops;
    std::sort(targets.begin(), targets.end());
    std::size_t next_stop = 0;
    double a = 0.0;
    double La = 0.0;
    double dLa = -ratio(0.0);
    while (a < X - 1e-14) {
        double w = std::min(0.01, 0.1 / std::max(std::abs(dLa), 1e-300));
        while (next_stop < targets.size() && targets[next_stop] <= a + 1e-14) ++next_stop;
        if (next_stop < targets.size()) w = std::min(w, targets[next_stop] - a);
        w = std::min(w, X - a);
        if (hl.x.size() > kMaxCells) {
            hl.ok = false;
            hl.diagnostic = "cell budget exhausted before the last cutoff";
            return hl;
        }
        const double bx = a + w;
        // L over the cell from the Gauss rule, then a cubic Hermite model of L inside it.
        std::array<double, 5> yv{}, dLv{}, qv{};
        double dL_int = 0.0;
        for (int k = 0; k < 5; ++k) {
            yv[k] = sign * (a + kNodes[k] * w);
            qv[k] = pb.q(yv[k]);
            dLv[k] = -sign * pb.b(yv[k]) / qv[k];
            dL_int += kWeights[k] * dLv[k] * w;
        }
        const double Lb = La + dL_int;
        const double dLb = -sign * ratio(sign * bx);
        auto hermite = [&](double s) {
            const double s2 = s * s, s3 = s2 * s;
            return (2 * s3 - 3 * s2 + 1) * La + (s3 - 2 * s2 + s) * w * dLa + (-2 * s3 + 3 * s2) * Lb +
                   (s3 - s2) * w * dLb;
        };
        double lS = -INFINITY, lP = -INFINITY;
        for (int k = 0; k < 5; ++k) {
            const double Ly = hermite(kNodes[k]);
            lS = log_add(lS, std::log(kWeights[k] * w / qv[k]) - Ly);
            lP = log_add(lP, std::log(kWeights[k] * w) + Ly);
        }
        a = bx;
        La = Lb;
        dLa = dLb;
        hl.x.push_back(a);
        hl.L.push_back(La);
        hl.logS.push_back(log_add(hl.logS.back(), lS));
        hl.logP.push_back(log_add(hl.logP.back(), lP));
        hl.logq.push_back(std::log(pb.q(sign * a)));
        if (!std::isfinite(La)) {
            hl.ok = false;
            hl.diagnostic = "log W is not finite at |x| = " + std::to_string(a);
            return hl;
        }
    }
    return hl;
}

double aitken(double a, double b, double c) {
    const double den = (c - b) - (b - a);
    if (std::abs(den) < 1e-14 * std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300})) return c;
    return c - (c - b) * (c - b) / den;
}

TailEvidence tail(const HalfLine& hl, const std::vector<double>& cutoffs, bool use_R) {
    TailEvidence ev;
    ev.cutoffs = cutoffs;
    if (!hl.ok) {
        ev.diagnostic = hl.diagnostic;
        return ev;
    }
    auto logf = [&](std::size_t i) { return use_R ? hl.logR(i) : hl.logQ(i); };
    const std::size_t start = hl.index_of(1.0);
    double acc = -INFINITY;
    std::size_t i = start;
    for (double X : cutoffs) {
        const std::size_t end = hl.index_of(X);
        for (; i < end; ++i) acc = log_add(acc, log_exp_linear(logf(i), logf(i + 1), hl.x[i + 1] - hl.x[i]));
        ev.log_tail.push_back(acc);
        ev.log_value.push_back(logf(end));
    }
    const std::size_t n = cutoffs.size();
    const double l1 = ev.log_value[n - 2], l2 = ev.log_value[n - 1];
    if (!std::isfinite(l1) || !std::isfinite(l2)) {
        ev.diagnostic = "integrand not finite in log domain";
        return ev;
    }
    ev.exponent = -(l2 - l1) / std::log(cutoffs[n - 1] / cutoffs[n - 2]);
    if (ev.exponent > 1.2) ev.verdict = Integrability::Integrable;
    else if (ev.exponent < 0.8) ev.verdict = Integrability::NonIntegrable;
    if (ev.verdict == Integrability::Integrable && n >= 3 && ev.log_tail[n - 1] < 700.0)
        ev.extrapolated = aitken(std::exp(ev.log_tail[n - 3]), std::exp(ev.log_tail[n - 2]), std::exp(ev.log_tail[n - 1]));
    return ev;
}

nlohmann::json evidence_json(const TailEvidence& e) {
    nlohmann::json j = {{"verdict", to_string(e.verdict)}, {"cutoffs", e.cutoffs}, {"log_tail", e.log_tail},
                        {"log_integrand", e.log_value}, {"exponent", e.exponent}};
    if (e.extrapolated) j["extrapolated"] = *e.extrapolated;
    if (!e.diagnostic.empty()) j["diagnostic"] = e.diagnostic;
    return j;
}

double parse_param(const std::string& id, std::string& head, double fallback) {
    const auto colon = id.find(':');
    head = id.substr(0, colon);
    if (colon == std::string::npos) return fallback;
    try {
        return std::stod(id.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error("parse", "bad parameter in '" + id + "'");
    }
}

}  // namespace

std::string to_string(Integrability v) {
    switch (v) {
        case Integrability::Integrable: return "integrable";
        case Integrability::NonIntegrable: return "non-integrable";
        case Integrability::Undecided: return "undecided";
    }
    return "?";
}

FellerProblem feller_problem(const std::string& q_id, const std::string& b_id) {
    FellerProblem pb;
    std::string qh, bh;
    const double qv = parse_param(q_id, qh, 1.0);
    if (qh != "const" || !(qv > 0.0)) throw Error("parse", "diffusion must be const[:v] with v > 0");
    pb.q = [qv](double) { return qv; };
    if (b_id == "zero") {
        pb.b = [](double) { return 0.0; };
    } else {
        const double k = parse_param(b_id, bh, 1.0);
        if (bh == "cubic_plus") pb.b = [k](double x) { return k * x * x * x; };
        else if (bh == "cubic_minus") pb.b = [k](double x) { return -k * x * x * x; };
        else if (bh == "power") pb.b = [k](double x) { return -x * std::pow(std::abs(x), k); };
        else if (bh == "linear") pb.b = [k](double x) { return -k * x; };
        else throw Error("parse", "unknown drift '" + b_id + "'");
    }
    pb.name = "q=" + q_id + ",b=" + b_id;
    return pb;
}

std::vector<double> default_feller_cutoffs() { return {2, 3, 4, 5, 6, 8}; }

FellerVerdict classify(const FellerProblem& problem, const std::vector<double>& cutoffs) {
    if (cutoffs.size() < 4) throw Error("domain", "classification needs at least 4 cutoffs");
    if (!std::is_sorted(cutoffs.begin(), cutoffs.end()) || !(cutoffs.front() > 1.0))
        throw Error("domain", "cutoffs must be increasing and larger than 1");
    std::vector<double> stops = cutoffs;
    stops.push_back(1.0);
    const double X = cutoffs.back();
    FellerVerdict v;
    v.lambda = problem.lambda;
    const HalfLine plus = build(problem, 1.0, X, stops);
    const HalfLine minus = build(problem, -1.0, X, stops);
    v.R_plus = tail(plus, cutoffs, true);
    v.R_minus = tail(minus, cutoffs, true);
    v.Q_plus = tail(plus, cutoffs, false);
    v.Q_minus = tail(minus, cutoffs, false);
    if (v.R_plus.verdict == Integrability::NonIntegrable && v.R_minus.verdict == Integrability::NonIntegrable)
        v.conclusion = "unique bounded solution";
    else if (v.R_plus.verdict == Integrability::Integrable && v.R_minus.verdict == Integrability::Integrable)
        v.conclusion = "infinitely many bounded solutions";
    else
        v.conclusion = "mixed/undecided";
    return v;
}

nlohmann::json FellerVerdict::to_json() const {
    return {{"conclusion", conclusion},
            {"lambda", lambda},
            {"R", {{"plus", evidence_json(R_plus)}, {"minus", evidence_json(R_minus)}}},
            {"Q", {{"plus", evidence_json(Q_plus)}, {"minus", evidence_json(Q_minus)}}}};
}

double asymptotic_probe(const FellerProblem& problem, double weight) {
    if (!std::isfinite(weight)) throw Error("domain", "weight exponent must be finite");
    const std::vector<double> xs = {8, 16, 32, 64};
    const HalfLine hl = build(problem, 1.0, xs.back(), xs);
    if (!hl.ok) return INFINITY;
    std::vector<double> logv;
    for (double x : xs) logv.push_back(weight * std::log(x) + hl.logQ(hl.index_of(x)));
    const std::size_t n = logv.size();
    const double d1 = logv[n - 2] - logv[n - 3], d2 = logv[n - 1] - logv[n - 2];
    if (d2 > 0.05 && d2 >= d1 - 1e-9) return INFINITY;
    if (logv[n - 1] > 700.0) return INFINITY;
    return aitken(std::exp(logv[n - 3]), std::exp(logv[n - 2]), std::exp(logv[n - 1]));
}

FellerFunctions feller_functions(const FellerProblem& problem, double x) {
    FellerFunctions out;
    if (x == 0.0) return out;
    const double sign = x > 0 ? 1.0 : -1.0;
    const HalfLine hl = build(problem, sign, std::abs(x), {});
    if (!hl.ok) throw Error("overflow", hl.diagnostic);
    const std::size_t i = hl.x.size() - 1;
    out.W = std::exp(hl.L[i]);
    out.Q = sign * std::exp(hl.logQ(i));
    out.R = sign * std::exp(hl.logR(i));
    return out;
}

}  // namespace klab
