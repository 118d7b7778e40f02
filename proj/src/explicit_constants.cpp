#include "klab/explicit_constants.hpp"

#include <algorithm>
#include <cmath>

#include "klab/errors.hpp"

namespace klab {

nlohmann::json ConstantReport::to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["value"] = value;
    j["intermediates"] = intermediates;
    return j;
}

namespace {

void require_common(const ConstantInputs& in) {
    if (in.k < 1 || in.k > 3) throw Error("domain", "k must be 1, 2 or 3");
    if (!(in.nu0 > 0.0)) throw Error("domain", "nu0 must be positive");
    if (!(in.L > 0.0)) throw Error("domain", "L must be positive");
    if (!(in.p > 1.0)) throw Error("unsupported", "p <= 1 is unsupported here; use the p = 1 pathway");
}

double sup_over_nu(const ConstantInputs& in, double p, double coef) {
    double best = -INFINITY;
    for (double nu : in.nu_samples) best = std::max(best, (1.0 - p) * nu + coef * std::pow(nu, in.gamma));
    return best;
}

const std::vector<double>& nu_window(const ConstantInputs& in, std::vector<double>& storage) {
    if (!in.nu_samples.empty()) return in.nu_samples;
    storage = {in.nu0};
    return storage;
}

double sigma_bracket(double p, double sup, double c0, double cdk) {
    return std::max(0.0, p * sup + c0 * (p - 1.0) + p * cdk);
}

// (e^{sigma r} - 1)/sigma with the r replacement at sigma = 0.
double growth_ratio(double sigma, double r) {
    return std::abs(sigma) < 1e-12 ? r : std::expm1(sigma * r) / sigma;
}

// Each sigma_{k,p} has its own sup term, so the Gamma bounds always sample nu
// (the degenerate window nu = nu0 when nothing was supplied).
double sigma_value(ConstantInputs in, int k) {
    in.k = k;
    in.sup_term.reset();
    if (in.nu_samples.empty()) in.nu_samples = {in.nu0};
    return sigma_kp(in).value;
}

double zeroth_rate(const ConstantInputs& in, double p) { return std::max(0.0, (p - 1.0) * in.c0); }

}  // namespace

double c_dk(int d, int k, double L) {
    const double dd = d;
    switch (k) {
        case 1: return dd / (4.0 * L);
        case 2: return 3.0 * dd * dd / (4.0 * L);
        case 3: return 7.0 * dd * dd * std::max(5.0, 3.0 * dd * dd) / (12.0 * L);
        default: throw Error("domain", "k must be 1, 2 or 3");
    }
}

double c_kp(const ConstantInputs& in) {
    const double d = in.d, p = in.p;
    const double A = in.C * in.C * d * d * d * std::pow(in.nu0, in.gamma - 1.0) / (p - 1.0);
    const double nu_pow = std::pow(in.nu0, 1.0 - in.gamma);
    switch (in.k) {
        case 1: return A / 4.0 + in.M;
        case 2: return std::max(A / 2.0 + in.M, (p - 1.0) / 2.0 * nu_pow + A + in.K + 2.0 * in.M);
        case 3: {
            double k1 = 3.0 * A / 4.0 + in.M;
            double k2 = (p - 1.0) * nu_pow / 3.0 + 3.0 * A * (d + 2.0) / 4.0 + in.K + 2.0 * in.M;
            double k3 = (d + 2.0) * (p - 1.0) * nu_pow / 3.0 + 3.0 * A / 4.0 + 3.0 * in.K + 3.0 * in.M;
            return std::max({k1, k2, k3});
        }
        default: throw Error("domain", "k must be 1, 2 or 3");
    }
}

ConstantReport sigma_kp(const ConstantInputs& in) {
    require_common(in);
    ConstantReport rep;
    rep.id = "sigma_kp";
    if (in.p > 2.0) {
        ConstantInputs two = in;
        two.p = 2.0;
        ConstantReport base = sigma_kp(two);
        rep.intermediates = base.intermediates;
        rep.intermediates["p"] = in.p;
        rep.intermediates["sigma_k2"] = base.value;
        rep.value = sigma_from_intermediates(rep.intermediates);
        return rep;
    }
    const double ck = c_kp(in);
    double sup = 0.0;
    if (in.sup_term) {
        sup = *in.sup_term;
    } else if (!in.nu_samples.empty()) {
        sup = sup_over_nu(in, in.p, ck);
    } else {
        throw Error("missing sup term", "sigma_kp needs a sup term or sampled nu values");
    }
    rep.intermediates = {{"p", in.p},          {"k", static_cast<double>(in.k)}, {"d", static_cast<double>(in.d)},
                         {"c_k_p", ck},        {"c_d_k", c_dk(in.d, in.k, in.L)}, {"c0", in.c0},
                         {"sup_term", sup}};
    rep.value = sigma_from_intermediates(rep.intermediates);
    return rep;
}

double sigma_from_intermediates(const std::map<std::string, double>& im) {
    const double p = im.at("p");
    if (auto it = im.find("sigma_k2"); it != im.end()) return p * it->second / 2.0;
    return sigma_bracket(p, im.at("sup_term"), im.at("c0"), im.at("c_d_k"));
}

ConstantReport phi_pk(const ConstantInputs& in_raw) {
    require_common(in_raw);
    if (in_raw.C < 0.0) throw Error("domain", "empty admissible eps0 interval: C must be nonnegative");
    ConstantInputs in = in_raw;
    ConstantReport rep;
    rep.id = "phi_pk";
    rep.intermediates["p"] = in_raw.p;
    rep.intermediates["k"] = in.k;
    // For p > 2 the p = 2 exponent is reused (Jensen).
    if (in.p > 2.0) in.p = 2.0;
    std::vector<double> storage;
    ConstantInputs win = in;
    win.nu_samples = nu_window(in, storage);
    rep.intermediates["nu_window_degenerate"] = in.nu_samples.empty() ? 1.0 : 0.0;

    const double d = in.d, p = in.p, C = in.C;
    const double g1 = std::pow(in.nu0, in.gamma - 1.0);
    if (in.k == 1) {
        double coef = C * C * d * d * d * g1 / (4.0 * (p - 1.0));
        double best = -INFINITY;
        for (double nu : win.nu_samples) best = std::max(best, in.r0 + coef * std::pow(nu, in.gamma));
        rep.value = best;
        return rep;
    }

    const double Mk = in.M;
    const double nu0g = std::pow(in.nu0, in.gamma);
    auto C1 = [&](double e0) { return (C * d * d / (4.0 * e0) + Mk) * nu0g; };
    auto C2 = [&](double e0) {
        double coef = in.k == 2 ? C * e0 * d + C * C * d * d * d * g1 / (p - 1.0) + in.K + 2.0 * Mk
                                : C * e0 * d + 3.0 * C * C * d * d * d * (2.0 + d) * g1 / (4.0 * (p - 1.0)) + in.K +
                                      2.0 * Mk;
        return sup_over_nu(win, p, coef);
    };
    double c3 = -INFINITY;
    if (in.k == 3) {
        double coef = (2.0 + d) * (p - 1.0) * std::pow(in.nu0, 1.0 - in.gamma) / 3.0 +
                      9.0 * C * C * d * d * d * g1 / (4.0 * (p - 1.0)) + 3.0 * in.K + 3.0 * Mk;
        c3 = sup_over_nu(win, p, coef);
        rep.intermediates["C3"] = c3;
    }
    auto F = [&](double e0) { return std::max({C1(e0), C2(e0), c3}); };

    if (C == 0.0) {
        rep.intermediates["C1"] = Mk * nu0g;
        rep.intermediates["C2"] = C2(1.0);
        rep.value = std::max({Mk * nu0g, C2(1.0), c3});
        return rep;
    }
    const double lo = Mk < 0.0 ? -C * d * d / (4.0 * Mk) : 0.0;
    double hi = std::max(1.0, 2.0 * lo + 1.0);
    while (C2(hi) < C1(hi) && hi < 1e12) hi *= 2.0;
    double a = lo + 1e-12 * std::max(1.0, lo), b = hi;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = F(x1), f2 = F(x2);
    while (b - a > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = F(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = F(x2);
        }
    }
    const double e0 = 0.5 * (a + b);
    rep.intermediates["eps0_lower"] = lo;
    rep.intermediates["eps0_star"] = e0;
    rep.intermediates["C1"] = C1(e0);
    rep.intermediates["C2"] = C2(e0);
    rep.value = F(e0);
    return rep;
}

ConstantReport gamma_step(double r, int k, const ConstantInputs& in) {
    if (!(r > 0.0)) throw Error("domain", "Gamma needs r > 0");
    if (k < 1 || k > 3) throw Error("domain", "step index k must be 1, 2 or 3");
    if (!(in.p > 1.0)) throw Error("unsupported", "p <= 1 is unsupported here; use the p = 1 pathway");
    ConstantInputs base = in;
    base.p = std::min(in.p, 2.0);
    const double s_lo = k == 1 ? zeroth_rate(in, base.p) : sigma_value(base, k - 1);
    const double s_hi = sigma_value(base, k);
    ConstantReport rep = gamma_from_sigmas(r, in.p, s_lo, s_hi, in.alpha, in.K1p, in.K2p);
    rep.id = "gamma_p" + std::to_string(k - 1) + std::to_string(k);
    return rep;
}

ConstantReport gamma_from_sigmas(double r, double p_in, double s_lo, double s_hi, double alpha, double K1p,
                                 double K2p) {
    if (!(r > 0.0)) throw Error("domain", "Gamma needs r > 0");
    const double p = std::min(p_in, 2.0);
    const double E = growth_ratio(s_lo, r);
    const double pref = std::abs(s_hi) < 1e-12 ? 1.0 / r : s_hi / (-std::expm1(-s_hi * r));
    const double brace = std::pow(alpha / K1p * (1.0 + K2p * E), p / 2.0) * std::pow(E, 1.0 - p / 2.0) + r;
    double g = pref * brace;
    if (p_in > 2.0) g = std::pow(g, p_in / 2.0);
    ConstantReport rep;
    rep.id = "gamma_step";
    rep.intermediates = {{"r", r},          {"sigma_lo", s_lo},  {"sigma_hi", s_hi}, {"growth_ratio", E},
                         {"prefactor", pref}, {"brace", brace}, {"p", p_in}};
    rep.value = g;
    return rep;
}

ConstantReport gamma_p23(double r, const ConstantInputs& in) { return gamma_step(r, 3, in); }

ConstantReport gamma_hk(double r, int h, int k, const ConstantInputs& in) {
    if (!(r > 0.0)) throw Error("domain", "Gamma needs r > 0");
    if (h < 0 || h > k || k < 1 || k > 3) throw Error("domain", "need 0 <= h <= k <= 3");
    if (h == k) {
        ConstantInputs c = in;
        c.k = k;
        ConstantReport s = sigma_kp(c);
        ConstantReport rep;
        rep.id = "gamma_kk";
        rep.intermediates = {{"sigma_kp", s.value}, {"r", r}};
        rep.value = std::exp(s.value * r);
        return rep;
    }
    if (h == k - 1) return gamma_step(r, k, in);
    const int pieces = k - h;
    ConstantReport rep;
    rep.id = "gamma_p" + std::to_string(h) + std::to_string(k);
    rep.value = 1.0;
    for (int j = h + 1; j <= k; ++j) {
        ConstantReport part = gamma_step(r / pieces, j, in);
        rep.intermediates[part.id] = part.value;
        rep.value *= part.value;
    }
    rep.intermediates["r"] = r;
    return rep;
}

ConstantReport rate_p1(int k, int d, double r0, double r) {
    ConstantReport rep;
    rep.id = "rate_p1(k=" + std::to_string(k) + ")";
    const double dd = d;
    double value = r0;
    switch (k) {
        case 1:
            break;
        case 2: {
            const double e1 = std::sqrt(dd / 2.0);
            const double h1 = r0 + r * dd * dd / (4.0 * e1);
            const double h2 = 2.0 * r0 + r * dd * e1;
            rep.intermediates = {{"eps1", e1}, {"H1", h1}, {"H2", h2}};
            value = std::max(h1, h2);
            break;
        }
        case 3: {
            const double e1 = std::sqrt(3.0 * (dd + dd * dd)) / 4.0;
            const double h1 = r0 + r * (dd * dd * dd + dd * dd) / (4.0 * e1);
            const double h2 = 2.0 * r0 + r * dd * (e1 + 3.0 * dd / (4.0 * e1));
            const double h3 = 3.0 * r0 + 4.0 * r * e1 * dd;
            rep.intermediates = {{"eps1", e1}, {"H1", h1}, {"H2", h2}, {"H3", h3}};
            value = std::max({h1, h2, h3});
            break;
        }
        default:
            throw Error("domain", "k must be 1, 2 or 3");
    }
    rep.intermediates["r0"] = r0;
    rep.intermediates["r"] = r;
    rep.value = value;
    return rep;
}

double hypercontractivity_threshold(double p, double q, double Lambda0, double nu0, double r0) {
    if (!(p > 1.0)) throw Error("domain", "hypercontractivity needs p > 1");
    if (!(p < q)) throw Error("domain", "hypercontractivity needs p < q");
    if (!(r0 < 0.0)) throw Error("domain", "gradient estimate of negative type required (r0 < 0)");
    if (!(nu0 > 0.0) || !(Lambda0 >= nu0)) throw Error("domain", "need Lambda0 >= nu0 > 0");
    return Lambda0 * std::log((q - 1.0) / (p - 1.0)) / (2.0 * nu0 * std::abs(r0));
}

double log_sobolev_constant(double p, double Lambda0, double r0) {
    if (!(p > 1.0)) throw Error("domain", "log-Sobolev constant needs p > 1");
    if (!(r0 < 0.0)) throw Error("domain", "gradient estimate of negative type required (r0 < 0)");
    if (!(Lambda0 > 0.0)) throw Error("domain", "Lambda0 must be positive");
    return p * p * Lambda0 / (2.0 * std::abs(r0));
}

double L_k(int k, int d) {
    const double dd = d;
    switch (k) {
        case 1: return 0.0;
        case 2: return std::pow(dd, 1.5) / std::sqrt(8.0);
        case 3: return d == 1 ? 2.0 / std::sqrt(5.0) : std::sqrt(dd * dd * dd * (dd + 1.0) / 3.0);
        default: throw Error("domain", "k must be 1, 2 or 3");
    }
}

double L_prime_k(int k, int d) {
    const double dd = d;
    switch (k) {
        case 1: return 0.0;
        case 2: return std::pow(dd / 2.0, 1.5);
        case 3: return dd * std::sqrt(3.0 * (dd + dd * dd)) / 3.0;
        default: throw Error("domain", "k must be 1, 2 or 3");
    }
}

}  // namespace klab
