#include "klab/operator_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <set>

#include "klab/errors.hpp"
#include "klab/explicit_constants.hpp"
#include "klab/fd.hpp"

namespace klab {

Profile profile_from_string(const std::string& s) {
    if (s == "H1.1") return Profile::H1_1;
    if (s == "H3.1") return Profile::H3_1;
    if (s == "H4.1") return Profile::H4_1;
    if (s == "H4.2") return Profile::H4_2;
    if (s == "H4.3") return Profile::H4_3;
    if (s == "H5.1") return Profile::H5_1;
    throw Error("parse", "unknown hypothesis profile '" + s + "'");
}

std::string to_string(Profile p) {
    switch (p) {
        case Profile::H1_1: return "H1.1";
        case Profile::H3_1: return "H3.1";
        case Profile::H4_1: return "H4.1";
        case Profile::H4_2: return "H4.2";
        case Profile::H4_3: return "H4.3";
        case Profile::H5_1: return "H5.1";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Satisfied: return "satisfied";
        case Verdict::Violated: return "violated";
        case Verdict::NotCheckable: return "not-checkable";
    }
    return "?";
}

bool HypothesisReport::satisfied() const {
    return std::none_of(checks.begin(), checks.end(), [](const SubHypothesis& c) { return c.verdict == Verdict::Violated; });
}

const SubHypothesis* HypothesisReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

nlohmann::json HypothesisReport::to_json() const {
    nlohmann::json j;
    j["profile"] = profile;
    j["k"] = k;
    j["label"] = label;
    j["satisfied"] = satisfied();
    j["window"] = {{"radius", window.radius}, {"space_samples", window.space_samples},
                   {"time_samples", window.time_samples}, {"t0", t_lo}, {"t1", t_hi}, {"sample_count", sample_count}};
    j["inferred"] = inferred;
    for (const auto& c : checks) {
        nlohmann::json cj = {{"name", c.name}, {"verdict", to_string(c.verdict)}, {"worst_slack", c.worst_slack},
                             {"bound", c.bound}, {"bound_source", c.bound_source}, {"upper", c.upper}, {"note", c.note}};
        if (c.witness) cj["witness"] = {{"t", c.witness->t}, {"x", c.witness->x}, {"value", c.witness->value}};
        j["checks"].push_back(cj);
    }
    return j;
}

namespace {

using Quantity = std::function<double(double, std::span<const double>)>;

struct CheckDef {
    std::string name;
    Quantity g;
    bool upper = true;
    std::optional<double> bound;
    std::string bound_source;  // for declared/fixed bounds
    std::string inferred_key;  // key under which an inferred bound is recorded
    bool global_constant = false;
    bool strict = false;
    std::string note;
};

// Local quantities built on registered derivatives.
class Local {
public:
    Local(const OperatorSpec& s, double eps_rho) : s_(s), eps_rho_(eps_rho) {}

    double nu(double t, std::span<const double> x) const { return s_.nu(t, x); }

    double jac_max_eig(double t, std::span<const double> x) const {
        const int d = s_.d;
        std::vector<double> J(d * d);
        for (int j = 0; j < d; ++j) {
            MultiIndex mi(d, 0);
            mi[j] = 1;
            auto col = s_.b.derivative(mi, t, x);
            for (int i = 0; i < d; ++i) J[i * d + j] = col[i];
        }
        return max_eigenvalue_sym(J, d);
    }

    double deriv_max(const CoefficientField& f, const std::set<int>& orders, double t, std::span<const double> x) const {
        double m = 0.0;
        for (int o : orders)
            for (const MultiIndex& mi : multi_indices(s_.d, o))
                for (double v : f.derivative(mi, t, x)) m = std::max(m, std::abs(v));
        return m;
    }

    double rho(int k, double t, std::span<const double> x) const {
        if (s_.c_zero) return eps_rho_;
        std::set<int> orders;
        for (int o = 0; o <= k; ++o) orders.insert(o);
        return std::max(eps_rho_, deriv_max(s_.c, orders, t, x));
    }

    double r_fn(int k, double t, std::span<const double> x) const {
        std::set<int> orders;
        for (int o = 2; o <= k; ++o) orders.insert(o);
        return deriv_max(s_.b, orders, t, x);
    }

    double v_form(double t, std::span<const double> x) const {
        const int d = s_.d;
        std::vector<Eigen::MatrixXd> basis;
        for (int p = 0; p < d; ++p)
            for (int q = p; q < d; ++q) {
                Eigen::MatrixXd E = Eigen::MatrixXd::Zero(d, d);
                if (p == q) E(p, p) = 1.0;
                else E(p, q) = E(q, p) = 1.0 / std::sqrt(2.0);
                basis.push_back(E);
            }
        // D2q[h][k] = D_hk Q as a d x d matrix.
        std::vector<Eigen::MatrixXd> D2q(d * d, Eigen::MatrixXd::Zero(d, d));
        for (int h = 0; h < d; ++h)
            for (int k = 0; k < d; ++k) {
                MultiIndex mi(d, 0);
                mi[h] += 1;
                mi[k] += 1;
                auto v = s_.Q.derivative(mi, t, x);
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) D2q[h * d + k](i, j) = v[i * d + j];
            }
        const int m = static_cast<int>(basis.size());
        Eigen::MatrixXd B(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                double s = 0.0;
                for (int h = 0; h < d; ++h)
                    for (int k = 0; k < d; ++k) s += (D2q[h * d + k].cwiseProduct(basis[a])).sum() * basis[b](h, k);
                B(a, b) = s;
            }
        Eigen::MatrixXd S = 0.5 * (B + B.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(m - 1);
    }

    double A_phi(const CoefficientField& phi, double t, std::span<const double> x) const {
        const int d = s_.d;
        std::array<double, 16> q{};
        std::array<double, 4> b{};
        s_.Q.eval(t, x, std::span<double>(q.data(), d * d));
        s_.b.eval(t, x, std::span<double>(b.data(), d));
        double val = s_.c.scalar(t, x) * phi.scalar(t, x);
        for (int i = 0; i < d; ++i) {
            MultiIndex gi(d, 0);
            gi[i] = 1;
            val += b[i] * phi.derivative(gi, t, x)[0];
            for (int j = 0; j < d; ++j) {
                MultiIndex hij(d, 0);
                hij[i] += 1;
                hij[j] += 1;
                val += q[i * d + j] * phi.derivative(hij, t, x)[0];
            }
        }
        return val;
    }

private:
    const OperatorSpec& s_;
    double eps_rho_;
};

void require_derivatives(const OperatorSpec& spec, Profile profile, int k) {
    std::vector<std::string> missing;
    auto need = [&](const CoefficientField& f, int order) {
        for (const MultiIndex& mi : multi_indices(spec.d, order))
            if (!f.has_derivative(mi)) missing.push_back(f.derivative_symbol(mi));
    };
    switch (profile) {
        case Profile::H1_1:
        case Profile::H5_1: {
            CoefficientField phi = spec.lyapunov();
            need(phi, 1);
            need(phi, 2);
            break;
        }
        default:
            for (int o = 1; o <= k; ++o) {
                need(spec.b, o);
                if (!spec.c_zero) need(spec.c, o);
                if (o != 2) need(spec.Q, o);
            }
            if (k >= 2) need(spec.Q, 2);
            if (profile == Profile::H4_3) need(spec.Q, 1);
    }
    if (!missing.empty()) {
        std::string msg = "insufficient derivative data: missing";
        for (const auto& m : missing) msg += " " + m;
        throw Error("insufficient derivative data", msg);
    }
}

std::optional<double> declared(const OperatorSpec& s, const std::string& key) { return s.params.get(key); }

CheckDef upper_check(const OperatorSpec& spec, std::string name, Quantity g, const std::string& key, bool global) {
    CheckDef c;
    c.name = std::move(name);
    c.g = std::move(g);
    c.upper = true;
    c.inferred_key = key;
    c.global_constant = global;
    if (auto v = declared(spec, key)) {
        c.bound = *v;
        c.bound_source = "declared:" + key;
    }
    return c;
}

std::vector<CheckDef> build_checks(const OperatorSpec& spec, Profile profile, int k, const SamplingWindow& w) {
    auto L = std::make_shared<Local>(spec, w.eps_rho);
    const int d = spec.d;
    const double gamma = spec.params.get_or("gamma", 0.5);
    const bool gamma_profile = profile == Profile::H4_1 || profile == Profile::H4_2 || profile == Profile::H4_3;
    std::vector<CheckDef> out;

    auto holder = [&]() {
        CheckDef c;
        c.name = "(i) local Hoelder ratio";
        c.note = "heuristic: finite-difference ratio bound over sample pairs";
        c.inferred_key = "holder_ratio";
        const double delta = 2.0 * w.radius / std::max(2, w.space_samples - 1);
        c.g = [&spec, delta, d](double t, std::span<const double> x) {
            double m = 0.0;
            std::vector<double> xp(x.begin(), x.end());
            for (const CoefficientField* f : {&spec.Q, &spec.b, &spec.c}) {
                auto base = f->value(t, x);
                for (int a = 0; a < d; ++a) {
                    xp[a] += delta;
                    auto shifted = f->value(t, xp);
                    xp[a] -= delta;
                    for (std::size_t i = 0; i < base.size(); ++i)
                        m = std::max(m, std::abs(shifted[i] - base[i]) / std::pow(delta, f->holder_alpha));
                }
            }
            return m;
        };
        return c;
    };
    auto symmetric = [&]() {
        CheckDef c;
        c.name = "(ii) Q symmetric";
        c.g = [&spec, d](double t, std::span<const double> x) {
            auto q = spec.Q.value(t, x);
            double m = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m = std::max(m, std::abs(q[i * d + j] - q[j * d + i]));
            return m;
        };
        c.bound = 1e-12;
        c.bound_source = "fixed";
        return c;
    };
    auto ellipticity = [&]() {
        CheckDef c;
        c.name = "(ii) nu >= nu0 > 0";
        c.upper = false;
        c.inferred_key = "nu0";
        c.g = [L](double t, std::span<const double> x) { return L->nu(t, x); };
        if (auto v = declared(spec, "nu0"); v && *v > 0.0) {
            c.bound = *v;
            c.bound_source = "declared:nu0";
        } else {
            c.bound = 0.0;
            c.bound_source = "fixed";
            c.strict = true;
        }
        return c;
    };

    if (profile == Profile::H1_1 || profile == Profile::H5_1) {
        out.push_back(holder());
        out.push_back(symmetric());
        out.push_back(ellipticity());
        if (profile == Profile::H1_1) {
            out.push_back(upper_check(spec, "(iii) c <= c0", [&spec](double t, std::span<const double> x) {
                return spec.c.scalar(t, x);
            }, "c0", true));
            auto phi = std::make_shared<CoefficientField>(spec.lyapunov());
            out.push_back(upper_check(spec, "(iv) A phi <= lambda phi", [L, phi](double t, std::span<const double> x) {
                return L->A_phi(*phi, t, x) / phi->scalar(t, x);
            }, "lambda", true));
        }
        return out;
    }

    // H3.1(k) family.
    auto nu_scale = [L, gamma, gamma_profile](double t, std::span<const double> x) {
        double nu = L->nu(t, x);
        return gamma_profile ? std::pow(nu, gamma) : nu;
    };
    out.push_back(ellipticity());
    out.push_back(upper_check(spec, "(ii) |Qx| + Tr Q <= C1 (1+|x|^2) nu", [&spec, L, d](double t, std::span<const double> x) {
        auto q = spec.Q.value(t, x);
        double tr = 0.0, x2 = 0.0, qx2 = 0.0;
        for (int i = 0; i < d; ++i) {
            tr += q[i * d + i];
            x2 += x[i] * x[i];
            double row = 0.0;
            for (int j = 0; j < d; ++j) row += q[i * d + j] * x[j];
            qx2 += row * row;
        }
        return (std::sqrt(qx2) + tr) / ((1.0 + x2) * L->nu(t, x));
    }, "C1", true));
    out.push_back(upper_check(spec, "(ii) <b,x> <= C2 (1+|x|^2) nu", [&spec, L, d](double t, std::span<const double> x) {
        auto b = spec.b.value(t, x);
        double bx = 0.0, x2 = 0.0;
        for (int i = 0; i < d; ++i) {
            bx += b[i] * x[i];
            x2 += x[i] * x[i];
        }
        return bx / ((1.0 + x2) * L->nu(t, x));
    }, "C2", true));
    out.push_back(upper_check(spec, "(iii) <Jac b xi, xi> <= r0 |xi|^2",
                              [L](double t, std::span<const double> x) { return L->jac_max_eig(t, x); }, "r0", false));
    std::set<int> q_orders;
    for (int o = 1; o <= k; ++o)
        if (o != 2) q_orders.insert(o);
    if (profile == Profile::H4_3) q_orders.insert(1);
    out.push_back(upper_check(spec, gamma_profile ? "(iii) |D^beta q| <= C nu^gamma" : "(iii) |D^beta q| <= C nu",
                              [&spec, L, q_orders, nu_scale](double t, std::span<const double> x) {
                                  return L->deriv_max(spec.Q, q_orders, t, x) / nu_scale(t, x);
                              }, "C", true));
    out.push_back(upper_check(spec, "(iii) |D^delta b| <= r",
                              [L, k](double t, std::span<const double> x) { return L->r_fn(k, t, x); }, "r", false));
    out.push_back(upper_check(spec, "(iii) |D^eta c| <= rho",
                              [L, k](double t, std::span<const double> x) { return L->rho(k, t, x); }, "rho", false));

    const double Lconst = spec.params.get_or("L", 1.0);
    const double Lk = L_k(k, d);
    if (profile == Profile::H3_1 || profile == Profile::H4_1) {
        out.push_back(upper_check(spec, gamma_profile ? "(iv) r0 + L_k r + L rho^2 <= M nu^gamma"
                                                      : "(iv) r0 + L_k r + L rho^2 <= M nu",
                                  [L, k, Lk, Lconst, nu_scale](double t, std::span<const double> x) {
                                      double rho = L->rho(k, t, x);
                                      return (L->jac_max_eig(t, x) + Lk * L->r_fn(k, t, x) + Lconst * rho * rho) /
                                             nu_scale(t, x);
                                  }, "M", true));
    }
    if (k >= 2) {
        out.push_back(upper_check(spec, gamma_profile ? "(v) D_hk q_ij a_ij a_hk <= K nu^gamma |A|^2"
                                                      : "(v) D_hk q_ij a_ij a_hk <= K nu |A|^2",
                                  [L, nu_scale](double t, std::span<const double> x) {
                                      return L->v_form(t, x) / nu_scale(t, x);
                                  }, "K", true));
    }
    if (profile == Profile::H4_2 || profile == Profile::H4_3) {
        CheckDef cz;
        cz.name = "c vanishes";
        cz.g = [&spec](double t, std::span<const double> x) { return std::abs(spec.c.scalar(t, x)); };
        cz.bound = 0.0;
        cz.bound_source = "fixed";
        out.push_back(cz);
    }
    if (profile == Profile::H4_2) {
        if (k == 1) {
            const double p0 = spec.params.get_or("p0", 2.0);
            const double C = spec.params.get_or("C", 0.0);
            const double nu0 = spec.params.get_or("nu0", 1.0);
            const double coef = C * C * d * d * d * std::pow(nu0, gamma - 1.0) / (4.0 * (p0 - 1.0));
            out.push_back(upper_check(spec, "r0 + C^2 d^3 nu0^(gamma-1) nu^gamma / (4(p0-1)) bounded above",
                                      [L, coef, gamma](double t, std::span<const double> x) {
                                          return L->jac_max_eig(t, x) + coef * std::pow(L->nu(t, x), gamma);
                                      }, "phi_bound", true));
            out.back().note = "uses declared C, nu0, p0 (defaults 0, 1, 2)";
        } else {
            const std::string key = k == 2 ? "M2" : "M3";
            out.push_back(upper_check(spec, "r0 + L_k r <= M_k nu^gamma",
                                      [L, k, Lk, nu_scale](double t, std::span<const double> x) {
                                          return (L->jac_max_eig(t, x) + Lk * L->r_fn(k, t, x)) / nu_scale(t, x);
                                      }, key, true));
        }
    }
    if (profile == Profile::H4_3) {
        CheckDef qx;
        qx.name = "q independent of x";
        qx.g = [&spec, L](double t, std::span<const double> x) { return L->deriv_max(spec.Q, {1}, t, x); };
        qx.bound = 1e-12;
        qx.bound_source = "fixed";
        out.push_back(qx);
        const double Lp = L_prime_k(k, d);
        out.push_back(upper_check(spec, "r0 + L'_k r bounded above",
                                  [L, k, Lp](double t, std::span<const double> x) {
                                      return L->jac_max_eig(t, x) + Lp * L->r_fn(k, t, x);
                                  }, "r0_Lprime", true));
    }
    return out;
}

struct Sampler {
    std::vector<double> times;
    std::vector<double> axis;
    int d = 1;
    double radius = 0.0;

    Sampler(const OperatorSpec& spec, const SamplingWindow& w) : d(spec.d), radius(w.radius) {
        if (!(w.radius > 0.0) || w.space_samples < 2 || w.time_samples < 1)
            throw Error("domain", "sampling window must be finite and nonempty");
        double t0 = w.t0.value_or(std::max(spec.t_min, -50.0));
        double t1 = w.t1.value_or(std::min(spec.t_max, 50.0));
        const int nt = spec.autonomous ? 1 : w.time_samples;
        for (int i = 0; i < nt; ++i) times.push_back(nt == 1 ? t0 : t0 + (t1 - t0) * i / (nt - 1.0));
        for (int i = 0; i < w.space_samples; ++i) axis.push_back(-w.radius + 2.0 * w.radius * i / (w.space_samples - 1.0));
    }

    template <class F>
    void for_each(F&& f) const {
        std::vector<double> x(d);
        const std::size_t n = axis.size();
        std::size_t total = 1;
        for (int a = 0; a < d; ++a) total *= n;
        for (double t : times)
            for (std::size_t m = 0; m < total; ++m) {
                std::size_t r = m;
                for (int a = d - 1; a >= 0; --a) {
                    x[a] = axis[r % n];
                    r /= n;
                }
                f(t, std::span<const double>(x));
            }
    }
    long count() const {
        long total = static_cast<long>(times.size());
        for (int a = 0; a < d; ++a) total *= static_cast<long>(axis.size());
        return total;
    }
};

SubHypothesis evaluate_check(const CheckDef& c, const Sampler& sampler, HypothesisReport& rep) {
    SubHypothesis sh;
    sh.name = c.name;
    sh.upper = c.upper;
    sh.note = c.note;
    double best = c.upper ? -INFINITY : INFINITY;
    double best_half = best;
    Witness wbest;
    bool nonfinite = false;
    Witness wnan;
    std::optional<double> worst_slack;
    Witness wslack;
    sampler.for_each([&](double t, std::span<const double> x) {
        const double v = c.g(t, x);
        if (!std::isfinite(v)) {
            if (!nonfinite) wnan = Witness{t, std::vector<double>(x.begin(), x.end()), v};
            nonfinite = true;
            return;
        }
        const bool better = c.upper ? v > best : v < best;
        if (better) {
            best = v;
            wbest = Witness{t, std::vector<double>(x.begin(), x.end()), v};
        }
        double xmax = 0.0;
        for (double xi : x) xmax = std::max(xmax, std::abs(xi));
        if (xmax <= 0.5 * sampler.radius + 1e-12) best_half = c.upper ? std::max(best_half, v) : std::min(best_half, v);
        if (c.bound) {
            const double slack = c.upper ? *c.bound - v : v - *c.bound;
            if (!worst_slack || slack < *worst_slack) {
                worst_slack = slack;
                wslack = Witness{t, std::vector<double>(x.begin(), x.end()), v};
            }
        }
    });
    if (!c.inferred_key.empty() && std::isfinite(best)) rep.inferred[c.inferred_key] = best;
    if (nonfinite) {
        sh.verdict = Verdict::Violated;
        sh.worst_slack = -INFINITY;
        sh.bound = c.bound.value_or(NAN);
        sh.bound_source = c.bound ? c.bound_source : "inferred";
        sh.witness = wnan;
        sh.note += (sh.note.empty() ? "" : "; ") + std::string("non-finite quantity");
        return sh;
    }
    if (c.bound) {
        sh.bound = *c.bound;
        sh.bound_source = c.bound_source;
        sh.worst_slack = *worst_slack;
        sh.witness = wslack;
        const bool bad = c.strict ? *worst_slack <= 0.0 : *worst_slack < 0.0;
        sh.verdict = bad ? Verdict::Violated : Verdict::Satisfied;
        return sh;
    }
    sh.bound_source = "inferred";
    sh.witness = wbest;
    if (c.global_constant && c.upper && best - best_half > 0.1 * std::abs(best_half) + 1e-9) {
        sh.bound = best_half + 0.1 * std::abs(best_half) + 1e-9;
        sh.worst_slack = sh.bound - best;
        sh.verdict = Verdict::Violated;
        sh.note += (sh.note.empty() ? "" : "; ") +
                   std::string("unbounded on evidence: sup grows by more than 10% from half window to full window");
        return sh;
    }
    sh.bound = best;
    sh.worst_slack = 0.0;
    sh.verdict = Verdict::Satisfied;
    return sh;
}

HypothesisReport run_checks(const std::vector<CheckDef>& defs, const OperatorSpec& spec, const SamplingWindow& w,
                            const std::string& profile, int k) {
    Sampler sampler(spec, w);
    HypothesisReport rep;
    rep.profile = profile;
    rep.k = k;
    rep.window = w;
    rep.t_lo = sampler.times.front();
    rep.t_hi = sampler.times.back();
    rep.sample_count = sampler.count();
    for (const auto& c : defs) rep.checks.push_back(evaluate_check(c, sampler, rep));
    return rep;
}

std::vector<CheckDef> lp_checks(const OperatorSpec& spec) {
    const int d = spec.d;
    auto beta = [&spec, d](double t, std::span<const double> x) {
        std::vector<double> b = spec.b.value(t, x);
        for (int j = 0; j < d; ++j) {
            MultiIndex mi(d, 0);
            mi[j] = 1;
            auto dq = spec.Q.derivative(mi, t, x);
            for (int i = 0; i < d; ++i) b[i] -= dq[i * d + j];
        }
        return b;
    };
    auto div_beta = [&spec, d](double t, std::span<const double> x) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            MultiIndex mi(d, 0);
            mi[i] = 1;
            s += spec.b.derivative(mi, t, x)[i];
            for (int j = 0; j < d; ++j) {
                MultiIndex mij(d, 0);
                mij[i] += 1;
                mij[j] += 1;
                s -= spec.Q.derivative(mij, t, x)[i * d + j];
            }
        }
        return s;
    };
    std::vector<CheckDef> out;
    out.push_back(upper_check(spec, "(a) div beta >= -K0", [div_beta](double t, std::span<const double> x) {
        return -div_beta(t, x);
    }, "K0", true));
    out.push_back(upper_check(spec, "(b) |beta|^2 <= K1 nu", [beta, &spec](double t, std::span<const double> x) {
        double s = 0.0;
        for (double v : beta(t, x)) s += v * v;
        return s / spec.nu(t, x);
    }, "K1", true));
    return out;
}

}  // namespace

HypothesisReport check_hypotheses(const OperatorSpec& spec, Profile profile, const SamplingWindow& window, int k) {
    spec.validate();
    if (profile != Profile::H1_1 && profile != Profile::H5_1 && (k < 1 || k > 3))
        throw Error("domain", "k must be 1, 2 or 3");
    require_derivatives(spec, profile, k);
    if (profile == Profile::H5_1) {
        // A phi <= a1 - a2 phi: a2 from the outer half of the window, a1 as the resulting sup.
        HypothesisReport rep = run_checks(build_checks(spec, profile, k, window), spec, window, to_string(profile), k);
        auto phi = std::make_shared<CoefficientField>(spec.lyapunov());
        auto L = std::make_shared<Local>(spec, window.eps_rho);
        Sampler sampler(spec, window);
        double outer = -INFINITY;
        Witness w_outer;
        sampler.for_each([&](double t, std::span<const double> x) {
            double xmax = 0.0;
            for (double xi : x) xmax = std::max(xmax, std::abs(xi));
            if (xmax < 0.5 * window.radius) return;
            double v = L->A_phi(*phi, t, x) / phi->scalar(t, x);
            if (v > outer) {
                outer = v;
                w_outer = Witness{t, std::vector<double>(x.begin(), x.end()), v};
            }
        });
        std::optional<double> a2 = spec.params.get("a2");
        if (!a2 && outer < 0.0) a2 = -0.5 * outer;
        if (!a2) {
            SubHypothesis sh;
            sh.name = "A phi <= a1 - a2 phi";
            sh.verdict = Verdict::Violated;
            sh.bound = 0.0;
            sh.bound_source = "fixed";
            sh.upper = true;
            sh.worst_slack = -outer;
            sh.witness = w_outer;
            sh.note = "A phi / phi is not negative on the outer half of the window";
            rep.checks.push_back(sh);
            return rep;
        }
        rep.inferred["a2"] = *a2;
        CheckDef c;
        c.name = "A phi <= a1 - a2 phi";
        c.inferred_key = "a1";
        c.global_constant = true;
        const double a2v = *a2;
        c.g = [L, phi, a2v](double t, std::span<const double> x) {
            return L->A_phi(*phi, t, x) + a2v * phi->scalar(t, x);
        };
        if (auto a1 = spec.params.get("a1")) {
            c.bound = *a1;
            c.bound_source = "declared:a1";
        }
        rep.checks.push_back(evaluate_check(c, sampler, rep));
        return rep;
    }
    return run_checks(build_checks(spec, profile, k, window), spec, window, to_string(profile), k);
}

HypothesisReport check_lp_preservation(const OperatorSpec& spec, const SamplingWindow& window) {
    spec.validate();
    std::vector<std::string> missing;
    for (int o = 1; o <= 2; ++o)
        for (const MultiIndex& mi : multi_indices(spec.d, o)) {
            if (o == 1 && !spec.b.has_derivative(mi)) missing.push_back(spec.b.derivative_symbol(mi));
            if (!spec.Q.has_derivative(mi)) missing.push_back(spec.Q.derivative_symbol(mi));
        }
    if (!missing.empty()) {
        std::string msg = "insufficient derivative data: missing";
        for (const auto& m : missing) msg += " " + m;
        throw Error("insufficient derivative data", msg);
    }
    return run_checks(lp_checks(spec), spec, window, "Lp-preservation", 0);
}

void for_each_sample(const OperatorSpec& spec, const SamplingWindow& window,
                     const std::function<void(double, std::span<const double>)>& visit) {
    Sampler(spec, window).for_each(visit);
}

double reevaluate_slack(const OperatorSpec& spec, const HypothesisReport& report, const std::string& check) {
    const SubHypothesis* sh = report.find(check);
    if (!sh || !sh->witness) throw Error("domain", "no witness recorded for '" + check + "'");
    std::vector<CheckDef> defs;
    if (report.profile == "Lp-preservation") {
        defs = lp_checks(spec);
    } else {
        Profile p = profile_from_string(report.profile);
        defs = build_checks(spec, p, report.k, report.window);
        if (p == Profile::H5_1 && check == "A phi <= a1 - a2 phi") {
            auto phi = std::make_shared<CoefficientField>(spec.lyapunov());
            auto L = std::make_shared<Local>(spec, report.window.eps_rho);
            const double a2 = report.inferred.count("a2") ? report.inferred.at("a2") : 0.0;
            CheckDef c;
            c.name = check;
            c.g = [L, phi, a2](double t, std::span<const double> x) {
                double r = L->A_phi(*phi, t, x);
                return a2 > 0.0 ? r + a2 * phi->scalar(t, x) : r / phi->scalar(t, x);
            };
            defs.push_back(c);
        }
    }
    for (const auto& c : defs) {
        if (c.name != check) continue;
        const double v = c.g(sh->witness->t, sh->witness->x);
        return sh->upper ? sh->bound - v : v - sh->bound;
    }
    throw Error("domain", "unknown check '" + check + "'");
}

GridFunction apply_operator(const OperatorSpec& spec, const GridFunction& u, double t) {
    if (u.n < 5) throw Error("grid too coarse", "apply_operator needs at least 5 grid points per axis");
    if (u.d != spec.d) throw Error("domain", "grid dimension differs from the operator's");
    const int d = u.d;
    std::vector<GridFunction> g1, g2;
    for (int a = 0; a < d; ++a) {
        g1.push_back(diff_axis(u, a, 1, true));
        g2.push_back(diff_axis(u, a, 2, true));
    }
    GridFunction mixed;
    if (d == 2) mixed = diff_axis(g1[0], 1, 1, true);
    GridFunction out = u;
    out.core_margin = std::max(u.core_margin, 1);
    std::array<double, 2> x{};
    std::array<double, 4> q{};
    std::array<double, 2> b{};
    for (std::size_t k = 0; k < u.size(); ++k) {
        u.point(k, std::span<double>(x.data(), d));
        std::span<const double> xs(x.data(), d);
        spec.Q.eval(t, xs, std::span<double>(q.data(), d * d));
        spec.b.eval(t, xs, std::span<double>(b.data(), d));
        double v = spec.c.scalar(t, xs) * u.values[k];
        for (int a = 0; a < d; ++a) v += q[a * d + a] * g2[a].values[k] + b[a] * g1[a].values[k];
        if (d == 2) v += (q[1] + q[2]) * mixed.values[k];
        out.values[k] = v;
    }
    return out;
}

}  // namespace klab
