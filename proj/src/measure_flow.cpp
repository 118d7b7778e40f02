#include "klab/measure_flow.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "klab/errors.hpp"
#include "klab/fd.hpp"
#include "klab/tridiagonal.hpp"

namespace klab {

namespace {

double bernoulli(double z) {
    if (std::abs(z) < 1e-6) return 1.0 - 0.5 * z + z * z / 12.0;
    if (z > 700.0) return z * std::exp(-z);
    if (z < -700.0) return -z;
    return z / std::expm1(z);
}

double mass(const GridFunction& g) { return trapezoid(g); }

void normalize(GridFunction& g) {
    for (double& v : g.values) v = std::max(v, 0.0);
    const double m = mass(g);
    if (!(m > 0.0)) throw Error("internal", "density lost all mass");
    for (double& v : g.values) v /= m;
}

double l1_gap(const GridFunction& a, const GridFunction& b) {
    GridFunction diff = a - b;
    for (double& v : diff.values) v = std::abs(v);
    return trapezoid(diff);
}

// Forward Fokker-Planck operator d rho/dt = d/dx( d/dx(q rho) - b rho ) with Scharfetter-Gummel
// fluxes on w = q rho and zero flux at both ends; node control volumes h (h/2 at the ends).
class FokkerPlanck {
public:
    FokkerPlanck(const OperatorSpec& spec, const GridFunction& layout) : spec_(spec), g_(layout) {
        const int n = g_.n;
        lo_.assign(n, 0.0);
        di_.assign(n, 0.0);
        up_.assign(n, 0.0);
        scratch_.assign(n, 0.0);
        rhs_.assign(n, 0.0);
    }

    void assemble(double t) {
        if (assembled_ && (t == assembled_time_ || (spec_.autonomous && !spec_.Q.time_dependent && !spec_.b.time_dependent)))
            return;
        const int n = g_.n;
        const double h = g_.h;
        std::vector<double> q(n);
        for (int i = 0; i < n; ++i) {
            const double x = g_.coord(i);
            q[i] = spec_.Q.scalar(t, std::span<const double>(&x, 1));
        }
        std::fill(lo_.begin(), lo_.end(), 0.0);
        std::fill(di_.begin(), di_.end(), 0.0);
        std::fill(up_.begin(), up_.end(), 0.0);
        for (int i = 0; i + 1 < n; ++i) {
            const double xm = g_.coord(i) + 0.5 * h;
            const double qm = spec_.Q.scalar(t, std::span<const double>(&xm, 1));
            const double a = spec_.b.scalar(t, std::span<const double>(&xm, 1)) / qm;
            const double bp = bernoulli(a * h) / h, bm = bernoulli(-a * h) / h;
            // F_{i+1/2} = bp w_{i+1} - bm w_i enters row i with + and row i+1 with -.
            const double Vi = (i == 0) ? 0.5 * h : h;
            const double Vj = (i + 1 == n - 1) ? 0.5 * h : h;
            up_[i] += bp * q[i + 1] / Vi;
            di_[i] -= bm * q[i] / Vi;
            di_[i + 1] -= bp * q[i + 1] / Vj;
            lo_[i + 1] += bm * q[i] / Vj;
        }
        assembled_ = true;
        assembled_time_ = t;
    }

    // One theta step from t to t + dt for every density in `rhos` (same operator).
    void step(std::vector<GridFunction*>& rhos, double t, double dt, double theta) {
        const int n = g_.n;
        std::vector<double> explicit_part(n);
        for (GridFunction* r : rhos) {
            if (theta < 1.0) {
                assemble(t);
                apply(r->values, explicit_part);
                for (int i = 0; i < n; ++i) rhs_[i] = r->values[i] + (1.0 - theta) * dt * explicit_part[i];
            } else {
                for (int i = 0; i < n; ++i) rhs_[i] = r->values[i];
            }
            r->values.swap(rhs_);
        }
        assemble(t + dt);
        std::vector<double> a(n), b(n), c(n);
        for (int i = 0; i < n; ++i) {
            a[i] = -theta * dt * lo_[i];
            b[i] = 1.0 - theta * dt * di_[i];
            c[i] = -theta * dt * up_[i];
        }
        for (GridFunction* r : rhos) {
            solve_tridiagonal(a, b, c, r->values, scratch_);
            normalize(*r);
        }
    }

private:
    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        const int n = g_.n;
        for (int i = 0; i < n; ++i) {
            double s = di_[i] * v[i];
            if (i > 0) s += lo_[i] * v[i - 1];
            if (i + 1 < n) s += up_[i] * v[i + 1];
            out[i] = s;
        }
    }

    const OperatorSpec& spec_;
    GridFunction g_;
    std::vector<double> lo_, di_, up_, scratch_, rhs_;
    bool assembled_ = false;
    double assembled_time_ = 0.0;
};

GridFunction gaussian_seed(const GridFunction& layout, double width) {
    GridFunction g = layout;
    for (int i = 0; i < g.n; ++i) g.values[i] = std::exp(-0.5 * g.coord(i) * g.coord(i) / (width * width));
    normalize(g);
    return g;
}

double trapezoid_fn(const GridFunction& layout, const std::function<double(double)>& w) {
    double s = 0.0;
    for (int i = 0; i < layout.n; ++i) {
        const double v = w(layout.coord(i));
        s += (i == 0 || i == layout.n - 1) ? 0.5 * v : v;
    }
    return s * layout.h;
}

}  // namespace

std::size_t MeasureFamily::index_of(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
    throw Error("domain", "time " + std::to_string(t) + " is not on the measure time grid");
}

double MeasureFamily::default_radius(std::size_t i) const {
    if (analytic()) return std::abs(gaussians[i].mean) + 12.0 * std::sqrt(gaussians[i].var);
    return densities[i].R;
}

MeasureFamily compute_measures(const OperatorSpec& spec, const std::vector<double>& t_grid, MeasureMethod method,
                               const MeasureOptions& opt) {
    spec.validate();
    if (t_grid.empty()) throw Error("domain", "empty measure time grid");
    if (!spec.c_zero) throw Error("precondition", "measures require c = 0");
    if (spec.d != 1) throw Error("unsupported", "measures are computed in one dimension only");
    std::vector<double> times = t_grid;
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    MeasureFamily fam;
    fam.times = times;
    GridFunction layout = GridFunction::with_spacing(1, opt.R, opt.h);

    if (method == MeasureMethod::Analytic) {
        if (!spec.ou) throw Error("precondition", "analytic measures need a 1-D Ornstein-Uhlenbeck operator");
        fam.provenance = "analytic-gaussian";
        for (double t : times) {
            GaussianDensity g = ou_tight_measure(*spec.ou, t);
            GridFunction rho = layout;
            for (int i = 0; i < rho.n; ++i) rho.values[i] = g(rho.coord(i));
            const double m = mass(rho);
            if (std::abs(m - 1.0) > 1e-6) fam.notes.push_back("quadrature mass off by more than 1e-6 at t = " +
                                                              std::to_string(t));
            fam.gaussians.push_back(g);
            fam.densities.push_back(std::move(rho));
        }
        return fam;
    }

    fam.provenance = "fokker-planck-burnin";
    fam.notes.push_back("uniqueness of the tight system is assumed, not proven, for this operator");
    const double theta = 0.5;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
        const double s0 = times.front() - opt.burn_length * std::pow(2.0, attempt);
        GridFunction r1 = gaussian_seed(layout, 1.0);
        GridFunction r2 = gaussian_seed(layout, 2.0);
        FokkerPlanck fp(spec, layout);
        std::vector<GridFunction*> both = {&r1, &r2};
        double t = s0;
        const int steps = std::max(1, static_cast<int>(std::ceil((times.front() - s0) / opt.dt - 1e-9)));
        const double dt = (times.front() - s0) / steps;
        double gap = l1_gap(r1, r2);
        bool monotone = true;
        for (int k = 0; k < steps; ++k) {
            if (k < 2) {
                fp.step(both, t, 0.5 * dt, 1.0);
                fp.step(both, t + 0.5 * dt, 0.5 * dt, 1.0);
            } else {
                fp.step(both, t, dt, theta);
            }
            t = s0 + (k + 1) * dt;
            const double g = l1_gap(r1, r2);
            if (g > gap * (1.0 + 1e-9) + 1e-15) monotone = false;
            gap = g;
        }
        fam.burnin_s0 = s0;
        fam.forgetting_gap = gap;
        fam.gap_monotone = monotone;
        fam.retries = attempt;
        if (gap > opt.tol_forget) continue;

        std::vector<GridFunction*> one = {&r1};
        fam.densities.push_back(r1);
        for (std::size_t i = 1; i < times.size(); ++i) {
            const int n = std::max(1, static_cast<int>(std::ceil((times[i] - t) / opt.dt - 1e-9)));
            const double ddt = (times[i] - t) / n;
            for (int k = 0; k < n; ++k) fp.step(one, t + k * ddt, ddt, theta);
            t = times[i];
            fam.densities.push_back(r1);
        }
        return fam;
    }
    throw Error("tight system not resolved", "tight system not resolved; extend burn-in");
}

double integrate_against(const MeasureFamily& fam, std::size_t i, const Fn1& g, std::optional<double> R) {
    if (i >= fam.times.size()) throw Error("domain", "measure index out of range");
    const double L = R.value_or(fam.default_radius(i));
    if (fam.analytic()) {
        const GaussianDensity& gd = fam.gaussians[i];
        auto w = [&](double x) { return g(x) * gd(x); };
        const double c = std::clamp(gd.mean, -L, L);
        return integrate(w, -L, c, 1e-12) + integrate(w, c, L, 1e-12);
    }
    const GridFunction& rho = fam.densities[i];
    double s = 0.0;
    for (int k = 0; k < rho.n; ++k) {
        const double x = rho.coord(k);
        if (std::abs(x) > L + 1e-12) continue;
        const bool edge = k == 0 || k == rho.n - 1 || std::abs(std::abs(x) - L) < 1e-9;
        s += (edge ? 0.5 : 1.0) * g(x) * rho.values[k];
    }
    return s * rho.h;
}

Propagator Propagator::solver(const OperatorSpec& spec, const ExhaustionParams& ex, const SchemeParams& scheme) {
    Propagator p;
    p.label_ = "solver";
    auto sp = std::make_shared<OperatorSpec>(spec);
    p.run_ = [sp, ex, scheme](const Fn1& f, double s, const std::vector<double>& times) {
        if (sp->d != 1) throw Error("unsupported", "propagator closures are one-dimensional");
        const double t_end = *std::max_element(times.begin(), times.end());
        ScalarFn fx = [f](std::span<const double> x) { return f(x[0]); };
        EvolutionResult res = evolution_operator(*sp, fx, s, t_end, ex, scheme, times);
        Propagated out;
        out.times = times;
        for (double t : times) {
            auto u = std::make_shared<GridFunction>(res.at_time(t));
            auto du = std::make_shared<GridFunction>(diff_axis(*u, 0, 1, true));
            out.radius = std::min(out.radius, u->R);
            out.u.push_back([u](double x) { return u->interpolate(std::span<const double>(&x, 1)); });
            out.du.push_back([du](double x) { return du->interpolate(std::span<const double>(&x, 1)); });
        }
        return out;
    };
    return p;
}

Propagator Propagator::ou_oracle(const OperatorSpec& spec) {
    if (!spec.ou) throw Error("precondition", "the closed-form propagator needs a 1-D Ornstein-Uhlenbeck operator");
    Propagator p;
    p.label_ = "ou-closed-form";
    const OUSpec1D ou = *spec.ou;
    p.run_ = [ou](const Fn1& f, double s, const std::vector<double>& times) {
        Propagated out;
        out.times = times;
        for (double t : times) {
            const OUMoments mo = ou_moments(ou, s, t);
            Fn1 u = [f, mo](double x) { return gaussian_expectation(f, mo.m * x, mo.v); };
            out.u.push_back(u);
            out.du.push_back([u](double x) {
                const double d = 1e-4 * std::max(1.0, std::abs(x));
                return (u(x + d) - u(x - d)) / (2.0 * d);
            });
        }
        return out;
    };
    return p;
}

Propagated Propagator::apply(const Fn1& f, double s, const std::vector<double>& times) const {
    for (double t : times)
        if (!(t > s)) throw Error("domain", "propagation times must exceed s");
    return run_(f, s, times);
}

EstimateReport check_invariance(const OperatorSpec& spec, const MeasureFamily& fam, const Fn1& f, double s, double t,
                                const InvarianceOptions& opt) {
    if (!(s < t)) throw Error("domain", "invariance needs s < t");
    const std::size_t is = fam.index_of(s), it = fam.index_of(t);
    ScalarFn fx = [f](std::span<const double> x) { return f(x[0]); };
    EvolutionResult res = evolution_operator(spec, fx, s, t, opt.ex, opt.scheme);
    const GridFunction& u = res.final();
    auto rho_t = [&](double x) {
        if (fam.analytic()) return fam.gaussians[it](x);
        return fam.densities[it].interpolate(std::span<const double>(&x, 1));
    };
    EstimateReport rep;
    rep.id = "invariance";
    const double lhs = trapezoid_fn(u, [&](double x) {
        const int i = static_cast<int>(std::lround((x + u.R) / u.h));
        return u.values[i] * rho_t(x);
    });
    const double rhs = integrate_against(fam, is, f);
    const double edge = std::max(std::abs(u.values.front()) * rho_t(-u.R), std::abs(u.values.back()) * rho_t(u.R));
    const double tol = opt.tol.value_or(fam.analytic() ? 1e-5 : 1e-3);
    if (edge * u.R > 0.1 * tol) rep.notes.push_back("tail truncation dominates");
    rep.values["lhs"] = lhs;
    rep.values["rhs"] = rhs;
    rep.values["s"] = s;
    rep.values["t"] = t;
    rep.values["solver_core_radius"] = u.R;
    rep.worst_margin = -std::abs(lhs - rhs);
    rep.tolerance = tol;
    rep.notes.push_back("measures: " + fam.provenance);
    rep.finalize();
    return rep;
}

TightnessReport check_tightness(const MeasureFamily& fam, const std::vector<double>& radii, double epsilon) {
    TightnessReport rep;
    rep.radii = radii;
    rep.epsilon = epsilon;
    for (double r : radii) {
        double sup = 0.0;
        for (std::size_t i = 0; i < fam.times.size(); ++i) {
            double tail;
            if (fam.analytic()) {
                const GaussianDensity& g = fam.gaussians[i];
                const double sd = std::sqrt(2.0 * g.var);
                tail = r <= 0.0 ? 1.0 : 0.5 * std::erfc((r - g.mean) / sd) + 0.5 * std::erfc((r + g.mean) / sd);
            } else {
                const GridFunction& rho = fam.densities[i];
                if (r <= 0.0) {
                    tail = 1.0;
                } else {
                    const double rr = std::min(r, rho.R);
                    // Trapezoid over [-rr, rr] with interpolated end values.
                    double inner = 0.0;
                    double prev_x = -rr;
                    double prev_v = rho.interpolate(std::span<const double>(&prev_x, 1));
                    for (int k = 0; k < rho.n; ++k) {
                        const double x = rho.coord(k);
                        if (x <= -rr || x >= rr) continue;
                        inner += 0.5 * (x - prev_x) * (prev_v + rho.values[k]);
                        prev_x = x;
                        prev_v = rho.values[k];
                    }
                    inner += 0.5 * (rr - prev_x) * (prev_v + rho.interpolate(std::span<const double>(&rr, 1)));
                    tail = std::max(0.0, mass(rho) - inner);
                }
            }
            sup = std::max(sup, tail);
        }
        rep.sup_tail.push_back(sup);
        if (!rep.tight_radius && sup <= epsilon) rep.tight_radius = r;
    }
    return rep;
}

nlohmann::json TightnessReport::to_json() const {
    nlohmann::json j = {{"radii", radii}, {"sup_tail", sup_tail}, {"epsilon", epsilon}};
    j["tight_radius"] = tight_radius ? nlohmann::json(*tight_radius) : nlohmann::json(nullptr);
    return j;
}

AverageNorm average_and_norms(const MeasureFamily& fam, const Fn1& f, double s, double p) {
    if (!(p >= 1.0)) throw Error("domain", "p must be at least 1");
    const std::size_t i = fam.index_of(s);
    AverageNorm out;
    out.average = integrate_against(fam, i, f);
    out.norm = std::pow(integrate_against(fam, i, [&](double x) { return std::pow(std::abs(f(x)), p); }), 1.0 / p);
    return out;
}

double l1_distance_to(const GridFunction& density, const Fn1& unnormalized) {
    GridFunction g = density;
    for (int i = 0; i < g.n; ++i) g.values[i] = unnormalized(g.coord(i));
    const double m = trapezoid(g);
    if (!(m > 0.0)) throw Error("domain", "reference density has no mass on the grid");
    for (double& v : g.values) v /= m;
    return l1_gap(g, density);
}

}  // namespace klab
