#include "klab/evolution_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <sstream>

#include "klab/errors.hpp"
#include "klab/tridiagonal.hpp"

namespace klab {

const GridFunction& EvolutionResult::at_time(double t) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < t_grid.size(); ++k)
        if (std::abs(t_grid[k] - t) < std::abs(t_grid[best] - t)) best = k;
    return snapshots[best];
}

namespace {

// Coefficients of the discrete operator at one time level. In 1-D only the x-arrays are used.
struct DiscreteOp {
    double t = NAN;
    std::vector<double> lo_x, di_x, up_x, lo_y, di_y, up_y, cross;
    double c_max = -INFINITY;
    double peclet = 0.0;
    double diag_max = 0.0;  // max of 2 q / h^2 - c, for the explicit-part positivity bound
    bool has_cross = false;
};

class Stepper {
public:
    Stepper(const OperatorSpec& spec, const GridFunction& grid) : spec_(spec), g_(grid) {
        const std::size_t n = g_.n;
        a_.resize(n);
        b_.resize(n);
        c_.resize(n);
        rhs_.resize(n);
        scratch_.resize(n);
        tmp0_.resize(g_.size());
        tmp1_.resize(g_.size());
        tmp2_.resize(g_.size());
        tmp3_.resize(g_.size());
    }

    const DiscreteOp& op(double t) {
        const bool frozen = spec_.autonomous;
        for (auto& slot : cache_)
            if (slot.t == t || (frozen && !std::isnan(slot.t))) return slot;
        DiscreteOp& slot = cache_[next_];
        next_ = (next_ + 1) % cache_.size();
        build(t, slot);
        c_max_ = std::max(c_max_, slot.c_max);
        peclet_ = std::max(peclet_, slot.peclet);
        diag_max_ = std::max(diag_max_, slot.diag_max);
        has_cross_ = has_cross_ || slot.has_cross;
        return slot;
    }

    void advance(std::vector<double>& u, double t, double dt, double theta) {
        if (g_.d == 1) advance1(u, t, dt, theta);
        else advance2(u, t, dt, theta);
    }

    double c_max() const { return c_max_; }
    double peclet() const { return peclet_; }
    double diag_max() const { return diag_max_; }
    bool has_cross() const { return has_cross_; }

private:
    void build(double t, DiscreteOp& o) {
        const int d = g_.d;
        const double h = g_.h, h2 = h * h;
        const std::size_t N = g_.size();
        o = DiscreteOp{};
        o.t = t;
        o.lo_x.assign(N, 0.0);
        o.di_x.assign(N, 0.0);
        o.up_x.assign(N, 0.0);
        if (d == 2) {
            o.lo_y.assign(N, 0.0);
            o.di_y.assign(N, 0.0);
            o.up_y.assign(N, 0.0);
            o.cross.assign(N, 0.0);
        }
        std::array<double, 2> x{};
        std::array<double, 4> q{};
        std::array<double, 2> b{};
        double c = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            if (!g_.in_core(k, 1)) continue;
            g_.point(k, std::span<double>(x.data(), d));
            std::span<const double> xs(x.data(), d);
            spec_.Q.eval(t, xs, std::span<double>(q.data(), d * d));
            spec_.b.eval(t, xs, std::span<double>(b.data(), d));
            spec_.c.eval(t, xs, std::span<double>(&c, 1));
            o.c_max = std::max(o.c_max, c);
            if (d == 1) {
                o.lo_x[k] = q[0] / h2 - b[0] / (2.0 * h);
                o.di_x[k] = -2.0 * q[0] / h2 + c;
                o.up_x[k] = q[0] / h2 + b[0] / (2.0 * h);
                o.peclet = std::max(o.peclet, std::abs(b[0]) * h / (2.0 * q[0]));
                o.diag_max = std::max(o.diag_max, 2.0 * q[0] / h2 - c);
            } else {
                const double q11 = q[0], q12 = 0.5 * (q[1] + q[2]), q22 = q[3];
                if (std::abs(q12) > 0.9 * std::sqrt(q11 * q22) + 1e-14)
                    throw Error("unsupported", "off-diagonal diffusion exceeds 0.9 sqrt(q11 q22) at a grid node");
                o.lo_x[k] = q11 / h2 - b[0] / (2.0 * h);
                o.di_x[k] = -2.0 * q11 / h2 + 0.5 * c;
                o.up_x[k] = q11 / h2 + b[0] / (2.0 * h);
                o.lo_y[k] = q22 / h2 - b[1] / (2.0 * h);
                o.di_y[k] = -2.0 * q22 / h2 + 0.5 * c;
                o.up_y[k] = q22 / h2 + b[1] / (2.0 * h);
                o.cross[k] = 2.0 * q12 / (4.0 * h2);
                o.has_cross = o.has_cross || q12 != 0.0;
                o.peclet = std::max({o.peclet, std::abs(b[0]) * h / (2.0 * q11), std::abs(b[1]) * h / (2.0 * q22)});
                o.diag_max = std::max(o.diag_max, 2.0 * (q11 + q22) / h2 - c);
            }
        }
    }

    void apply1(const DiscreteOp& o, const std::vector<double>& u, std::vector<double>& out) const {
        const int n = g_.n;
        out[0] = out[n - 1] = 0.0;
        for (int i = 1; i < n - 1; ++i) out[i] = o.lo_x[i] * u[i - 1] + o.di_x[i] * u[i] + o.up_x[i] * u[i + 1];
    }

    void advance1(std::vector<double>& u, double t, double dt, double theta) {
        const int n = g_.n;
        const DiscreteOp& A0 = op(t);
        if (theta < 1.0) {
            apply1(A0, u, tmp0_);
            for (int i = 0; i < n; ++i) rhs_[i] = u[i] + (1.0 - theta) * dt * tmp0_[i];
        } else {
            std::copy(u.begin(), u.end(), rhs_.begin());
        }
        const DiscreteOp& A1 = op(t + dt);
        a_[0] = c_[0] = 0.0;
        b_[0] = 1.0;
        rhs_[0] = 0.0;
        a_[n - 1] = c_[n - 1] = 0.0;
        b_[n - 1] = 1.0;
        rhs_[n - 1] = 0.0;
        for (int i = 1; i < n - 1; ++i) {
            a_[i] = -theta * dt * A1.lo_x[i];
            b_[i] = 1.0 - theta * dt * A1.di_x[i];
            c_[i] = -theta * dt * A1.up_x[i];
        }
        solve_tridiagonal(a_, b_, c_, rhs_, scratch_);
        std::copy(rhs_.begin(), rhs_.end(), u.begin());
    }

    // A_axis u (with half of c) on interior nodes.
    void apply_dir(const DiscreteOp& o, int axis, const std::vector<double>& u, std::vector<double>& out) const {
        const int n = g_.n;
        std::fill(out.begin(), out.end(), 0.0);
        const int stride = axis == 0 ? n : 1;
        const auto& lo = axis == 0 ? o.lo_x : o.lo_y;
        const auto& di = axis == 0 ? o.di_x : o.di_y;
        const auto& up = axis == 0 ? o.up_x : o.up_y;
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * n + j;
                out[k] = lo[k] * u[k - stride] + di[k] * u[k] + up[k] * u[k + stride];
            }
    }

    void apply_cross(const DiscreteOp& o, const std::vector<double>& u, std::vector<double>& out) const {
        const int n = g_.n;
        std::fill(out.begin(), out.end(), 0.0);
        if (!o.has_cross) return;
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * n + j;
                out[k] = o.cross[k] * (u[k + n + 1] - u[k + n - 1] - u[k - n + 1] + u[k - n - 1]);
            }
    }

    void line_solve(const DiscreteOp& o, int axis, double theta, double dt, std::vector<double>& v) {
        const int n = g_.n;
        const auto& lo = axis == 0 ? o.lo_x : o.lo_y;
        const auto& di = axis == 0 ? o.di_x : o.di_y;
        const auto& up = axis == 0 ? o.up_x : o.up_y;
        for (int line = 1; line < n - 1; ++line) {
            for (int m = 0; m < n; ++m) {
                const std::size_t k = axis == 0 ? static_cast<std::size_t>(m) * n + line
                                                : static_cast<std::size_t>(line) * n + m;
                if (m == 0 || m == n - 1) {
                    a_[m] = c_[m] = 0.0;
                    b_[m] = 1.0;
                    rhs_[m] = 0.0;
                } else {
                    a_[m] = -theta * dt * lo[k];
                    b_[m] = 1.0 - theta * dt * di[k];
                    c_[m] = -theta * dt * up[k];
                    rhs_[m] = v[k];
                }
            }
            solve_tridiagonal(a_, b_, c_, rhs_, scratch_);
            for (int m = 0; m < n; ++m) {
                const std::size_t k = axis == 0 ? static_cast<std::size_t>(m) * n + line
                                                : static_cast<std::size_t>(line) * n + m;
                v[k] = rhs_[m];
            }
        }
        // Lines on the boundary stay zero.
        for (int m = 0; m < n; ++m) {
            for (int edge : {0, n - 1}) {
                const std::size_t k = axis == 0 ? static_cast<std::size_t>(m) * n + edge
                                                : static_cast<std::size_t>(edge) * n + m;
                v[k] = 0.0;
            }
        }
    }

    void advance2(std::vector<double>& u, double t, double dt, double theta) {
        const std::size_t N = g_.size();
        const DiscreteOp& A0 = op(t);
        apply_dir(A0, 0, u, tmp0_);
        apply_dir(A0, 1, u, tmp1_);
        apply_cross(A0, u, tmp2_);
        for (std::size_t k = 0; k < N; ++k) tmp3_[k] = u[k] + dt * (tmp0_[k] + tmp1_[k] + tmp2_[k]);
        const DiscreteOp& A1 = op(t + dt);
        for (std::size_t k = 0; k < N; ++k) tmp3_[k] -= theta * dt * tmp0_[k];
        line_solve(A1, 0, theta, dt, tmp3_);
        for (std::size_t k = 0; k < N; ++k) tmp3_[k] -= theta * dt * tmp1_[k];
        line_solve(A1, 1, theta, dt, tmp3_);
        std::copy(tmp3_.begin(), tmp3_.end(), u.begin());
    }

    const OperatorSpec& spec_;
    const GridFunction& g_;
    std::array<DiscreteOp, 3> cache_;
    std::size_t next_ = 0;
    double c_max_ = -INFINITY;
    double peclet_ = 0.0;
    double diag_max_ = 0.0;
    bool has_cross_ = false;
    std::vector<double> a_, b_, c_, rhs_, scratch_, tmp0_, tmp1_, tmp2_, tmp3_;
};

void zero_boundary(GridFunction& g) {
    for (std::size_t k = 0; k < g.size(); ++k)
        if (!g.in_core(k, 1)) g.values[k] = 0.0;
}

double round_to_grid(double R, double h) { return h * std::max(2.0, std::round(R / h)); }

}  // namespace

EvolutionResult solve_dirichlet(const OperatorSpec& spec, const GridFunction& f, double s, double t_end,
                                const SchemeParams& params, const std::vector<double>& snapshot_times) {
    spec.validate();
    f.validate();
    if (f.d != spec.d) throw Error("domain", "datum dimension differs from the operator's");
    if (!(t_end > s)) throw Error("domain", "solve needs t_end > s");
    if (!(params.dt > 0.0)) throw Error("domain", "time step must be positive");
    if (params.theta < 0.5 || params.theta > 1.0) throw Error("domain", "theta must lie in [0.5, 1]");

    const int steps = std::max(1, static_cast<int>(std::ceil((t_end - s) / params.dt - 1e-9)));
    const double dt = (t_end - s) / steps;
    std::map<int, bool> snap;
    snap[steps] = true;
    for (double tau : snapshot_times) {
        if (tau <= s) continue;
        int idx = static_cast<int>(std::lround((std::min(tau, t_end) - s) / dt));
        snap[std::clamp(idx, 1, steps)] = true;
    }

    EvolutionResult res;
    res.s = s;
    res.theta = params.theta;
    res.dt = dt;
    res.h = f.h;
    GridFunction u = f;
    u.core_margin = 0;
    zero_boundary(u);
    res.t_grid.push_back(s);
    res.snapshots.push_back(u);
    const double sup_f = std::max(f.sup_abs(0), 1e-300);

    Stepper stepper(spec, u);
    stepper.op(s);
    for (int k = 0; k < steps; ++k) {
        const double t = s + k * dt;
        if (params.theta < 1.0 && k < params.rannacher_steps) {
            stepper.advance(u.values, t, 0.5 * dt, 1.0);
            stepper.advance(u.values, t + 0.5 * dt, 0.5 * dt, 1.0);
        } else {
            stepper.advance(u.values, t, dt, params.theta);
        }
        if (k % 16 == 15 || k + 1 == steps) {
            for (double v : u.values)
                if (!std::isfinite(v)) {
                    std::ostringstream msg;
                    msg << "non-finite value produced; blow-up at t = " << t + dt;
                    throw Error("blow-up", msg.str());
                }
        }
        if (snap.count(k + 1)) {
            res.t_grid.push_back(s + (k + 1) * dt);
            res.snapshots.push_back(u);
        }
    }

    res.c0_box = stepper.c_max();
    res.max_peclet = stepper.peclet();
    res.reality_excess = -INFINITY;
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
        const double bound = std::exp(res.c0_box * (res.t_grid[k] - s)) * sup_f;
        res.reality_excess = std::max(res.reality_excess, (res.snapshots[k].sup_abs(0) - bound) / sup_f);
    }
    bool mp = res.max_peclet <= 1.0 && !stepper.has_cross();
    if (params.theta < 1.0) mp = mp && (1.0 - params.theta) * dt * stepper.diag_max() <= 1.0;
    res.maximum_principle = mp;
    if (res.max_peclet > 1.0) {
        std::ostringstream w;
        w << "Peclet warning: cell Peclet number " << res.max_peclet << " > 1, central drift differences may oscillate";
        res.warnings.push_back(w.str());
    }
    if (!mp) res.warnings.push_back("discrete maximum principle not guaranteed for this theta, dt and h");
    return res;
}

EvolutionResult evolution_operator(const OperatorSpec& spec, const ScalarFn& f, double s, double t_end,
                                   const ExhaustionParams& ex, const SchemeParams& params,
                                   const std::vector<double>& snapshot_times) {
    if (ex.max_levels < 1) throw Error("domain", "need at least one exhaustion level");
    if (!(ex.core_fraction > 0.0 && ex.core_fraction < 1.0)) throw Error("domain", "core fraction must be in (0,1)");
    const double h = params.h;
    EvolutionResult prev;
    double prev_R = 0.0;
    bool have_prev = false;
    std::vector<double> radii, diffs;
    double mono = 0.0;
    bool mono_checked = false;
    std::string status = "exhaustion not converged";
    int level = 0;
    for (; level < ex.max_levels; ++level) {
        const double R = round_to_grid(ex.R_start + level * ex.R_step, h);
        GridFunction f0 = GridFunction::with_spacing(spec.d, R, h);
        f0 = GridFunction::sample(f, spec.d, f0.n, R);
        EvolutionResult cur = solve_dirichlet(spec, f0, s, t_end, params, snapshot_times);
        radii.push_back(R);
        if (have_prev) {
            const double R_core = h * std::floor(ex.core_fraction * prev_R / h + 1e-9);
            double diff = 0.0;
            for (std::size_t k = 0; k < cur.snapshots.size(); ++k) {
                GridFunction a = cur.snapshots[k].restrict_to(R_core);
                GridFunction b = prev.snapshots[k].restrict_to(R_core);
                for (std::size_t m = 0; m < a.size(); ++m) diff = std::max(diff, std::abs(a.values[m] - b.values[m]));
            }
            diffs.push_back(diff);
            const bool f_nonneg = f0.min_value(0) >= 0.0;
            if (f_nonneg && cur.c0_box <= 0.0) {
                mono_checked = true;
                for (std::size_t k = 0; k < cur.snapshots.size(); ++k) {
                    GridFunction a = cur.snapshots[k].restrict_to(prev_R);
                    const GridFunction& b = prev.snapshots[k];
                    for (std::size_t m = 0; m < a.size(); ++m) mono = std::max(mono, b.values[m] - a.values[m]);
                }
            }
            prev = std::move(cur);
            if (diff <= ex.tol_exhaust) {
                status = "converged";
                prev_R = R;
                break;
            }
        } else {
            prev = std::move(cur);
        }
        prev_R = R;
        have_prev = true;
    }
    EvolutionResult res = std::move(prev);
    res.domain_level = static_cast<int>(radii.size()) - 1;
    res.level_radii = radii;
    res.level_differences = diffs;
    res.monotone_violation = mono;
    res.monotone_checked = mono_checked;
    res.status = ex.max_levels == 1 ? "single box" : status;
    if (mono_checked && mono > 1e-10)
        res.warnings.push_back("monotone exhaustion violated on shared nodes");
    // Certified region: core of the smaller of the last two boxes.
    const double R_cert = radii.size() >= 2 ? radii[radii.size() - 2] : radii.back();
    const double R_core = h * std::floor(ex.core_fraction * R_cert / h + 1e-9);
    for (auto& snap : res.snapshots) snap = snap.restrict_to(R_core);
    return res;
}

EstimateReport check_evolution_law(const OperatorSpec& spec, const ScalarFn& f, double s, double r, double t,
                                   const ExhaustionParams& ex, const SchemeParams& params, double tol_law) {
    if (!(s <= r && r <= t && s < t)) throw Error("domain", "evolution law needs s <= r <= t with s < t");
    EstimateReport rep;
    rep.id = "evolution_law";
    rep.tolerance = tol_law;
    EvolutionResult direct = evolution_operator(spec, f, s, t, ex, params);
    const double R_box = direct.level_radii.size() >= 1 ? direct.level_radii.back() : ex.R_start;
    GridFunction f0 = GridFunction::with_spacing(spec.d, R_box, params.h);
    f0 = GridFunction::sample(f, spec.d, f0.n, R_box);
    GridFunction lhs_full = solve_dirichlet(spec, f0, s, t, params).final();
    GridFunction mid = f0;
    if (r > s) mid = solve_dirichlet(spec, f0, s, r, params).final();
    GridFunction rhs_full = r < t ? solve_dirichlet(spec, mid, r, t, params).final() : mid;
    const double R_core = direct.final().R;
    rep.lhs = lhs_full.restrict_to(R_core);
    rep.rhs = rhs_full.restrict_to(R_core);
    double worst = 0.0;
    for (std::size_t k = 0; k < rep.lhs.size(); ++k) worst = std::max(worst, std::abs(rep.lhs.values[k] - rep.rhs.values[k]));
    rep.values["sup_difference"] = worst;
    rep.values["s"] = s;
    rep.values["r"] = r;
    rep.values["t"] = t;
    rep.values["box_half_width"] = R_box;
    rep.worst_margin = -worst;
    rep.notes.push_back("both routes on the same box; sup over the core region");
    rep.finalize();
    return rep;
}

void export_csv(const EvolutionResult& res, std::ostream& os) {
    if (res.snapshots.empty()) return;
    const int d = res.snapshots.front().d;
    os << (d == 1 ? "t,x,u\n" : "t,x,y,u\n");
    os.precision(17);
    std::array<double, 2> x{};
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
        const GridFunction& g = res.snapshots[k];
        for (std::size_t m = 0; m < g.size(); ++m) {
            g.point(m, std::span<double>(x.data(), d));
            os << res.t_grid[k] << ',' << x[0];
            if (d == 2) os << ',' << x[1];
            os << ',' << g.values[m] << '\n';
        }
    }
}

namespace {
template <class T>
void put_le(std::ostream& os, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}
}  // namespace

void export_binary(const EvolutionResult& res, std::ostream& os) {
    if (res.snapshots.empty()) return;
    const GridFunction& g0 = res.snapshots.front();
    put_le<std::int32_t>(os, g0.d);
    put_le<std::int32_t>(os, g0.n);
    put_le<double>(os, g0.R);
    put_le<std::int32_t>(os, static_cast<std::int32_t>(res.snapshots.size()));
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
        put_le<double>(os, res.t_grid[k]);
        for (double v : res.snapshots[k].values) put_le<double>(os, v);
    }
}

}  // namespace klab
