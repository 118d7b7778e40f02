#include "klab/coefficients.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "klab/errors.hpp"

namespace klab {

int order_of(const MultiIndex& mi) { return std::accumulate(mi.begin(), mi.end(), 0); }

std::string multi_index_name(const MultiIndex& mi) {
    static const char* axes = "xyzw";
    std::string s;
    for (std::size_t a = 0; a < mi.size(); ++a)
        for (int k = 0; k < mi[a]; ++k) s += a < 4 ? axes[a] : '?';
    return s.empty() ? "0" : s;
}

std::vector<MultiIndex> multi_indices(int d, int order) {
    std::vector<MultiIndex> out;
    MultiIndex cur(d, 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == d - 1) {
            cur[axis] = left;
            out.push_back(cur);
            return;
        }
        for (int k = left; k >= 0; --k) {
            cur[axis] = k;
            rec(axis + 1, left - k);
        }
    };
    if (d >= 1) rec(0, order);
    return out;
}

std::size_t CoefficientField::components() const {
    switch (arity) {
        case Arity::Scalar: return 1;
        case Arity::Vector: return static_cast<std::size_t>(d);
        case Arity::Matrix: return static_cast<std::size_t>(d) * d;
    }
    return 1;
}

std::vector<double> CoefficientField::value(double t, std::span<const double> x) const {
    std::vector<double> out(components());
    eval(t, x, out);
    return out;
}

double CoefficientField::scalar(double t, std::span<const double> x) const {
    std::array<double, 16> buf{};
    eval(t, x, std::span<double>(buf.data(), components()));
    return buf[0];
}

bool CoefficientField::has_derivative(const MultiIndex& mi) const {
    if (order_of(mi) == 0) return true;
    return constant_in_x || derivatives.count(mi) > 0;
}

std::string CoefficientField::derivative_symbol(const MultiIndex& mi) const {
    return "D_" + multi_index_name(mi) + " " + symbol;
}

std::vector<double> CoefficientField::derivative(const MultiIndex& mi, double t,
                                                 std::span<const double> x) const {
    if (order_of(mi) == 0) return value(t, x);
    auto it = derivatives.find(mi);
    if (it == derivatives.end()) {
        if (constant_in_x) return std::vector<double>(components(), 0.0);
        throw Error("insufficient derivative data",
                    "insufficient derivative data: missing " + derivative_symbol(mi));
    }
    std::vector<double> out(components());
    it->second(t, x, out);
    return out;
}

CoefficientField CoefficientField::scalar_field(int d, std::string symbol,
                                                std::function<double(double, std::span<const double>)> f) {
    CoefficientField c;
    c.arity = Arity::Scalar;
    c.d = d;
    c.symbol = std::move(symbol);
    c.eval = [f](double t, std::span<const double> x, std::span<double> out) { out[0] = f(t, x); };
    return c;
}

CoefficientField CoefficientField::constant_scalar(int d, std::string symbol, double value) {
    CoefficientField c;
    c.arity = Arity::Scalar;
    c.d = d;
    c.symbol = std::move(symbol);
    c.constant_in_x = true;
    c.time_dependent = false;
    c.eval = [value](double, std::span<const double>, std::span<double> out) { out[0] = value; };
    return c;
}

CoefficientField CoefficientField::constant_matrix(int d, std::string symbol, std::vector<double> m) {
    if (m.size() != static_cast<std::size_t>(d) * d) throw Error("domain", "matrix size mismatch");
    CoefficientField c;
    c.arity = Arity::Matrix;
    c.d = d;
    c.symbol = std::move(symbol);
    c.constant_in_x = true;
    c.time_dependent = false;
    c.eval = [m](double, std::span<const double>, std::span<double> out) {
        std::copy(m.begin(), m.end(), out.begin());
    };
    return c;
}

DerivativeCheck check_registered_derivatives(const CoefficientField& f, double t_min, double t_max,
                                             double radius, int samples, double h, unsigned seed) {
    DerivativeCheck res;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-radius, radius);
    std::uniform_real_distribution<double> ut(t_min, t_max);
    const std::size_t m = f.components();
    std::vector<double> lo(m), hi(m), reg(m);
    for (const auto& [mi, ev] : f.derivatives) {
        std::size_t axis = 0;
        while (axis < mi.size() && mi[axis] == 0) ++axis;
        MultiIndex lower = mi;
        lower[axis] -= 1;
        const Evaluator* base = nullptr;
        if (order_of(lower) == 0) {
            base = &f.eval;
        } else {
            auto it = f.derivatives.find(lower);
            if (it == f.derivatives.end()) continue;
            base = &it->second;
        }
        for (int s = 0; s < samples; ++s) {
            std::vector<double> x(f.d);
            for (double& v : x) v = ux(rng);
            double t = ut(rng);
            ev(t, x, reg);
            std::vector<double> xp = x, xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            (*base)(t, xp, hi);
            (*base)(t, xm, lo);
            for (std::size_t c = 0; c < m; ++c) {
                double fd = (hi[c] - lo[c]) / (2.0 * h);
                double err = std::abs(fd - reg[c]) / std::max(1.0, std::abs(reg[c]));
                if (err > res.max_rel_error) {
                    res.max_rel_error = err;
                    res.worst_symbol = f.derivative_symbol(mi);
                }
            }
            ++res.samples;
        }
    }
    return res;
}

OUSpec1D OUSpec1D::constant(double a, double q) {
    OUSpec1D s;
    s.q = [q](double) { return q; };
    s.a = [a](double) { return a; };
    s.q_const = q;
    s.a_const = a;
    return s;
}

std::optional<double> DeclaredParams::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

double DeclaredParams::get_or(const std::string& key, double fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

void OperatorSpec::validate() const {
    if (d < 1) throw Error("domain", "dimension must be positive");
    if (!(t_min < t_max)) throw Error("domain", "time interval must be nonempty");
    if (Q.arity != Arity::Matrix || Q.d != d) throw Error("domain", "Q must be a d x d matrix field");
    if (b.arity != Arity::Vector || b.d != d) throw Error("domain", "b must be a d-vector field");
    if (c.arity != Arity::Scalar || c.d != d) throw Error("domain", "c must be a scalar field");
    if (!Q.eval || !b.eval || !c.eval) throw Error("domain", "coefficient evaluator missing");
}

double OperatorSpec::nu(double t, std::span<const double> x) const {
    std::array<double, 16> buf{};
    std::span<double> m(buf.data(), static_cast<std::size_t>(d) * d);
    Q.eval(t, x, m);
    return min_eigenvalue_sym(m, d);
}

CoefficientField OperatorSpec::lyapunov() const {
    if (phi) return *phi;
    CoefficientField f;
    f.arity = Arity::Scalar;
    f.d = d;
    f.symbol = "phi";
    f.time_dependent = false;
    f.eval = [](double, std::span<const double> x, std::span<double> out) {
        double s = 1.0;
        for (double v : x) s += v * v;
        out[0] = s;
    };
    for (int a = 0; a < d; ++a) {
        MultiIndex g(d, 0);
        g[a] = 1;
        f.derivatives[g] = [a](double, std::span<const double> x, std::span<double> out) { out[0] = 2.0 * x[a]; };
        for (int b2 = 0; b2 < d; ++b2) {
            MultiIndex hmi(d, 0);
            hmi[a] += 1;
            hmi[b2] += 1;
            double v = a == b2 ? 2.0 : 0.0;
            f.derivatives[hmi] = [v](double, std::span<const double>, std::span<double> out) { out[0] = v; };
        }
    }
    return f;
}

double min_eigenvalue_sym(std::span<const double> m, int d) {
    if (d == 1) return m[0];
    if (d == 2) {
        double a = m[0], b = 0.5 * (m[1] + m[2]), c = m[3];
        double mean = 0.5 * (a + c), diff = 0.5 * (a - c);
        return mean - std::sqrt(diff * diff + b * b);
    }
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = 0.5 * (m[i * d + j] + m[j * d + i]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue_sym(std::span<const double> m, int d) {
    if (d == 1) return m[0];
    if (d == 2) {
        double a = m[0], b = 0.5 * (m[1] + m[2]), c = m[3];
        double mean = 0.5 * (a + c), diff = 0.5 * (a - c);
        return mean + std::sqrt(diff * diff + b * b);
    }
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = 0.5 * (m[i * d + j] + m[j * d + i]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(d - 1);
}

}  // namespace klab
