#include "klab/reference_oracles.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "klab/errors.hpp"

namespace klab {

namespace {

GaussHermite build_gauss_hermite(int n) {
    // Golub-Welsch for the initial nodes, then Newton on the orthonormal recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()(i);
        double pp = 0.0;
        for (int it = 0; it < 20; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        gh.nodes[i] = x;
        gh.weights[i] = 2.0 / (pp * pp);
    }
    return gh;
}

}  // namespace

const GaussHermite& gauss_hermite64() {
    static const GaussHermite gh = build_gauss_hermite(64);
    return gh;
}

double gaussian_expectation(const Fn1& g, double mean, double var) {
    if (var < 0.0) throw Error("internal", "negative variance in Gaussian expectation");
    if (var == 0.0) return g(mean);
    const GaussHermite& gh = gauss_hermite64();
    const double scale = std::sqrt(2.0 * var);
    double s = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) s += gh.weights[i] * g(mean + scale * gh.nodes[i]);
    return s / std::sqrt(std::numbers::pi);
}

double integrate(const Fn1& g, double a, double b, double tol) {
    if (a == b) return 0.0;
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(g, a, b, 15, tol);
}

OUMoments ou_moments(const OUSpec1D& spec, double s, double t) {
    if (!(t >= s)) throw Error("domain", "OU moments need t >= s");
    OUMoments mo;
    const double tau = t - s;
    if (spec.a_const && spec.q_const) {
        const double a = *spec.a_const, q = *spec.q_const;
        mo.m = std::exp(-a * tau);
        mo.v = std::abs(a) < 1e-14 ? 2.0 * q * tau : -q * std::expm1(-2.0 * a * tau) / a;
        return mo;
    }
    if (tau == 0.0) return mo;
    auto A = [&](double r) { return integrate(spec.a, r, t); };
    mo.m = std::exp(-A(s));
    mo.v = 2.0 * integrate([&](double r) { return spec.q(r) * std::exp(-2.0 * A(r)); }, s, t);
    if (!(mo.v > 0.0)) throw Error("internal", "OU variance is not positive");
    return mo;
}

double ou_evolution(const OUSpec1D& spec, const Fn1& f, double s, double t, double x) {
    OUMoments mo = ou_moments(spec, s, t);
    return gaussian_expectation(f, mo.m * x, mo.v);
}

GridFunction ou_evolution_grid(const OUSpec1D& spec, const Fn1& f, double s, double t, const GridFunction& layout) {
    if (layout.d != 1) throw Error("unsupported", "OU oracle grids are 1-D");
    OUMoments mo = ou_moments(spec, s, t);
    GridFunction g = layout;
    for (int i = 0; i < g.n; ++i) g.values[i] = gaussian_expectation(f, mo.m * g.coord(i), mo.v);
    return g;
}

std::pair<double, double> ou_gradient_identity(const OUSpec1D& spec, const Fn1& fprime, double s, double t,
                                               double x) {
    OUMoments mo = ou_moments(spec, s, t);
    double r0 = -INFINITY;
    if (spec.a_const) {
        r0 = -*spec.a_const;
    } else {
        const int n = 2001;
        for (int i = 0; i < n; ++i) r0 = std::max(r0, -spec.a(s + (t - s) * i / (n - 1.0)));
    }
    double lhs = mo.m * std::abs(gaussian_expectation(fprime, mo.m * x, mo.v));
    double rhs = std::exp(r0 * (t - s)) *
                 gaussian_expectation([&](double y) { return std::abs(fprime(y)); }, mo.m * x, mo.v);
    return {lhs, rhs};
}

double GaussianDensity::operator()(double x) const {
    const double z = x - mean;
    return std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

GaussianDensity ou_tight_measure(const OUSpec1D& spec, double t) {
    GaussianDensity g;
    if (spec.a_const && spec.q_const) {
        if (!(*spec.a_const > 0.0)) throw Error("domain", "tight system not guaranteed: a must be positive");
        g.var = *spec.q_const / *spec.a_const;
        return g;
    }
    // Unit windows backwards from t; A accumulates int_r^t a.
    double total = 0.0, A = 0.0, right = t;
    for (int w = 0; w < 100000; ++w) {
        const double left = right - 1.0;
        const double A_right = A;
        const double part = integrate(
            [&](double r) { return spec.q(r) * std::exp(-2.0 * (A_right + integrate(spec.a, r, right))); }, left,
            right);
        total += 2.0 * part;
        A += integrate(spec.a, left, right);
        right = left;
        if (w > 50 && A < 1e-3 * w) throw Error("domain", "tight system not guaranteed: a not eventually positive");
        if (std::exp(-2.0 * A) < 1e-14 && 2.0 * part < 1e-14 * total) break;
    }
    g.var = total;
    return g;
}

double heat_evolution(double q, const Fn1& f, double s, double t, double x) {
    return gaussian_expectation(f, x, 2.0 * q * (t - s));
}

double heat_dirichlet_mode(double q, double R, double tau, double x) {
    const double k = std::numbers::pi / R;
    return std::exp(-q * k * k * tau) * std::sin(k * x);
}

}  // namespace klab
