#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "klab/coefficients.hpp"
#include "klab/grid.hpp"

namespace klab {

using Fn1 = std::function<double(double)>;

// 64-point Gauss-Hermite rule for weight e^{-x^2}.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussHermite& gauss_hermite64();

// E[g(Y)] for Y ~ N(mean, var); var = 0 returns g(mean).
double gaussian_expectation(const Fn1& g, double mean, double var);

// Adaptive Gauss-Kronrod on [a, b] with relative tolerance tol.
double integrate(const Fn1& g, double a, double b, double tol = 1e-10);

struct OUMoments {
    double m = 1.0;  // exp(-int_s^t a)
    double v = 0.0;  // 2 int_s^t q(r) m(t,r)^2 dr
};
OUMoments ou_moments(const OUSpec1D& spec, double s, double t);

double ou_evolution(const OUSpec1D& spec, const Fn1& f, double s, double t, double x);
// G(t,s)f on every node of `layout` (1-D).
GridFunction ou_evolution_grid(const OUSpec1D& spec, const Fn1& f, double s, double t, const GridFunction& layout);

// lhs = |d/dx G(t,s)f (x)| = m |G(t,s)f'(x)|, rhs = e^{r0 (t-s)} G(t,s)|f'|(x), r0 = sup_{[s,t]} (-a).
std::pair<double, double> ou_gradient_identity(const OUSpec1D& spec, const Fn1& fprime, double s, double t,
                                               double x);

struct GaussianDensity {
    double mean = 0.0;
    double var = 1.0;
    double operator()(double x) const;
};

// Variance V(t) = 2 int_{-inf}^t q(r) exp(-2 int_r^t a) dr of the tight OU measure at time t.
GaussianDensity ou_tight_measure(const OUSpec1D& spec, double t);

// Heat flow with diffusion q: E f(x + sqrt(2 q (t-s)) Z).
double heat_evolution(double q, const Fn1& f, double s, double t, double x);
// Dirichlet eigenmode sin(pi x / R) on [-R, R] after time tau.
double heat_dirichlet_mode(double q, double R, double tau, double x);

}  // namespace klab
