#include <cmath>

#include "doctest.h"
#include "klab/errors.hpp"
#include "klab/feller1d.hpp"

using namespace klab;

namespace {

// Composite Simpson rule with 2000 panels.
template <class F>
double simpson(F f, double a, double b) {
    const int n = 2000;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("categorical verdicts") {
    CHECK(classify(feller_problem("const", "cubic_plus")).conclusion == "infinitely many bounded solutions");
    CHECK(classify(feller_problem("const", "cubic_minus")).conclusion == "unique bounded solution");
    CHECK(classify(feller_problem("const", "zero")).conclusion == "unique bounded solution");
    CHECK(classify(feller_problem("const", "linear:1")).conclusion == "unique bounded solution");
}

TEST_CASE("power drift with eps = 1: Q integrable, R not") {
    auto v = classify(feller_problem("const", "power:1"));
    CHECK(v.Q_plus.verdict == Integrability::Integrable);
    CHECK(v.Q_minus.verdict == Integrability::Integrable);
    CHECK(v.R_plus.verdict == Integrability::NonIntegrable);
    CHECK(v.R_minus.verdict == Integrability::NonIntegrable);
    // Q(x) ~ 1/x^2 at infinity.
    CHECK(v.Q_plus.exponent == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("asymptotic probe") {
    CHECK(std::abs(asymptotic_probe(feller_problem("const", "power:1"), 1.5)) <= 1e-3);
    // Heat: Q(x) = x.
    CHECK(asymptotic_probe(feller_problem("const", "zero"), -1.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::isinf(asymptotic_probe(feller_problem("const", "zero"), 0.0)));
    CHECK_THROWS_AS(asymptotic_probe(feller_problem("const", "zero"), INFINITY), Error);
}

TEST_CASE("W, Q, R at the origin and for the heat problem") {
    auto heat = feller_problem("const", "zero");
    auto f0 = feller_functions(heat, 0.0);
    CHECK(f0.W == 1.0);
    CHECK(f0.Q == 0.0);
    CHECK(f0.R == 0.0);
    auto f2 = feller_functions(heat, 2.0);
    CHECK(f2.W == doctest::Approx(1.0));
    CHECK(f2.Q == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(f2.R == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("linear drift against direct quadrature") {
    const double a = 1.0, x = 1.5;
    auto v = feller_functions(feller_problem("const", "linear:1"), x);
    const double W = std::exp(a * x * x / 2);
    CHECK(v.W == doctest::Approx(W).epsilon(1e-8));
    const double R = W * simpson([&](double y) { return std::exp(-a * y * y / 2); }, 0.0, x);
    const double Q = simpson([&](double y) { return std::exp(a * y * y / 2); }, 0.0, x) / W;
    CHECK(v.R == doctest::Approx(R).epsilon(1e-7));
    CHECK(v.Q == doctest::Approx(Q).epsilon(1e-7));
}

TEST_CASE("reflection symmetry for odd drift") {
    auto pb = feller_problem("const", "cubic_minus");
    for (double x : {0.5, 1.0, 2.0}) {
        auto p = feller_functions(pb, x), m = feller_functions(pb, -x);
        CHECK(m.W == doctest::Approx(p.W).epsilon(1e-12));
        CHECK(m.Q == doctest::Approx(-p.Q).epsilon(1e-12));
        CHECK(m.R == doctest::Approx(-p.R).epsilon(1e-12));
    }
}

TEST_CASE("scaling q and b together") {
    auto base = feller_problem("const:1", "linear:1");
    auto scaled = feller_problem("const:2", "linear:2");
    for (double x : {0.7, 1.8}) {
        auto u = feller_functions(base, x), v = feller_functions(scaled, x);
        CHECK(v.W == doctest::Approx(u.W).epsilon(1e-10));
        CHECK(v.Q == doctest::Approx(u.Q / 2).epsilon(1e-10));
        CHECK(v.R == doctest::Approx(u.R / 2).epsilon(1e-10));
    }
    CHECK(classify(scaled).conclusion == classify(base).conclusion);
}

TEST_CASE("bad identifiers") {
    CHECK_THROWS_AS(feller_problem("const", "mystery"), Error);
    CHECK_THROWS_AS(feller_problem("const:abc", "zero"), Error);
}
