#include <cmath>
#include <numbers>

#include "doctest.h"
#include "klab/reference_oracles.hpp"

using namespace klab;

TEST_CASE("Gauss-Hermite rule integrates low moments exactly") {
    const auto& gh = gauss_hermite64();
    REQUIRE(gh.nodes.size() == 64);
    double m0 = 0, m2 = 0, m4 = 0;
    for (std::size_t i = 0; i < 64; ++i) {
        const double x = gh.nodes[i], w = gh.weights[i];
        m0 += w;
        m2 += w * x * x;
        m4 += w * x * x * x * x;
    }
    const double sp = std::sqrt(std::numbers::pi);
    CHECK(m0 == doctest::Approx(sp).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(sp / 2).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3 * sp / 4).epsilon(1e-13));
}

TEST_CASE("gaussian_expectation and integrate") {
    CHECK(gaussian_expectation([](double y) { return y * y; }, 1.0, 2.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(gaussian_expectation([](double y) { return std::cos(y); }, 0.0, 1.0) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(gaussian_expectation([](double y) { return y; }, 0.7, 0.0) == 0.7);
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("OU moments with constant coefficients") {
    auto spec = OUSpec1D::constant(1.0, 1.0);
    auto mv = ou_moments(spec, 0.0, 1.0);
    CHECK(mv.m == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(mv.v == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("OU moments compose along s <= r <= t") {
    OUSpec1D spec;
    spec.a = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    spec.q = [](double t) { return 1.0 + 0.2 * std::cos(t); };
    const double s = 0.0, r = 0.7, t = 1.9;
    auto st = ou_moments(spec, s, t), sr = ou_moments(spec, s, r), rt = ou_moments(spec, r, t);
    CHECK(st.m == doctest::Approx(rt.m * sr.m).epsilon(1e-9));
    CHECK(st.v == doctest::Approx(rt.m * rt.m * sr.v + rt.v).epsilon(1e-9));
}

TEST_CASE("closed forms for polynomial data") {
    auto spec = OUSpec1D::constant(1.0, 1.0);
    for (double x : {-2.0, 0.0, 0.5, 3.0}) {
        CHECK(ou_evolution(spec, [](double y) { return y; }, 0.0, 1.0, x) ==
              doctest::Approx(std::exp(-1.0) * x).epsilon(1e-13));
        const double e2 = std::exp(-2.0);
        CHECK(ou_evolution(spec, [](double y) { return y * y; }, 0.0, 1.0, x) ==
              doctest::Approx(e2 * x * x + 1.0 - e2).epsilon(1e-12));
    }
}

TEST_CASE("grid evaluation matches pointwise evaluation") {
    auto spec = OUSpec1D::constant(2.0, 0.5);
    GridFunction layout = GridFunction::zeros(1, 21, 2.0);
    auto g = ou_evolution_grid(spec, [](double y) { return std::tanh(y); }, 0.0, 0.5, layout);
    for (int i = 0; i < layout.n; ++i)
        CHECK(g.at(i) == ou_evolution(spec, [](double y) { return std::tanh(y); }, 0.0, 0.5, layout.coord(i)));
}

TEST_CASE("gradient identity is an equality for monotone data and strict for even data at 0") {
    auto spec = OUSpec1D::constant(1.0, 1.0);
    auto fp = [](double y) { return 1.0 / (std::cosh(y) * std::cosh(y)); };  // tanh' > 0
    for (double x : {-1.0, 0.0, 2.0}) {
        auto [lhs, rhs] = ou_gradient_identity(spec, fp, 0.0, 1.0, x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    auto [lhs, rhs] = ou_gradient_identity(spec, [](double y) { return -2.0 * y * std::exp(-y * y); }, 0.0, 1.0, 0.0);
    CHECK(lhs <= 1e-14);
    CHECK(rhs > 0.1);
}

TEST_CASE("tight OU measure") {
    auto unit = ou_tight_measure(OUSpec1D::constant(1.0, 1.0), 3.0);
    CHECK(unit.mean == 0.0);
    CHECK(unit.var == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(unit(0.0) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-12));
    auto scaled = ou_tight_measure(OUSpec1D::constant(1.0, 2.5), 0.0);
    CHECK(scaled.var == doctest::Approx(2.5).epsilon(1e-12));

    OUSpec1D periodic;
    periodic.a = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    periodic.q = [](double) { return 1.0; };
    const double v0 = ou_tight_measure(periodic, 0.4).var;
    CHECK(ou_tight_measure(periodic, 0.4 + 2 * std::numbers::pi).var == doctest::Approx(v0).epsilon(1e-8));
    // The tight family is carried by the flow: V(t) = m^2 V(s) + v.
    auto mv = ou_moments(periodic, 0.4, 1.3);
    CHECK(ou_tight_measure(periodic, 1.3).var == doctest::Approx(mv.m * mv.m * v0 + mv.v).epsilon(1e-8));
}

TEST_CASE("heat oracles") {
    CHECK(heat_evolution(1.0, [](double y) { return y * y; }, 0.0, 0.5, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    const double R = 2.0, tau = 0.3;
    const double k = std::numbers::pi / R;
    CHECK(heat_dirichlet_mode(1.0, R, tau, 0.5) == doctest::Approx(std::exp(-k * k * tau) * std::sin(k * 0.5)));
}
