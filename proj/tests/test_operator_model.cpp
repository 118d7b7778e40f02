#include <cmath>
#include <random>

#include "doctest.h"
#include "klab/catalogue.hpp"
#include "klab/errors.hpp"
#include "klab/operator_model.hpp"

using namespace klab;

namespace {
SamplingWindow small_window(double radius = 10.0) { return SamplingWindow{radius, 65, 8, std::nullopt, std::nullopt, 1e-3}; }
}  // namespace

TEST_CASE("OU satisfies H3.1(1) with r0 = -1, r = 0, C = 0") {
    auto rep = check_hypotheses(make_ou(1.0, 1.0), Profile::H3_1, small_window(), 1);
    CHECK(rep.satisfied());
    CHECK(rep.label == "sampled, not proven");
    // Jac b = -1 everywhere and every derivative of q vanishes.
    CHECK(rep.inferred.at("r0") == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(rep.inferred.at("r") == doctest::Approx(0.0));
    CHECK(rep.inferred.at("C") == doctest::Approx(0.0));
}

TEST_CASE("indefinite diffusion matrix violates H1.1 with eigenvalue -1") {
    auto spec = spec_from_json({{"name", "indef"},
                                {"d", 2},
                                {"diffusion", {{"type", "matrix"}, {"entries", {1.0, 2.0, 2.0, 1.0}}}},
                                {"drift", {{"type", "zero"}}}});
    auto rep = check_hypotheses(spec, Profile::H1_1, small_window(2.0));
    const SubHypothesis* nu = rep.find("(ii) nu >= nu0 > 0");
    REQUIRE(nu != nullptr);
    CHECK(nu->verdict == Verdict::Violated);
    REQUIRE(nu->witness);
    // The eigenvalues of [[1,2],[2,1]] are 3 and -1.
    CHECK(nu->witness->value == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_FALSE(rep.satisfied());
}

TEST_CASE("cubic drift with phi = 1 + x^2 satisfies the Lyapunov condition") {
    auto rep = check_hypotheses(make_cubic(-1.0), Profile::H1_1, small_window());
    const SubHypothesis* ly = rep.find("(iv) A phi <= lambda phi");
    REQUIRE(ly != nullptr);
    CHECK(ly->verdict == Verdict::Satisfied);
    CHECK(rep.satisfied());
}

TEST_CASE("H5.1 holds for OU and cubic drift") {
    for (auto spec : {make_ou(1.0), make_cubic(-1.0)}) {
        auto rep = check_hypotheses(spec, Profile::H5_1, small_window());
        CHECK(rep.satisfied());
        CHECK(rep.inferred.at("a2") > 0.0);
    }
}

TEST_CASE("Lp preservation conditions") {
    SUBCASE("OU: (a) holds with K0 = 1") {
        auto rep = check_lp_preservation(make_ou(1.0), small_window());
        CHECK(rep.find("(a) div beta >= -K0")->verdict == Verdict::Satisfied);
        CHECK(rep.inferred.at("K0") == doctest::Approx(1.0));
    }
    SUBCASE("b = -x|x|: div beta = -2|x| is unbounded below and |beta|^2 = x^4 is unbounded") {
        auto rep = check_lp_preservation(make_power_drift(1.0), small_window());
        auto* a = rep.find("(a) div beta >= -K0");
        auto* b = rep.find("(b) |beta|^2 <= K1 nu");
        CHECK(a->verdict == Verdict::Violated);
        CHECK(b->verdict == Verdict::Violated);
        REQUIRE(a->witness);
        CHECK(std::abs(a->witness->x[0]) == doctest::Approx(10.0));
    }
    SUBCASE("heat: both hold with K0 = K1 = 0") {
        auto rep = check_lp_preservation(make_heat(), small_window());
        CHECK(rep.satisfied());
        CHECK(rep.inferred.at("K0") == doctest::Approx(0.0));
        CHECK(rep.inferred.at("K1") == doctest::Approx(0.0));
    }
}

TEST_CASE("missing derivative data is reported by symbol") {
    OperatorSpec spec = make_ou(1.0);
    spec.b.derivatives.clear();
    spec.b.constant_in_x = false;
    try {
        check_hypotheses(spec, Profile::H3_1, small_window(), 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "insufficient derivative data");
        CHECK(std::string(e.what()).find("D") != std::string::npos);
    }
}

TEST_CASE("apply_operator on exact polynomials and trigonometric data") {
    auto ou = make_ou(1.0);
    auto u = GridFunction::sample([](std::span<const double> x) { return x[0] * x[0]; }, 1, 201, 5.0);
    auto Au = apply_operator(ou, u, 0.3);
    double err = 0.0;
    for (int i = 1; i + 1 < u.n; ++i) {
        const double x = u.coord(i);
        err = std::max(err, std::abs(Au.at(i) - (2.0 - 2.0 * x * x)));
    }
    CHECK(err <= 1e-10);

    auto one = GridFunction::sample([](std::span<const double>) { return 1.0; }, 1, 51, 3.0);
    CHECK(apply_operator(ou, one, 0.0).sup_abs(1) == doctest::Approx(0.0));

    auto heat = make_heat();
    auto s = GridFunction::with_spacing(1, 3.0, 0.01);
    s = GridFunction::sample([](std::span<const double> x) { return std::sin(x[0]); }, 1, s.n, 3.0);
    auto As = apply_operator(heat, s, 0.0);
    double e2 = 0.0;
    for (int i = 1; i + 1 < s.n; ++i) e2 = std::max(e2, std::abs(As.at(i) + std::sin(s.coord(i))));
    CHECK(e2 <= 1e-4);

    auto tiny = GridFunction::zeros(1, 5, 1.0);
    tiny.n = 4;
    tiny.values.resize(4);
    CHECK_THROWS_AS(apply_operator(heat, tiny, 0.0), Error);
}

TEST_CASE("apply_operator is linear") {
    auto spec = make_cubic(-1.0);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    auto u = GridFunction::zeros(1, 101, 2.0), v = u;
    for (auto& x : u.values) x = U(rng);
    for (auto& x : v.values) x = U(rng);
    const double a = 0.7, b = -1.3;
    auto lhs = apply_operator(spec, a * u + b * v, 0.0);
    auto rhs = a * apply_operator(spec, u, 0.0) + b * apply_operator(spec, v, 0.0);
    double err = 0.0;
    for (std::size_t k = 0; k < lhs.size(); ++k) err = std::max(err, std::abs(lhs.values[k] - rhs.values[k]));
    CHECK(err <= 1e-9);
}

TEST_CASE("witness re-evaluation reproduces the slack") {
    auto rep = check_lp_preservation(make_power_drift(1.0), small_window());
    auto* a = rep.find("(a) div beta >= -K0");
    CHECK(reevaluate_slack(make_power_drift(1.0), rep, a->name) == doctest::Approx(a->worst_slack).epsilon(1e-12));
}

TEST_CASE("enlarging the window never turns a violation into satisfaction") {
    auto spec = make_power_drift(1.0);
    for (double R : {2.0, 4.0, 8.0}) {
        auto small = check_lp_preservation(spec, small_window(R));
        auto large = check_lp_preservation(spec, small_window(2 * R));
        for (const auto& c : small.checks)
            if (c.verdict == Verdict::Violated) CHECK(large.find(c.name)->verdict == Verdict::Violated);
    }
}

TEST_CASE("registered catalogue derivatives agree with finite differences") {
    for (auto spec : {make_cubic(-1.0), make_log_drift(), make_ou_modulated(1.0, 0.5)}) {
        auto chk = check_registered_derivatives(spec.b, -5.0, 5.0, 3.0);
        CHECK(chk.max_rel_error <= 1e-6);
    }
}
