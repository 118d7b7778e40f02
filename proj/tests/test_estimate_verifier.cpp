#include <cmath>

#include "doctest.h"
#include "klab/catalogue.hpp"
#include "klab/errors.hpp"
#include "klab/estimate_verifier.hpp"

using namespace klab;

namespace {

PointwiseOptions quick_options() {
    PointwiseOptions opt;
    opt.ex = ExhaustionParams{6, 2, 3, 1e-6, 0.8};
    opt.scheme = SchemeParams{0.5, 1e-3, 0.02, 2};
    return opt;
}

const std::vector<double> kTimes{0.01, 0.02, 0.04, 0.08};
const SchemeParams kRateScheme{0.5, 1e-4, 0.005, 2};
const ExhaustionParams kRateBoxes{3, 1, 2, 1e-6, 0.8};

}  // namespace

TEST_CASE("derivative extraction against analytic derivatives") {
    GridFunction cube = GridFunction::sample([](std::span<const double> x) { return x[0] * x[0] * x[0]; }, 1, 401, 2.0);
    auto d3 = extract_derivatives(cube, 3);
    REQUIRE(d3.size() == 1);
    for (int i = 0; i < d3[0].n; ++i)
        if (d3[0].in_core(i, d3[0].core_margin)) CHECK(d3[0].at(i) == doctest::Approx(6.0).epsilon(1e-8));

    GridFunction s = GridFunction::sample([](std::span<const double> x) { return std::sin(x[0]); }, 1, 801, 4.0);
    for (int order = 1; order <= 3; ++order) {
        auto d = extract_derivatives(s, order)[0];
        double worst = 0.0;
        for (int i = 0; i < d.n; ++i) {
            if (!d.in_core(i, d.core_margin)) continue;
            const double x = d.coord(i);
            const double exact = order == 1 ? std::cos(x) : order == 2 ? -std::sin(x) : -std::cos(x);
            worst = std::max(worst, std::abs(d.at(i) - exact));
        }
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("named data carry consistent derivatives") {
    for (const char* name : {"tanh", "x", "sin", "gauss"}) {
        Datum f = datum_by_name(name);
        CHECK(f.max_order() >= 3);
        const double x = 0.37, h = 1e-5;
        double xp[1] = {x + h}, xm[1] = {x - h}, x0[1] = {x};
        CHECK((f.eval({0}, xp) - f.eval({0}, xm)) / (2 * h) == doctest::Approx(f.eval({1}, x0)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(datum_by_name("no-such-datum"), Error);
}

TEST_CASE("aa, k = 1, p = 2 on OU holds and is sharp for f = x") {
    auto spec = make_ou();
    auto rep = verify_pointwise(spec, datum_by_name("tanh"), 0.0, 1.0, 1, 2.0, EstimateKind::AA, 0, quick_options());
    CHECK(rep.pass);
    CHECK(rep.worst_margin >= -1e-6 * rep.values.at("scale"));

    auto sharp = verify_pointwise(spec, datum_by_name("x"), 0.0, 1.0, 1, 2.0, EstimateKind::AA, 0, quick_options());
    REQUIRE(sharp.has_fields());
    double worst = 0.0;
    for (std::size_t i = 0; i < sharp.lhs.size(); ++i)
        if (sharp.lhs.in_core(i, sharp.lhs.core_margin))
            worst = std::max(worst, std::abs(sharp.lhs.values[i] - sharp.rhs.values[i]));
    CHECK(worst <= 1e-4);
    // Both sides equal e^{-2} for the linear datum.
    CHECK(sharp.values.at("lhs_sup") == doctest::Approx(std::exp(-2.0)).epsilon(1e-4));
}

TEST_CASE("constant datum has vanishing derivatives and passes") {
    auto rep = verify_pointwise(make_ou(), datum_by_name("const"), 0.0, 0.5, 1, 2.0, EstimateKind::AA, 0,
                                quick_options());
    CHECK(rep.pass);
    CHECK(rep.values.at("lhs_sup") <= 1e-10);
}

TEST_CASE("aa with p = 4 and the poi-es form") {
    auto opt = quick_options();
    opt.refine = false;
    CHECK(verify_pointwise(make_ou(), datum_by_name("tanh"), 0.0, 1.0, 1, 4.0, EstimateKind::AA, 0, opt).pass);
    CHECK(verify_pointwise(make_ou(), datum_by_name("sin"), 0.0, 1.0, 1, 2.0, EstimateKind::PoiEs, 0, opt).pass);
}

TEST_CASE("aaaa with h = k - 1 on OU") {
    auto opt = quick_options();
    opt.refine = false;
    auto rep = verify_pointwise(make_ou(), datum_by_name("tanh"), 0.0, 1.0, 2, 2.0, EstimateKind::AAAA, 1, opt);
    CHECK(rep.pass);
}

TEST_CASE("smoothing rates on heat and OU") {
    auto step = datum_by_name("step", 1, 0.02).f();
    for (const char* id : {"heat", "ou"}) {
        auto spec = std::string(id) == "heat" ? make_heat() : make_ou();
        auto r1 = verify_smoothing_rate(spec, step, 0.0, 0, 1, kTimes, kRateBoxes, kRateScheme);
        CHECK(r1.predicted == -0.5);
        CHECK(std::abs(r1.slope + 0.5) <= 0.1);
        auto r2 = verify_smoothing_rate(spec, step, 0.0, 0, 2, kTimes, kRateBoxes, kRateScheme);
        CHECK(r2.predicted == -1.0);
        CHECK(std::abs(r2.slope + 1.0) <= 0.15);
    }
}

TEST_CASE("rate fits need at least four times") {
    auto step = datum_by_name("step").f();
    CHECK_THROWS_AS(verify_smoothing_rate(make_heat(), step, 0.0, 0, 1, {0.01, 0.02, 0.04}, kRateBoxes, kRateScheme),
                    Error);
}

TEST_CASE("loglog slope") {
    CHECK(loglog_slope({1, 2, 4, 8}, {1, 0.5, 0.25, 0.125}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(loglog_slope({1, 4, 9}, {1, 2, 3}) == doctest::Approx(0.5).epsilon(1e-12));
}
