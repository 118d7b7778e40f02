#include <cmath>
#include <numbers>

#include "doctest.h"
#include "klab/catalogue.hpp"
#include "klab/measure_flow.hpp"

using namespace klab;

namespace {
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
}

TEST_CASE("analytic OU family is N(0, 1) at every time") {
    auto fam = compute_measures(make_ou(), {0.0, 1.0, 5.0}, MeasureMethod::Analytic);
    CHECK(fam.analytic());
    CHECK(fam.provenance == "analytic-gaussian");
    for (std::size_t i = 0; i < fam.times.size(); ++i) {
        CHECK(fam.gaussians[i].var == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(integrate_against(fam, i, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-10));
    }
    auto an = average_and_norms(fam, [](double x) { return x * x; }, 1.0, 2.0);
    CHECK(an.average == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(an.norm == doctest::Approx(std::sqrt(3.0)).epsilon(1e-8));
}

TEST_CASE("Gaussian tails") {
    auto fam = compute_measures(make_ou(), {0.0, 2.0}, MeasureMethod::Analytic);
    auto tr = check_tightness(fam, {0.0, 1.0, 4.0});
    CHECK(tr.sup_tail[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(tr.sup_tail[1] == doctest::Approx(std::erfc(1.0 / std::sqrt(2.0))).epsilon(1e-6));
    CHECK(tr.sup_tail[2] <= 6.4e-5);
    REQUIRE(tr.tight_radius);
    CHECK(*tr.tight_radius == 4.0);
}

TEST_CASE("invariance for analytic OU measures") {
    auto spec = make_ou();
    auto fam = compute_measures(spec, {0.0, 1.0}, MeasureMethod::Analytic);
    for (auto f : std::vector<Fn1>{[](double x) { return x * x; }, [](double) { return 1.0; },
                                   [](double x) { return std::sin(x); }}) {
        auto rep = check_invariance(spec, fam, f, 0.0, 1.0);
        CHECK(rep.pass);
        CHECK(rep.worst_margin >= -1e-5);
    }
}

TEST_CASE("burn-in for the cubic drift matches exp(-x^4/4)") {
    MeasureOptions opt;
    opt.R = 6.0;
    opt.h = 0.02;
    opt.dt = 2e-3;
    auto fam = compute_measures(make_cubic(-1.0), {0.0}, MeasureMethod::Burnin, opt);
    CHECK(fam.provenance == "fokker-planck-burnin");
    CHECK(l1_distance_to(fam.densities[0], [](double x) { return std::exp(-std::pow(x, 4) / 4); }) <= 1e-3);
    CHECK(trapezoid(fam.densities[0]) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("burn-in for periodic OU follows the analytic family") {
    auto spec = make_ou_modulated(1.0, 0.5);
    MeasureOptions opt;
    opt.R = 6.0;
    opt.h = 0.02;
    opt.dt = 1e-3;
    const std::vector<double> times{0.0, 1.0, 2.0};
    auto burn = compute_measures(spec, times, MeasureMethod::Burnin, opt);
    auto exact = compute_measures(spec, times, MeasureMethod::Analytic);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto g = exact.gaussians[i];
        CHECK(l1_distance_to(burn.densities[i], [g](double x) { return g(x); }) <= 2e-3);
    }
}

TEST_CASE("L^p contraction along the OU flow") {
    auto spec = make_ou();
    auto fam = compute_measures(spec, {0.0, 0.7}, MeasureMethod::Analytic);
    auto prop = Propagator::ou_oracle(spec);
    const Fn1 f = [](double x) { return std::tanh(2 * x) + 0.3 * std::cos(x); };
    auto out = prop.apply(f, 0.0, {0.7});
    for (double p : {2.0, 4.0}) {
        const double before = integrate_against(fam, 0, [&](double x) { return std::pow(std::abs(f(x)), p); });
        const double after = integrate_against(fam, 1, [&](double x) { return std::pow(std::abs(out.u[0](x)), p); });
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("density evaluation and L1 distance") {
    GaussianDensity g{0.0, 1.0};
    CHECK(g(0.0) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-14));
    GridFunction dens = GridFunction::sample([&](std::span<const double> x) { return g(x[0]); }, 1, 1201, 6.0);
    CHECK(l1_distance_to(dens, [](double x) { return std::exp(-x * x / 2); }) <= 1e-8);
}
