#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "klab/errors.hpp"
#include "klab/explicit_constants.hpp"

using namespace klab;

namespace {
ConstantInputs base_k1() {
    ConstantInputs in;
    in.d = 1;
    in.p = 2.0;
    in.k = 1;
    in.C = 0.0;
    in.M = -0.5;
    in.L = 1.0;
    in.c0 = 0.0;
    in.gamma = 0.5;
    in.nu0 = 1.0;
    in.sup_term = -1.5;
    return in;
}

// Inputs with a very negative M so that every sigma_{k,2} bracket is negative.
ConstantInputs dissipative() {
    ConstantInputs in;
    in.p = 2.0;
    in.M = -10.0;
    in.nu_samples = {1.0};
    return in;
}
}  // namespace

TEST_CASE("sigma_kp: worked k = 1 example vanishes by the positive part") {
    auto in = base_k1();
    // [2(-1.5) + 0 + 2 d/(4L)]^+ = [-2.5]^+ = 0
    CHECK(sigma_kp(in).value == 0.0);
    in.p = 4.0;
    CHECK(sigma_kp(in).value == 0.0);
}

TEST_CASE("sigma_kp: positive bracket and the p > 2 rule") {
    auto in = base_k1();
    in.c0 = 1.0;
    in.sup_term = 0.5;
    // 2(0.5) + 1(2-1) + 2/4
    CHECK(sigma_kp(in).value == 2.5);
    in.p = 4.0;
    CHECK(sigma_kp(in).value == 5.0);
    in.p = 3.0;
    CHECK(sigma_kp(in).value == 3.75);
}

TEST_CASE("sigma_kp is reproducible from its intermediates") {
    auto in = base_k1();
    in.c0 = 0.3;
    in.sup_term = 0.2;
    for (double p : {1.5, 2.0, 3.5}) {
        in.p = p;
        auto rep = sigma_kp(in);
        CHECK(sigma_from_intermediates(rep.intermediates) == rep.value);
        CHECK(sigma_kp(in).value == rep.value);
    }
}

TEST_CASE("sigma_kp errors") {
    auto in = base_k1();
    in.p = 1.0;
    CHECK_THROWS_AS(sigma_kp(in), Error);
    in = base_k1();
    in.sup_term.reset();
    CHECK_THROWS_AS(sigma_kp(in), Error);
}

TEST_CASE("c_{d,k} closed forms") {
    CHECK(c_dk(1, 1, 1.0) == 0.25);
    CHECK(c_dk(2, 2, 1.0) == 3.0);
    CHECK(c_dk(1, 3, 1.0) == doctest::Approx(35.0 / 12.0));
    CHECK(c_dk(2, 3, 2.0) == doctest::Approx(7.0 * 4.0 * 12.0 / 24.0));
}

TEST_CASE("sigma_kp is non-decreasing in c0 and in c_{d,k}") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        ConstantInputs in;
        in.k = 1 + trial % 3;
        in.p = 1.1 + std::abs(U(rng));
        in.sup_term = U(rng);
        in.c0 = U(rng);
        in.L = 0.5 + std::abs(U(rng));
        auto more_c0 = in;
        more_c0.c0 += std::abs(U(rng));
        auto smaller_L = in;
        smaller_L.L *= 0.5;
        const double s = sigma_kp(in).value;
        CHECK(s >= 0.0);
        CHECK(sigma_kp(more_c0).value >= s);
        CHECK(sigma_kp(smaller_L).value >= s);
    }
}

TEST_CASE("phi_pk with C = 0") {
    ConstantInputs in;
    in.r0 = -1.0;
    in.C = 0.0;
    for (double p : {1.5, 2.0, 3.0}) {
        in.p = p;
        in.k = 1;
        CHECK(phi_pk(in).value == -1.0);
    }
    // k = 2 on the degenerate window nu = nu0: max(M nu0^g, (1-p) nu0 + 2 M nu0^g)
    in.p = 2.0;
    in.k = 2;
    for (auto [M, nu0] : {std::pair{-0.5, 1.0}, std::pair{0.3, 1.0}, std::pair{1.0, 2.0}}) {
        in.M = M;
        in.nu0 = nu0;
        const double g = std::pow(nu0, in.gamma);
        CHECK(phi_pk(in).value == doctest::Approx(std::max(M * g, -nu0 + 2.0 * M * g)).epsilon(1e-14));
    }
}

TEST_CASE("phi_pk minimizes over eps0 when C > 0") {
    ConstantInputs in;
    in.k = 2;
    in.p = 2.0;
    in.C = 0.5;
    in.M = -1.0;
    in.nu_samples = {1.0};
    auto rep = phi_pk(in);
    const double lo = rep.intermediates.at("eps0_lower");
    CHECK(lo == doctest::Approx(0.5 / 4.0));
    // The minimum is no larger than the objective at a few admissible points.
    auto objective = [&](double e0) {
        double c1 = (in.C / (4.0 * e0) + in.M);
        double c2 = -1.0 + in.C * e0 + in.C * in.C / 1.0 + 2.0 * in.M;
        return std::max(c1, c2);
    };
    for (double e0 : {0.2, 0.5, 1.0, 3.0}) CHECK(rep.value <= objective(e0) + 1e-9);
}

TEST_CASE("gamma_p23 with vanishing sigmas uses the r substitution") {
    auto in = dissipative();
    auto rep = gamma_p23(1.0, in);
    // sigma_{2,2} = sigma_{3,2} = 0 here, so Gamma(r) = 4(1+r)/r + 1.
    CHECK(rep.intermediates.at("sigma_lo") == 0.0);
    CHECK(rep.intermediates.at("sigma_hi") == 0.0);
    CHECK(rep.value == 9.0);
    CHECK(gamma_p23(2.0, in).value == doctest::Approx(4.0 * 3.0 / 2.0 + 1.0));
    CHECK_THROWS_AS(gamma_p23(0.0, in), Error);
}

TEST_CASE("gamma formula is continuous at sigma = 0") {
    for (double r : {0.1, 1.0, 5.0}) {
        const double g0 = gamma_from_sigmas(r, 2.0, 0.0, 0.0).value;
        const double g1 = gamma_from_sigmas(r, 2.0, 1e-13, 1e-13).value;
        CHECK(std::abs(g1 - g0) <= 1e-8 * std::abs(g0));
    }
}

TEST_CASE("gamma tail grows like the prefactor sigma_{p,3}") {
    double prev = 0.0;
    for (double r : {10.0, 20.0, 40.0, 80.0}) {
        const double g = gamma_from_sigmas(r, 2.0, 0.0, 0.5).value;
        CHECK(g > prev);
        prev = g;
    }
}

TEST_CASE("composite Gamma equals the product of half-interval step bounds") {
    ConstantInputs in;
    in.p = 2.0;
    in.M = 0.1;
    in.c0 = 0.2;
    in.nu_samples = {1.0, 1.5};
    for (double r : {0.5, 1.0, 2.0}) {
        const double composite = gamma_hk(r, 1, 3, in).value;
        const double product = gamma_step(r / 2.0, 3, in).value * gamma_step(r / 2.0, 2, in).value;
        CHECK(composite == product);
    }
    CHECK(gamma_hk(1.0, 2, 2, in).value == std::exp(sigma_kp([&] {
                                                         auto c = in;
                                                         c.k = 2;
                                                         return c;
                                                     }())
                                                         .value *
                                                     1.0));
}

TEST_CASE("hypercontractivity threshold arithmetic") {
    CHECK(hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0) == 0.5 * std::log(3.0));
    CHECK(hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0) == doctest::Approx(0.54931).epsilon(1e-5));
    CHECK(hypercontractivity_threshold(2.0, 1.0 + std::numbers::e, 2.0, 1.0, -2.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(hypercontractivity_threshold(2.0, 2.0 + 1e-12, 1.0, 1.0, -1.0) < 1e-11);
    CHECK_THROWS_AS(hypercontractivity_threshold(3.0, 2.0, 1.0, 1.0, -1.0), Error);
    CHECK_THROWS_AS(hypercontractivity_threshold(2.0, 3.0, 1.0, 1.0, 0.0), Error);
}

TEST_CASE("log-Sobolev constant") {
    CHECK(log_sobolev_constant(2.0, 1.0, -1.0) == 2.0);
    CHECK(log_sobolev_constant(4.0, 1.0, -1.0) == 8.0);
    CHECK(log_sobolev_constant(2.0, 3.0, -1.0) == 3.0 * log_sobolev_constant(2.0, 1.0, -1.0));
    CHECK_THROWS_AS(log_sobolev_constant(2.0, 1.0, 0.5), Error);
}

TEST_CASE("p = 1 rate") {
    CHECK(rate_p1(1, 1, -1.0, 0.0).value == -1.0);
    const double e1 = std::sqrt(0.5);
    CHECK(rate_p1(2, 1, -1.0, 0.2).value == doctest::Approx(std::max(-1.0 + 0.2 / (4 * e1), -2.0 + 0.2 * e1)));
    CHECK(rate_p1(3, 1, -1.0, 0.0).value == -1.0);
}

TEST_CASE("L_k and L'_k") {
    CHECK(L_k(1, 3) == 0.0);
    CHECK(L_prime_k(1, 2) == 0.0);
    CHECK(L_k(2, 2) == doctest::Approx(1.0));
    CHECK(L_prime_k(2, 2) == doctest::Approx(1.0));
}
