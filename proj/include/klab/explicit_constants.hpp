#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace klab {

struct ConstantInputs {
    int d = 1;
    double p = 2.0;
    int k = 1;
    double gamma = 0.5;
    double nu0 = 1.0;
    double c0 = 0.0;
    double M = 0.0;  // M in Hyp 4.1(k); also M_k of Hyp 4.2(k) for phi_pk with k = 2, 3
    double L = 1.0;
    double K = 0.0;
    double C = 0.0;
    double r0 = 0.0;
    double Lambda0 = 1.0;
    // Supremum of (1-p)nu + c_k(p) nu^gamma when known directly.
    std::optional<double> sup_term;
    // Sampled values of nu over the window, used for every sup over I x R^d.
    std::vector<double> nu_samples;
    double alpha = 4.0;
    double K1p = 1.0;
    double K2p = 1.0;
};

struct ConstantReport {
    std::string id;
    double value = 0.0;
    std::map<std::string, double> intermediates;
    nlohmann::json to_json() const;
};

double c_dk(int d, int k, double L);
// c_k(p) for p in (1,2].
double c_kp(const ConstantInputs& in);

ConstantReport sigma_kp(const ConstantInputs& in);
// Reassembles sigma from the intermediates recorded by sigma_kp.
double sigma_from_intermediates(const std::map<std::string, double>& im);

ConstantReport phi_pk(const ConstantInputs& in);

// Step bound Gamma_{p,k-1,k}(r) from sigma_{k-1,p} and sigma_{k,p}; for p > 2 the p = 2 bound
// raised to p/2. k = 1 uses the zeroth-order rate [(p-1)c0]^+.
ConstantReport gamma_step(double r, int k, const ConstantInputs& in);
ConstantReport gamma_p23(double r, const ConstantInputs& in);
// The closed step formula for given sigma_{k-1,p} (s_lo) and sigma_{k,p} (s_hi).
ConstantReport gamma_from_sigmas(double r, double p, double s_lo, double s_hi, double alpha = 4.0,
                                 double K1p = 1.0, double K2p = 1.0);
// Gamma^{(2)}_{p,h,k}(r) for 0 <= h <= k <= 3: e^{sigma_{k,p} r} when h = k, the step bound
// when h = k-1, otherwise the product of step bounds over equal subintervals.
ConstantReport gamma_hk(double r, int h, int k, const ConstantInputs& in);

// Rate of the p = 1 gradient-type estimate when q does not depend on x and c vanishes:
// max_j sup H_j over the derivative orders j <= k, evaluated at the suprema r0 and r.
ConstantReport rate_p1(int k, int d, double r0, double r);

double hypercontractivity_threshold(double p, double q, double Lambda0, double nu0, double r0);
double log_sobolev_constant(double p, double Lambda0, double r0);

// L_k of Hyp 3.1(k)(iv) and L'_k of Hyp 4.3(k) (with L'_1 = 0).
double L_k(int k, int d);
double L_prime_k(int k, int d);

}  // namespace klab
