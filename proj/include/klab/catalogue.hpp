#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "klab/coefficients.hpp"

namespace klab {

// Builds an OperatorSpec from a declarative description:
//   {"name": "...", "d": 1, "interval": [t0, t1],
//    "diffusion": {"type": "constant"|"matrix"|"modulated"|"oscillating", ...},
//    "drift":     {"type": "zero"|"linear"|"cubic"|"power"|"log", ...},
//    "potential": {"type": "zero"|"constant"|"quadratic"|"modulated", ...},
//    "declared":  {"r0": -1, ...}}
// or a shorthand {"catalogue": "<id>", ...params}. Unknown types raise Error("parse").
OperatorSpec spec_from_json(const nlohmann::json& j);
std::vector<std::string> catalogue_ids();

OperatorSpec make_ou(double a = 1.0, double q = 1.0, int d = 1);
// a(t) = a0 + a1 sin(omega t), diffusion q constant.
OperatorSpec make_ou_modulated(double a0, double a1, double omega = 1.0, double q = 1.0);
OperatorSpec make_heat(double q = 1.0, int d = 1);
// b(x) = sign * kappa * x^3 componentwise.
OperatorSpec make_cubic(double sign, double kappa = 1.0, double q = 1.0, int d = 1);
// b(x) = -x |x|^eps.
OperatorSpec make_power_drift(double eps, double q = 1.0);
// b(x) = -x log(e + x^2).
OperatorSpec make_log_drift(double q = 1.0);

}  // namespace klab
