#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace klab {

struct FellerProblem {
    std::string name;
    std::function<double(double)> q;
    std::function<double(double)> b;
    double lambda = 1.0;
};

// "const[:v]" for q; "zero", "cubic_plus[:k]", "cubic_minus[:k]", "power[:eps]" (-x|x|^eps),
// "linear[:a]" (-a x) for b.
FellerProblem feller_problem(const std::string& q_id, const std::string& b_id);

enum class Integrability { Integrable, NonIntegrable, Undecided };
std::string to_string(Integrability v);

struct TailEvidence {
    std::vector<double> cutoffs;
    // log of the integral over [1, X] (or [-X, -1]) for each cutoff X.
    std::vector<double> log_tail;
    // log of the integrand at each cutoff.
    std::vector<double> log_value;
    // Local decay exponent of the integrand between the two largest cutoffs.
    double exponent = 0.0;
    std::optional<double> extrapolated;
    Integrability verdict = Integrability::Undecided;
    std::string diagnostic;
};

struct FellerVerdict {
    TailEvidence R_plus, R_minus, Q_plus, Q_minus;
    // "unique bounded solution" | "infinitely many bounded solutions" | "mixed/undecided"
    std::string conclusion;
    double lambda = 1.0;
    nlohmann::json to_json() const;
};

std::vector<double> default_feller_cutoffs();

FellerVerdict classify(const FellerProblem& problem, const std::vector<double>& cutoffs = default_feller_cutoffs());

// Extrapolated limit of x^weight Q(x) as x -> +inf; +inf when the sequence diverges.
double asymptotic_probe(const FellerProblem& problem, double weight);

// W, Q, R at a single point (log-domain evaluation, returned in linear scale; may overflow to inf).
struct FellerFunctions {
    double W = 1.0;
    double Q = 0.0;
    double R = 0.0;
};
FellerFunctions feller_functions(const FellerProblem& problem, double x);

}  // namespace klab
