#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "klab/coefficients.hpp"
#include "klab/grid.hpp"

namespace klab {

enum class Profile { H1_1, H3_1, H4_1, H4_2, H4_3, H5_1 };

Profile profile_from_string(const std::string& s);
std::string to_string(Profile p);

// Compact stand-in for I x R^d: a grid of space_samples^d points on |x|_inf <= radius and
// time_samples times (one time for autonomous operators).
struct SamplingWindow {
    double radius = 10.0;
    int space_samples = 128;
    int time_samples = 64;
    std::optional<double> t0;
    std::optional<double> t1;
    // Positive floor used for rho when c vanishes identically.
    double eps_rho = 1e-3;
};

enum class Verdict { Satisfied, Violated, NotCheckable };
std::string to_string(Verdict v);

struct Witness {
    double t = 0.0;
    std::vector<double> x;
    double value = 0.0;  // the sampled quantity at (t, x)
};

struct SubHypothesis {
    std::string name;
    Verdict verdict = Verdict::NotCheckable;
    double worst_slack = 0.0;
    double bound = 0.0;
    std::string bound_source;  // "declared:<key>", "fixed", "inferred"
    bool upper = true;         // quantity <= bound (else quantity >= bound)
    std::optional<Witness> witness;
    std::string note;
};

struct HypothesisReport {
    std::string profile;
    int k = 0;
    SamplingWindow window;
    double t_lo = 0.0, t_hi = 0.0;
    long sample_count = 0;
    std::vector<SubHypothesis> checks;
    std::map<std::string, double> inferred;
    std::string label = "sampled, not proven";

    bool satisfied() const;
    const SubHypothesis* find(const std::string& name) const;
    nlohmann::json to_json() const;
};

// k is used by the H3.1/H4.x profiles (1..3); p0 by H4.2(1).
HypothesisReport check_hypotheses(const OperatorSpec& spec, Profile profile, const SamplingWindow& window,
                                  int k = 1);
HypothesisReport check_lp_preservation(const OperatorSpec& spec, const SamplingWindow& window);

// Visits every (t, x) of the sampling window.
void for_each_sample(const OperatorSpec& spec, const SamplingWindow& window,
                     const std::function<void(double, std::span<const double>)>& visit);

// Recomputes the slack of a sub-hypothesis at its recorded witness.
double reevaluate_slack(const OperatorSpec& spec, const HypothesisReport& report, const std::string& check);

// Tr(Q D^2 u) + <b, grad u> + c u with central stencils; the one-cell boundary layer uses
// one-sided stencils and is flagged through core_margin = 1.
GridFunction apply_operator(const OperatorSpec& spec, const GridFunction& u, double t);

}  // namespace klab
