#include "klab/report.hpp"

#include <array>
#include <cmath>

namespace klab {

void EstimateReport::finalize() { pass = std::isfinite(worst_margin) && worst_margin >= -tolerance; }

nlohmann::json EstimateReport::to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["status"] = status;
    j["pass"] = pass;
    j["worst_margin"] = worst_margin;
    j["tolerance"] = tolerance;
    j["constants"] = constants;
    j["values"] = values;
    j["notes"] = notes;
    if (has_fields()) {
        j["field"] = {{"d", lhs.d}, {"n", lhs.n}, {"R", lhs.R}, {"h", lhs.h}, {"core_margin", lhs.core_margin},
                      {"region", "core region only"}};
    }
    return j;
}

void EstimateReport::write_csv(std::ostream& os) const {
    if (!has_fields()) return;
    os << (lhs.d == 1 ? "x" : "x,y") << ",lhs,rhs,margin\n";
    std::array<double, 2> x{};
    os.precision(17);
    for (std::size_t k = 0; k < lhs.size(); ++k) {
        if (!lhs.in_core(k, lhs.core_margin)) continue;
        lhs.point(k, std::span<double>(x.data(), lhs.d));
        os << x[0];
        if (lhs.d == 2) os << ',' << x[1];
        os << ',' << lhs.values[k] << ',' << rhs.values[k] << ',' << rhs.values[k] - lhs.values[k] << '\n';
    }
}

}  // namespace klab
