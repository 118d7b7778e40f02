#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "klab/grid.hpp"

namespace klab {

// Verdict for one inequality check. Field-valued checks fill lhs/rhs; scalar checks record
// "lhs"/"rhs" in `values` and leave the fields empty.
struct EstimateReport {
    std::string id;
    GridFunction lhs;
    GridFunction rhs;
    double worst_margin = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string status = "computed";
    std::map<std::string, double> constants;
    std::map<std::string, double> values;
    std::vector<std::string> notes;

    bool has_fields() const { return lhs.n > 0; }
    // pass <=> worst_margin >= -tolerance.
    void finalize();
    nlohmann::json to_json() const;
    // Rows x[,y],lhs,rhs,margin over the core region.
    void write_csv(std::ostream& os) const;
};

}  // namespace klab
