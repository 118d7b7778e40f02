#pragma once

#include <span>
#include <vector>

namespace klab {

// Thomas algorithm for a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]; d is overwritten by x.
// `scratch` must hold at least b.size() entries.
void solve_tridiagonal(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                       std::span<double> d, std::span<double> scratch);

}  // namespace klab
