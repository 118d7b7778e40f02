#include "klab/tridiagonal.hpp"

#include "klab/errors.hpp"

namespace klab {

void solve_tridiagonal(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                       std::span<double> d, std::span<double> scratch) {
    const std::size_t n = b.size();
    if (n == 0) return;
    double denom = b[0];
    if (denom == 0.0) throw Error("singular", "tridiagonal system is singular");
    scratch[0] = c[0] / denom;
    d[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = b[i] - a[i] * scratch[i - 1];
        if (denom == 0.0) throw Error("singular", "tridiagonal system is singular");
        scratch[i] = i + 1 < n ? c[i] / denom : 0.0;
        d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= scratch[i] * d[i + 1];
}

}  // namespace klab
