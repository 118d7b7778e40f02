#include "klab/fd.hpp"

#include <algorithm>

#include "klab/errors.hpp"

namespace klab {

int stencil_radius(int order) { return order <= 2 ? 1 : 2; }

GridFunction diff_axis(const GridFunction& u, int axis, int order, bool one_sided) {
    if (order < 1 || order > 3) throw Error("unsupported", "derivative order must be 1, 2 or 3");
    if (axis < 0 || axis >= u.d) throw Error("domain", "axis out of range");
    if (one_sided && order == 3) throw Error("unsupported", "one-sided stencils only for orders 1 and 2");
    const int n = u.n, rad = stencil_radius(order);
    const double h = u.h;
    GridFunction out = u;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.core_margin = u.core_margin + (one_sided ? 0 : rad);
    const int lines = u.d == 1 ? 1 : n;
    for (int line = 0; line < lines; ++line) {
        auto idx = [&](int m) -> std::size_t {
            if (u.d == 1) return static_cast<std::size_t>(m);
            return axis == 0 ? static_cast<std::size_t>(m) * n + line : static_cast<std::size_t>(line) * n + m;
        };
        auto v = [&](int m) { return u.values[idx(m)]; };
        for (int m = rad; m < n - rad; ++m) {
            double r = 0.0;
            switch (order) {
                case 1: r = (v(m + 1) - v(m - 1)) / (2.0 * h); break;
                case 2: r = (v(m + 1) - 2.0 * v(m) + v(m - 1)) / (h * h); break;
                default: r = (v(m + 2) - 2.0 * v(m + 1) + 2.0 * v(m - 1) - v(m - 2)) / (2.0 * h * h * h); break;
            }
            out.values[idx(m)] = r;
        }
        if (one_sided) {
            const int e = n - 1;
            if (order == 1) {
                out.values[idx(0)] = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
                out.values[idx(e)] = (3.0 * v(e) - 4.0 * v(e - 1) + v(e - 2)) / (2.0 * h);
            } else {
                out.values[idx(0)] = (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / (h * h);
                out.values[idx(e)] = (2.0 * v(e) - 5.0 * v(e - 1) + 4.0 * v(e - 2) - v(e - 3)) / (h * h);
            }
        }
    }
    return out;
}

}  // namespace klab
