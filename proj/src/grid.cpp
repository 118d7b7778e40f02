#include "klab/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "klab/errors.hpp"

namespace klab {

GridFunction GridFunction::zeros(int d, int n, double R) {
    if (d < 1 || d > 2) throw Error("unsupported", "grid dimension must be 1 or 2");
    if (n < 5) throw Error("grid too coarse", "grid needs at least 5 points per axis, got " + std::to_string(n));
    if (!(R > 0.0)) throw Error("domain", "grid half-width must be positive");
    GridFunction g;
    g.d = d;
    g.n = n;
    g.R = R;
    g.h = 2.0 * R / (n - 1);
    std::size_t total = d == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    g.values.assign(total, 0.0);
    return g;
}

GridFunction GridFunction::with_spacing(int d, double R, double h_target) {
    if (!(h_target > 0.0)) throw Error("domain", "grid spacing must be positive");
    int n = static_cast<int>(std::lround(2.0 * R / h_target)) + 1;
    return zeros(d, n, R);
}

GridFunction GridFunction::sample(const ScalarFn& f, int d, int n, double R) {
    GridFunction g = zeros(d, n, R);
    std::array<double, 2> x{};
    for (std::size_t k = 0; k < g.size(); ++k) {
        g.point(k, std::span<double>(x.data(), d));
        g.values[k] = f(std::span<const double>(x.data(), d));
    }
    return g;
}

void GridFunction::point(std::size_t k, std::span<double> x) const {
    if (d == 1) {
        x[0] = coord(static_cast<int>(k));
    } else {
        x[0] = coord(static_cast<int>(k / n));
        x[1] = coord(static_cast<int>(k % n));
    }
}

bool GridFunction::in_core(std::size_t k, int margin) const {
    auto inside = [&](int i) { return i >= margin && i <= n - 1 - margin; };
    if (d == 1) return inside(static_cast<int>(k));
    return inside(static_cast<int>(k / n)) && inside(static_cast<int>(k % n));
}

void GridFunction::validate() const {
    if (n < 5) throw Error("grid too coarse", "grid needs at least 5 points per axis");
    if (!(h > 0.0)) throw Error("domain", "grid spacing must be positive");
    for (double v : values)
        if (!std::isfinite(v)) throw Error("non-finite", "grid function holds a non-finite value");
}

bool GridFunction::same_layout(const GridFunction& o) const {
    return d == o.d && n == o.n && std::abs(R - o.R) <= 1e-12 * std::max(1.0, R);
}

double GridFunction::sup_abs(int margin) const {
    if (margin < 0) margin = core_margin;
    double m = 0.0;
    for (std::size_t k = 0; k < size(); ++k)
        if (in_core(k, margin)) m = std::max(m, std::abs(values[k]));
    return m;
}

double GridFunction::min_value(int margin) const {
    if (margin < 0) margin = core_margin;
    double m = INFINITY;
    for (std::size_t k = 0; k < size(); ++k)
        if (in_core(k, margin)) m = std::min(m, values[k]);
    return m;
}

GridFunction GridFunction::restrict_to(double R_new) const {
    double shift = (R - R_new) / h;
    long off = std::lround(shift);
    if (off < 0 || std::abs(shift - off) > 1e-6)
        throw Error("domain", "restriction box is not aligned with the grid");
    int m = n - 2 * static_cast<int>(off);
    GridFunction g = zeros(d, m, R - off * h);
    g.h = h;
    g.core_margin = std::max(0, core_margin - static_cast<int>(off));
    if (d == 1) {
        for (int i = 0; i < m; ++i) g.values[i] = values[i + off];
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) g.at(i, j) = at(i + off, j + off);
    }
    return g;
}

double GridFunction::interpolate(std::span<const double> x) const {
    auto locate = [&](double xv, int& i, double& w) {
        double s = (xv + R) / h;
        if (s < 0.0 || s > n - 1) return false;
        i = std::min(static_cast<int>(std::floor(s)), n - 2);
        w = s - i;
        return true;
    };
    int i = 0, j = 0;
    double wx = 0.0, wy = 0.0;
    if (!locate(x[0], i, wx)) return 0.0;
    if (d == 1) return (1.0 - wx) * values[i] + wx * values[i + 1];
    if (!locate(x[1], j, wy)) return 0.0;
    return (1.0 - wx) * ((1.0 - wy) * at(i, j) + wy * at(i, j + 1)) +
           wx * ((1.0 - wy) * at(i + 1, j) + wy * at(i + 1, j + 1));
}

GridFunction operator+(const GridFunction& a, const GridFunction& b) {
    if (!a.same_layout(b)) throw Error("domain", "grid layouts differ");
    GridFunction r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r.values[k] += b.values[k];
    r.core_margin = std::max(a.core_margin, b.core_margin);
    return r;
}

GridFunction operator-(const GridFunction& a, const GridFunction& b) {
    if (!a.same_layout(b)) throw Error("domain", "grid layouts differ");
    GridFunction r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r.values[k] -= b.values[k];
    r.core_margin = std::max(a.core_margin, b.core_margin);
    return r;
}

GridFunction operator*(double s, const GridFunction& a) {
    GridFunction r = a;
    for (double& v : r.values) v *= s;
    return r;
}

namespace {
double trapezoid_weight(const GridFunction& u, std::size_t k) {
    auto w1 = [&](int i) { return (i == 0 || i == u.n - 1) ? 0.5 * u.h : u.h; };
    if (u.d == 1) return w1(static_cast<int>(k));
    return w1(static_cast<int>(k / u.n)) * w1(static_cast<int>(k % u.n));
}
}  // namespace

double trapezoid(const GridFunction& u) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += trapezoid_weight(u, k) * u.values[k];
    return s;
}

double trapezoid_product(const GridFunction& u, const GridFunction& w) {
    if (!u.same_layout(w)) throw Error("domain", "grid layouts differ");
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += trapezoid_weight(u, k) * u.values[k] * w.values[k];
    return s;
}

}  // namespace klab
