#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace klab {

using ScalarFn = std::function<double(std::span<const double>)>;

// Scalar field on the uniform tensor grid [-R,R]^d with n points per axis.
// Node (i) in 1-D, node (i,j) in 2-D stored at i*n + j, axis 0 first.
struct GridFunction {
    int d = 1;
    int n = 0;
    double R = 0.0;
    double h = 0.0;
    // Cells near the boundary whose values are not trusted (stencil layers, Dirichlet zone).
    int core_margin = 0;
    std::vector<double> values;

    static GridFunction zeros(int d, int n, double R);
    // Picks n so that the spacing is as close as possible to h_target.
    static GridFunction with_spacing(int d, double R, double h_target);
    static GridFunction sample(const ScalarFn& f, int d, int n, double R);

    double coord(int i) const { return -R + i * h; }
    std::size_t size() const { return values.size(); }
    std::size_t index(int i, int j = 0) const {
        return d == 1 ? static_cast<std::size_t>(i) : static_cast<std::size_t>(i) * n + j;
    }
    double& at(int i, int j = 0) { return values[index(i, j)]; }
    double at(int i, int j = 0) const { return values[index(i, j)]; }
    // Coordinates of flat node k.
    void point(std::size_t k, std::span<double> x) const;
    // True when node k lies at least `margin` cells away from every boundary.
    bool in_core(std::size_t k, int margin) const;

    void validate() const;
    bool same_layout(const GridFunction& other) const;

    // sup |u| over nodes at least `margin` cells away from the boundary (default: core_margin).
    double sup_abs(int margin = -1) const;
    double min_value(int margin = -1) const;

    // Aligned sub-box [-R_new, R_new]^d; throws if nodes do not align.
    GridFunction restrict_to(double R_new) const;
    // Linear (or bilinear) interpolation, zero outside the box.
    double interpolate(std::span<const double> x) const;
};

GridFunction operator+(const GridFunction& a, const GridFunction& b);
GridFunction operator-(const GridFunction& a, const GridFunction& b);
GridFunction operator*(double s, const GridFunction& a);

// Composite trapezoid rule over the whole box.
double trapezoid(const GridFunction& u);
// Trapezoid of the pointwise product u*w.
double trapezoid_product(const GridFunction& u, const GridFunction& w);

}  // namespace klab
