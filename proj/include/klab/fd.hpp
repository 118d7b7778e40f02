#pragma once

#include "klab/grid.hpp"

namespace klab {

// Second-order central difference of order 1, 2 or 3 along `axis`. Nodes closer than the stencil
// radius to that axis' boundary get one-sided second-order stencils when `one_sided` is set
// (orders 1 and 2 only); otherwise they are set to zero. core_margin grows by the radius.
GridFunction diff_axis(const GridFunction& u, int axis, int order, bool one_sided = false);

int stencil_radius(int order);

}  // namespace klab
