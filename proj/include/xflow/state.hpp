#ifndef XFLOW_STATE_HPP
#define XFLOW_STATE_HPP

#include "xflow/grid.hpp"

namespace xflow {

// Species densities and nutrient at time t. rho, q, p, mu are derived on
// demand (see derived_fields).
struct SimState {
    double t = 0.0;
    Field rho1;
    Field rho2;
    Field nutrient;
};

} // namespace xflow

#endif
