#pragma once

#include <complex>
#include <vector>

#include "evfair/network.hpp"

namespace evfair::oracle {

/// Exact AC power flow on the complex nodal voltages. This is a verification
/// path: it shares no variables or equations with the cone-program solver,
/// only the NetworkModel description.
struct PowerFlowResult {
    bool converged = false;
    int iterations = 0;
    std::vector<std::complex<double>> v; // per dense bus index; root pinned
    std::vector<double> v_sq;            // |v_i|^2
    double root_injection = 0.0;         // active power supplied by the feeder
};

/// Solves the nodal balance equations v_i * conj(I_i) = -load_i (reactive
/// load zero) by damped Newton iteration in rectangular coordinates, with the
/// root held at v_nominal + j0.
///
/// `load_p` is indexed by dense bus index; the root entry must be zero.
PowerFlowResult solve_power_flow(const NetworkModel& net, const std::vector<double>& load_p,
                                 double v_nominal = 1.0, double tol = 1e-12,
                                 int max_iter = 80);

/// Largest scale sigma such that the power flow with loads sigma * pattern
/// converges and keeps every |v_i|^2 >= v_min_i^2. Brute-force bisection on
/// the exact equations; `pattern` must be non-negative with a positive sum.
double max_deliverable_scale(const NetworkModel& net, const std::vector<double>& pattern,
                             double v_nominal = 1.0, double tol = 1e-11);

} // namespace evfair::oracle
