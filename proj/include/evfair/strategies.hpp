#pragma once

#include <string>

#include "evfair/network.hpp"

namespace evfair {

enum class Strategy { UT, UC, AF, AFT };
const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

enum class DisconnectReason { Stay, FullBattery, BudgetSpent, TimeUp };
const char* to_string(DisconnectReason r);

/// Static description of one EV agent. Money, energy and time are abstract
/// units; willingness to pay has units money/time.
struct VehicleParams {
    Strategy strategy = Strategy::UT;
    double b_max = 20.0;  // battery capacity
    double w_max = 500.0; // total budget
    double t_max = 300.0; // maximum connected time
    double kappa = 1e-3;  // update-rule gain
    double w_min = 1e-3;  // restart floor (AF/AFT)
    double d = 0.75;      // AFT depletion-onset fraction of t_max, in [0, 1)
    double initial_w = -1.0; // first posted weight; < 0 means w_max / t_max
};

struct VehicleState {
    int id = 0;
    BusId bus = 0;
    double t_arr = 0.0;
    double b = 0.0;       // current battery level
    double b0 = 0.0;      // battery level at arrival
    double w_spent = 0.0;
    double w = 0.0;       // last posted willingness to pay
    double last_p = 0.0;  // power received in the previous step
    double energy = 0.0;  // battery gained since arrival (cap-truncated)
    bool has_history = false; // true once one allocation step has been absorbed
};

/// UT: the whole budget spread uniformly over the stay.
double ut_weight(const VehicleParams& params);

/// UC: track a linear battery ramp that reaches b_max at t_arr + t_max.
/// w = max{0, w_prev - kappa dt (B - ramp)}.
double uc_update(const VehicleState& state, const VehicleParams& params, double t, double dt);

/// AF: drive the paid price per unit of energy towards what the remaining
/// budget affords. The division by the previous power is guarded at 1e-9, so
/// a starved vehicle falls to w_min and waits.
double af_update(const VehicleState& state, const VehicleParams& params, double dt);

/// AFT: AF, plus a late-stay floor alpha(t) * W_rem / T_remaining where
/// alpha ramps linearly from 0 at t_arr + d t_max to 1 at departure time.
/// T_remaining is clamped below at dt.
double aft_update(const VehicleState& state, const VehicleParams& params, double t, double dt);

/// Produces the weight a vehicle posts at the step starting at time t.
/// First post after arrival is the seed weight (UT value, or params.initial_w
/// when given); afterwards the strategy update rule applies. The result is
/// clamped to [0, W_rem / dt] so the spend integral can never exceed w_max.
double next_weight(const VehicleState& state, const VehicleParams& params, double t, double dt);

/// Disconnect test at time t (end of an integration step). Precedence when
/// several conditions hold simultaneously: FullBattery > BudgetSpent > TimeUp.
/// Defaults: eps_b = 1e-6 b_max, eps_w = 1e-9 w_max.
DisconnectReason should_disconnect(const VehicleState& state, const VehicleParams& params,
                                   double t, double eps_b, double eps_w);
DisconnectReason should_disconnect(const VehicleState& state, const VehicleParams& params,
                                   double t);

/// Forward-Euler accounting for one step: battery gains P dt (capped at
/// b_max, excess discarded), spend grows by w dt (capped at w_max).
void accrue(VehicleState& state, const VehicleParams& params, double p, double w, double dt);

double full_battery_eps(const VehicleParams& params);
double budget_eps(const VehicleParams& params);

} // namespace evfair
