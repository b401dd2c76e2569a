#include "evfair/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evfair {

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::UT: return "UT";
    case Strategy::UC: return "UC";
    case Strategy::AF: return "AF";
    case Strategy::AFT: return "AFT";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "UT" || name == "ut") return Strategy::UT;
    if (name == "UC" || name == "uc") return Strategy::UC;
    if (name == "AF" || name == "af") return Strategy::AF;
    if (name == "AFT" || name == "aft") return Strategy::AFT;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

const char* to_string(DisconnectReason r) {
    switch (r) {
    case DisconnectReason::Stay: return "Stay";
    case DisconnectReason::FullBattery: return "FullBattery";
    case DisconnectReason::BudgetSpent: return "BudgetSpent";
    case DisconnectReason::TimeUp: return "TimeUp";
    }
    return "?";
}

double full_battery_eps(const VehicleParams& params) { return 1e-6 * params.b_max; }
double budget_eps(const VehicleParams& params) { return 1e-9 * params.w_max; }

double ut_weight(const VehicleParams& params) { return params.w_max / params.t_max; }

double uc_update(const VehicleState& state, const VehicleParams& params, double t, double dt) {
    const double ramp = (t - state.t_arr) / params.t_max * params.b_max;
    return std::max(0.0, state.w - params.kappa * dt * (state.b - ramp));
}

double af_update(const VehicleState& state, const VehicleParams& params, double dt) {
    const double w_rem = params.w_max - state.w_spent;
    const double gap = std::max(params.b_max - state.b, 1e-12);
    const double p_guard = std::max(state.last_p, 1e-9);
    const double w = state.w + params.kappa * dt * (w_rem / gap - state.w / p_guard);
    return std::max(w, params.w_min);
}

double aft_update(const VehicleState& state, const VehicleParams& params, double t, double dt) {
    const double w_af = af_update(state, params, dt);
    const double alpha =
        (t - state.t_arr) / (params.t_max * (1.0 - params.d)) - params.d / (1.0 - params.d);
    const double t_remaining = std::max(state.t_arr + params.t_max - t, dt);
    const double w_rem = params.w_max - state.w_spent;
    return std::max(w_af, alpha * w_rem / t_remaining);
}

double next_weight(const VehicleState& state, const VehicleParams& params, double t, double dt) {
    double w;
    if (params.strategy == Strategy::UT) {
        w = ut_weight(params);
    } else if (!state.has_history) {
        w = params.initial_w >= 0.0 ? params.initial_w : params.w_max / params.t_max;
    } else {
        switch (params.strategy) {
        case Strategy::UC: w = uc_update(state, params, t, dt); break;
        case Strategy::AF: w = af_update(state, params, dt); break;
        case Strategy::AFT: w = aft_update(state, params, t, dt); break;
        default: w = ut_weight(params); break;
        }
    }
    const double w_rem = params.w_max - state.w_spent;
    return std::clamp(w, 0.0, std::max(0.0, w_rem / dt));
}

DisconnectReason should_disconnect(const VehicleState& state, const VehicleParams& params,
                                   double t, double eps_b, double eps_w) {
    if (state.b >= params.b_max - eps_b) return DisconnectReason::FullBattery;
    if (params.w_max - state.w_spent <= eps_w) return DisconnectReason::BudgetSpent;
    if (t - state.t_arr >= params.t_max * (1.0 - 1e-12)) return DisconnectReason::TimeUp;
    return DisconnectReason::Stay;
}

DisconnectReason should_disconnect(const VehicleState& state, const VehicleParams& params,
                                   double t) {
    return should_disconnect(state, params, t, full_battery_eps(params), budget_eps(params));
}

void accrue(VehicleState& state, const VehicleParams& params, double p, double w, double dt) {
    const double gain = std::min(p * dt, params.b_max - state.b);
    state.b += gain;
    state.energy += gain;
    state.w_spent = std::min(state.w_spent + w * dt, params.w_max);
    state.last_p = p;
    state.has_history = true;
}

} // namespace evfair
