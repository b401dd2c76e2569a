#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "evfair/allocation.hpp"
#include "evfair/network.hpp"
#include "evfair/rng.hpp"
#include "evfair/strategies.hpp"

namespace evfair {

struct ScriptedArrival {
    double time = 0.0;
    BusId bus = 0;
    VehicleParams params;
    double b0 = 0.0;
};

/// Poisson arrival stream: exponential inter-arrival times with rate lambda,
/// bus chosen per arrival from `buses` (all chargeable buses when empty),
/// optionally weighted; initial battery uniform in [b0_lo, b0_hi].
struct PoissonArrivals {
    double lambda = 0.0;
    VehicleParams template_params;
    std::vector<BusId> buses;
    std::vector<double> bus_weights;
    double b0_lo = 0.0;
    double b0_hi = 0.0;
};

struct SimulationConfig {
    double dt = 1.0;
    double horizon = 0.0; // positive multiple of dt
    std::uint64_t seed = 0;
    NetworkModel network;
    double v_nominal = 1.0;
    SolverOptions solver;
    std::vector<ScriptedArrival> scripted;
    std::optional<PoissonArrivals> poisson;
    bool record_steps = true; // per-step rows + voltages in the trace
};

struct VehicleStepRow {
    int vehicle = 0;
    BusId bus = 0;
    double w = 0.0;       // weight posted this step
    double p = 0.0;       // power allocated this step
    double b = 0.0;       // battery at end of step
    double w_spent = 0.0; // spend at end of step
};

struct StepRecord {
    double t = 0.0; // start of step
    bool solved = false;
    SolveStatus status = SolveStatus::Optimal;
    int iterations = 0;
    double objective = 0.0;
    std::vector<VehicleStepRow> rows;
    std::vector<double> v_sq; // per dense bus index
};

struct ArrivalRecord {
    int vehicle = 0;
    BusId bus = 0;
    double time = 0.0;
    double b0 = 0.0;
    VehicleParams params;
};

struct DepartureRecord {
    int vehicle = 0;
    BusId bus = 0;
    Strategy strategy = Strategy::UT;
    DisconnectReason reason = DisconnectReason::Stay;
    double t_arr = 0.0;
    double t_depart = 0.0;
    double duration = 0.0;
    double b0 = 0.0;
    double b_depart = 0.0;
    double b_max = 0.0;
    double w_spent = 0.0;
    double w_max = 0.0;
    double energy = 0.0; // battery gained over the stay
    double price = 0.0;  // w_spent / energy, defined only for energy > 0
    bool price_defined = false;
};

struct SimulationTrace {
    std::vector<StepRecord> steps; // empty unless record_steps
    std::vector<ArrivalRecord> arrivals;
    std::vector<DepartureRecord> departures;
    std::vector<DepartureRecord> censored; // still connected at the horizon
    long total_steps = 0;
    long solves = 0;
};

/// Arrival times in (0, window] of a Poisson process with rate lambda.
std::vector<double> sample_arrivals(Rng& rng, double lambda, double window);

struct ActiveVehicle {
    VehicleState state;
    VehicleParams params;
};

/// One simulation instance. Step order is fixed:
///   (1) every connected vehicle posts its weight,
///   (2) the allocation program is solved over positive weights,
///   (3) battery and spend integrate over dt,
///   (4) departures are detected at t + dt and removed,
///   (5) arrivals in (t, t + dt] are admitted,
///   (6) t advances.
/// An Infeasible or NumericalFailure allocation aborts the run by throwing
/// SimulationError with the step index.
class Simulator {
public:
    explicit Simulator(const SimulationConfig& config);

    void step();
    double time() const { return t_; }
    long step_index() const { return step_index_; }
    bool finished() const { return step_index_ >= n_steps_; }
    const std::vector<ActiveVehicle>& connected() const { return active_; }

    /// Moves still-connected vehicles into trace().censored; call after the
    /// final step.
    void finalize();
    SimulationTrace& trace() { return trace_; }

private:
    void admit(double window_start, double window_end);
    void admit_vehicle(double time, BusId bus, const VehicleParams& params, double b0);
    DepartureRecord make_record(const ActiveVehicle& v, DisconnectReason reason,
                                double t_depart) const;

    const SimulationConfig& config_;
    Rng rng_;
    double t_ = 0.0;
    long step_index_ = 0;
    long n_steps_ = 0;
    int next_id_ = 0;
    std::size_t next_scripted_ = 0;
    std::vector<std::size_t> scripted_order_;
    double next_poisson_ = 0.0;
    std::vector<BusId> poisson_buses_;
    std::vector<double> poisson_cdf_;
    std::vector<ActiveVehicle> active_;
    SimulationTrace trace_;
};

/// Runs the whole horizon. Deterministic: identical (config, seed) produce
/// bit-identical traces.
SimulationTrace run(const SimulationConfig& config);

/// Star-network scenario with heterogeneous budgets and a late aggressive
/// vehicle: one vehicle of the given strategy at each of buses 2..10 with
/// W_max = 1.3^(bus-2) * 500, B_max = 20, T_max = 300, plus a UT vehicle with
/// a 1e7 budget and T_max = 100 arriving at bus 11 at t = 100.
SimulationConfig scenario_heterogeneous_aggressive(Strategy strategy);

} // namespace evfair
