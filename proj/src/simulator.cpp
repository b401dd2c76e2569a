#include "evfair/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evfair {

std::vector<double> sample_arrivals(Rng& rng, double lambda, double window) {
    std::vector<double> times;
    if (!(lambda > 0.0)) return times;
    double t = rng.exponential(lambda);
    while (t <= window) {
        times.push_back(t);
        t += rng.exponential(lambda);
    }
    return times;
}

Simulator::Simulator(const SimulationConfig& config) : config_(config), rng_(config.seed) {
    if (!(config.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(config.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    const double steps = config.horizon / config.dt;
    n_steps_ = std::llround(steps);
    if (std::abs(steps - static_cast<double>(n_steps_)) > 1e-9) {
        throw std::invalid_argument("horizon must be a multiple of dt");
    }

    // Scripted arrivals in time order; stable so equal times keep list order.
    scripted_order_.resize(config.scripted.size());
    std::iota(scripted_order_.begin(), scripted_order_.end(), std::size_t{0});
    std::stable_sort(scripted_order_.begin(), scripted_order_.end(),
                     [&](std::size_t a, std::size_t b) {
                         return config.scripted[a].time < config.scripted[b].time;
                     });

    if (config.poisson) {
        const PoissonArrivals& pa = *config.poisson;
        if (pa.lambda < 0.0) throw std::invalid_argument("arrival rate must be non-negative");
        poisson_buses_ = pa.buses.empty() ? config.network.chargeable_buses() : pa.buses;
        if (pa.lambda > 0.0 && poisson_buses_.empty()) {
            throw std::invalid_argument("no chargeable buses for Poisson arrivals");
        }
        for (BusId b : poisson_buses_) {
            if (!config.network.is_chargeable(b)) {
                throw std::invalid_argument("arrival bus " + std::to_string(b) +
                                            " is not chargeable");
            }
        }
        if (!pa.bus_weights.empty()) {
            if (pa.bus_weights.size() != poisson_buses_.size()) {
                throw std::invalid_argument("bus weight list length mismatch");
            }
            double acc = 0.0;
            for (double w : pa.bus_weights) {
                if (w < 0.0) throw std::invalid_argument("negative bus weight");
                acc += w;
                poisson_cdf_.push_back(acc);
            }
            if (!(acc > 0.0)) throw std::invalid_argument("bus weights sum to zero");
            for (double& c : poisson_cdf_) c /= acc;
        }
        next_poisson_ = pa.lambda > 0.0 ? rng_.exponential(pa.lambda)
                                        : std::numeric_limits<double>::infinity();
    } else {
        next_poisson_ = std::numeric_limits<double>::infinity();
    }

    // Vehicles present from the start.
    while (next_scripted_ < scripted_order_.size() &&
           config.scripted[scripted_order_[next_scripted_]].time <= 0.0) {
        const ScriptedArrival& a = config.scripted[scripted_order_[next_scripted_]];
        admit_vehicle(a.time, a.bus, a.params, a.b0);
        ++next_scripted_;
    }
}

void Simulator::admit_vehicle(double time, BusId bus, const VehicleParams& params, double b0) {
    if (!config_.network.is_chargeable(bus)) {
        throw SimulationError("arrival at non-chargeable bus " + std::to_string(bus),
                              step_index_);
    }
    ActiveVehicle v;
    v.params = params;
    v.state.id = next_id_++;
    v.state.bus = bus;
    v.state.t_arr = time;
    v.state.b = b0;
    v.state.b0 = b0;
    active_.push_back(v);
    trace_.arrivals.push_back(ArrivalRecord{v.state.id, bus, time, b0, params});
}

void Simulator::admit(double window_start, double window_end) {
    for (;;) {
        double t_scripted = std::numeric_limits<double>::infinity();
        if (next_scripted_ < scripted_order_.size()) {
            t_scripted = config_.scripted[scripted_order_[next_scripted_]].time;
        }
        const bool take_scripted =
            t_scripted <= window_end && (t_scripted <= next_poisson_ || !config_.poisson);
        if (take_scripted) {
            const ScriptedArrival& a = config_.scripted[scripted_order_[next_scripted_]];
            admit_vehicle(a.time, a.bus, a.params, a.b0);
            ++next_scripted_;
            continue;
        }
        if (config_.poisson && next_poisson_ <= window_end) {
            const PoissonArrivals& pa = *config_.poisson;
            std::size_t pick;
            if (!poisson_cdf_.empty()) {
                const double u = rng_.uniform01();
                pick = static_cast<std::size_t>(
                    std::lower_bound(poisson_cdf_.begin(), poisson_cdf_.end(), u) -
                    poisson_cdf_.begin());
                pick = std::min(pick, poisson_buses_.size() - 1);
            } else {
                pick = rng_.index(poisson_buses_.size());
            }
            const double b0 = pa.b0_hi > pa.b0_lo ? rng_.uniform(pa.b0_lo, pa.b0_hi) : pa.b0_lo;
            admit_vehicle(next_poisson_, poisson_buses_[pick], pa.template_params, b0);
            next_poisson_ += rng_.exponential(pa.lambda);
            continue;
        }
        break;
    }
    (void)window_start;
}

DepartureRecord Simulator::make_record(const ActiveVehicle& v, DisconnectReason reason,
                                       double t_depart) const {
    DepartureRecord rec;
    rec.vehicle = v.state.id;
    rec.bus = v.state.bus;
    rec.strategy = v.params.strategy;
    rec.reason = reason;
    rec.t_arr = v.state.t_arr;
    rec.t_depart = t_depart;
    rec.duration = t_depart - v.state.t_arr;
    rec.b0 = v.state.b0;
    rec.b_depart = v.state.b;
    rec.b_max = v.params.b_max;
    rec.w_spent = v.state.w_spent;
    rec.w_max = v.params.w_max;
    rec.energy = v.state.energy;
    if (rec.energy > 0.0) {
        rec.price = rec.w_spent / rec.energy;
        rec.price_defined = true;
    }
    return rec;
}

void Simulator::step() {
    if (finished()) throw std::logic_error("step() past the horizon");
    const double t = t_;
    const double t_end = t + config_.dt;

    // (1) weight posting
    for (ActiveVehicle& v : active_) {
        v.state.w = next_weight(v.state, v.params, t, config_.dt);
    }

    // (2) allocation
    AllocationRequest request;
    request.t = t;
    request.entries.reserve(active_.size());
    bool any_positive = false;
    for (const ActiveVehicle& v : active_) {
        request.entries.push_back(RequestEntry{v.state.id, v.state.bus, v.state.w});
        any_positive = any_positive || v.state.w > 0.0;
    }

    StepRecord rec;
    rec.t = t;
    std::vector<double> powers(active_.size(), 0.0);
    if (any_positive) {
        const AllocationProblem problem =
            build_problem(config_.network, request, config_.v_nominal, config_.solver);
        const AllocationResult result = solve(problem);
        ++trace_.solves;
        if (result.status != SolveStatus::Optimal) {
            throw SimulationError("allocation solve failed (" +
                                      std::string(to_string(result.status)) + "): " +
                                      result.message,
                                  step_index_);
        }
        powers = result.powers;
        rec.solved = true;
        rec.status = result.status;
        rec.iterations = result.iterations;
        rec.objective = result.objective;
        if (config_.record_steps) rec.v_sq = result.v_sq;
    } else {
        rec.solved = false;
        rec.status = SolveStatus::Optimal;
        if (config_.record_steps) {
            rec.v_sq.assign(config_.network.bus_count(),
                            config_.v_nominal * config_.v_nominal);
        }
    }

    // (3) accounting
    for (std::size_t i = 0; i < active_.size(); ++i) {
        accrue(active_[i].state, active_[i].params, powers[i], active_[i].state.w, config_.dt);
    }
    if (config_.record_steps) {
        rec.rows.reserve(active_.size());
        for (const ActiveVehicle& v : active_) {
            rec.rows.push_back(VehicleStepRow{v.state.id, v.state.bus, v.state.w, v.state.last_p,
                                              v.state.b, v.state.w_spent});
        }
    }

    // (4) departures at the end of the step
    std::vector<ActiveVehicle> still;
    still.reserve(active_.size());
    for (ActiveVehicle& v : active_) {
        const DisconnectReason reason = should_disconnect(v.state, v.params, t_end);
        if (reason == DisconnectReason::Stay) {
            still.push_back(std::move(v));
        } else {
            trace_.departures.push_back(make_record(v, reason, t_end));
        }
    }
    active_ = std::move(still);

    // (5) arrivals in (t, t_end]
    admit(t, t_end);

    // (6) advance
    t_ = t_end;
    ++step_index_;
    ++trace_.total_steps;
    if (config_.record_steps) trace_.steps.push_back(std::move(rec));
}

void Simulator::finalize() {
    for (const ActiveVehicle& v : active_) {
        trace_.censored.push_back(make_record(v, DisconnectReason::Stay, t_));
    }
}

SimulationTrace run(const SimulationConfig& config) {
    Simulator sim(config);
    while (!sim.finished()) sim.step();
    sim.finalize();
    return std::move(sim.trace());
}

SimulationConfig scenario_heterogeneous_aggressive(Strategy strategy) {
    SimulationConfig cfg;
    cfg.dt = 1.0;
    cfg.horizon = 500.0;
    cfg.seed = 0;
    cfg.network = star_network(10, 0.1, 0.6, 0.9, 1.1);

    // Nine incumbents with geometrically spread budgets. The seed weight is
    // the base budget spread over the stay, identical for all so that
    // budget-blind strategies (UC) produce indistinguishable trajectories.
    for (BusId bus = 2; bus <= 10; ++bus) {
        VehicleParams p;
        p.strategy = strategy;
        p.b_max = 20.0;
        p.t_max = 300.0;
        p.w_max = 500.0 * std::pow(1.3, bus - 2);
        p.initial_w = 500.0 / 300.0;
        cfg.scripted.push_back(ScriptedArrival{0.0, bus, p, 0.0});
    }

    VehicleParams aggressive;
    aggressive.strategy = Strategy::UT;
    aggressive.b_max = 20.0;
    aggressive.t_max = 100.0;
    aggressive.w_max = 1e7;
    cfg.scripted.push_back(ScriptedArrival{100.0, 11, aggressive, 0.0});
    return cfg;
}

} // namespace evfair
