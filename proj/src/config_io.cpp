#include "evfair/config_io.hpp"

#include <fstream>
#include <sstream>

namespace evfair {

namespace {

using nlohmann::json;

struct Defaults {
    double kappa = 1e-3;
    double w_min = 1e-3;
    double d = 0.75;
    double v_nominal = 1.0;
    double alpha = 0.1;
};

Defaults read_defaults(const json& j) {
    Defaults d;
    if (!j.contains("defaults")) return d;
    const json& jd = j.at("defaults");
    d.kappa = jd.value("kappa", d.kappa);
    d.w_min = jd.value("w_min", d.w_min);
    d.d = jd.value("d", d.d);
    d.v_nominal = jd.value("v_nominal", d.v_nominal);
    d.alpha = jd.value("alpha", d.alpha);
    return d;
}

VehicleParams read_params(const json& j, const Defaults& d) {
    VehicleParams p;
    p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    p.b_max = j.at("b_max").get<double>();
    p.w_max = j.at("w_max").get<double>();
    p.t_max = j.at("t_max").get<double>();
    p.kappa = j.value("kappa", d.kappa);
    p.w_min = j.value("w_min", d.w_min);
    p.d = j.value("d", d.d);
    if (j.contains("initial_w") && !j.at("initial_w").is_null()) {
        p.initial_w = j.at("initial_w").get<double>();
    }
    if (!(p.b_max > 0.0 && p.w_max > 0.0 && p.t_max > 0.0 && p.kappa > 0.0 &&
          p.w_min > 0.0 && p.d >= 0.0 && p.d < 1.0)) {
        throw std::invalid_argument("vehicle parameters out of range");
    }
    return p;
}

json params_to_json(const VehicleParams& p) {
    json j{{"strategy", to_string(p.strategy)}, {"b_max", p.b_max},   {"w_max", p.w_max},
           {"t_max", p.t_max},                  {"kappa", p.kappa},   {"w_min", p.w_min},
           {"d", p.d}};
    if (p.initial_w >= 0.0) j["initial_w"] = p.initial_w;
    return j;
}

NetworkModel read_network(const json& j, const Defaults& d,
                          const std::filesystem::path& base_dir) {
    const json& jn = j.at("network");
    if (jn.contains("star")) {
        const json& js = jn.at("star");
        const double v_min = js.value("v_min", d.v_nominal * (1.0 - d.alpha));
        const double v_max = js.value("v_max", d.v_nominal * (1.0 + d.alpha));
        return star_network(js.at("leaves").get<int>(), js.at("r").get<double>(),
                            js.at("x").get<double>(), v_min, v_max);
    }
    if (jn.contains("inline")) {
        std::istringstream in(jn.at("inline").get<std::string>());
        return parse_network(in, "<inline>");
    }
    if (jn.contains("file")) {
        const std::filesystem::path p = jn.at("file").get<std::string>();
        return load_network(p.is_absolute() ? p : base_dir / p);
    }
    throw std::invalid_argument("network must be one of: star, inline, file");
}

} // namespace

SimulationConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
    const int version = j.value("version", 1);
    if (version != 1) throw std::invalid_argument("unsupported scenario version");

    const Defaults d = read_defaults(j);
    SimulationConfig cfg;
    cfg.dt = j.value("dt", 1.0);
    cfg.horizon = j.at("horizon").get<double>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.v_nominal = d.v_nominal;
    cfg.record_steps = j.value("record_steps", true);
    if (j.contains("solver")) {
        const json& js = j.at("solver");
        cfg.solver.tol = js.value("tol", cfg.solver.tol);
        cfg.solver.max_iterations = js.value("max_iterations", cfg.solver.max_iterations);
        cfg.solver.p_cap = js.value("p_cap", cfg.solver.p_cap);
    }
    cfg.network = read_network(j, d, base_dir);

    if (j.contains("vehicles")) {
        for (const json& jv : j.at("vehicles")) {
            ScriptedArrival a;
            a.time = jv.value("time", 0.0);
            a.bus = jv.at("bus").get<BusId>();
            a.params = read_params(jv, d);
            a.b0 = jv.value("b0", 0.0);
            cfg.scripted.push_back(a);
        }
    }
    if (j.contains("poisson") && !j.at("poisson").is_null()) {
        const json& jp = j.at("poisson");
        PoissonArrivals pa;
        pa.lambda = jp.at("lambda").get<double>();
        pa.template_params = read_params(jp.at("template"), d);
        if (jp.contains("buses") && !jp.at("buses").is_null()) {
            pa.buses = jp.at("buses").get<std::vector<BusId>>();
        }
        if (jp.contains("bus_weights") && !jp.at("bus_weights").is_null()) {
            pa.bus_weights = jp.at("bus_weights").get<std::vector<double>>();
        }
        if (jp.contains("b0")) {
            const json& jb = jp.at("b0");
            if (jb.is_array()) {
                pa.b0_lo = jb.at(0).get<double>();
                pa.b0_hi = jb.at(1).get<double>();
            } else {
                pa.b0_lo = pa.b0_hi = jb.get<double>();
            }
        }
        cfg.poisson = pa;
    }
    return cfg;
}

SimulationConfig load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("scenario parse error in " + path.string() + ": " + e.what());
    }
    return scenario_from_json(j, path.parent_path().empty() ? "." : path.parent_path());
}

json scenario_to_json(const SimulationConfig& config) {
    json j;
    j["version"] = 1;
    j["dt"] = config.dt;
    j["horizon"] = config.horizon;
    j["seed"] = config.seed;
    j["record_steps"] = config.record_steps;
    j["defaults"] = {{"v_nominal", config.v_nominal}};
    j["solver"] = {{"tol", config.solver.tol},
                   {"max_iterations", config.solver.max_iterations},
                   {"p_cap", config.solver.p_cap}};
    j["network"] = {{"inline", serialize_network(config.network)}};
    json vehicles = json::array();
    for (const ScriptedArrival& a : config.scripted) {
        json jv = params_to_json(a.params);
        jv["time"] = a.time;
        jv["bus"] = a.bus;
        jv["b0"] = a.b0;
        vehicles.push_back(jv);
    }
    j["vehicles"] = vehicles;
    if (config.poisson) {
        const PoissonArrivals& pa = *config.poisson;
        json jp;
        jp["lambda"] = pa.lambda;
        jp["template"] = params_to_json(pa.template_params);
        if (!pa.buses.empty()) jp["buses"] = pa.buses;
        if (!pa.bus_weights.empty()) jp["bus_weights"] = pa.bus_weights;
        jp["b0"] = json::array({pa.b0_lo, pa.b0_hi});
        j["poisson"] = jp;
    }
    return j;
}

SweepSpec sweep_from_json(const json& j, const std::filesystem::path& base_dir) {
    SweepSpec spec;
    spec.lambdas = j.at("lambdas").get<std::vector<double>>();
    spec.replications = j.value("replications", 20);
    spec.master_seed = j.value("master_seed", std::uint64_t{1});
    spec.jobs = j.value("jobs", 0);
    spec.base = scenario_from_json(j.at("scenario"), base_dir);
    return spec;
}

SweepSpec load_sweep_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sweep file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("sweep parse error in " + path.string() + ": " + e.what());
    }
    return sweep_from_json(j, path.parent_path().empty() ? "." : path.parent_path());
}

json run_summary_json(const SimulationConfig& config, const SimulationTrace& trace) {
    json j;
    j["seed"] = config.seed;
    j["dt"] = config.dt;
    j["horizon"] = config.horizon;
    j["steps"] = trace.total_steps;
    j["solves"] = trace.solves;
    j["arrivals"] = trace.arrivals.size();
    j["departures"] = trace.departures.size();
    j["censored"] = trace.censored.size();
    const RunMetrics m = summarize(trace.departures, static_cast<int>(trace.censored.size()));
    if (m.has_data) {
        j["metrics"] = {{"avg_battery", m.avg_battery},
                        {"fraction_full", m.fraction_full},
                        {"avg_remaining_budget", m.avg_remaining_budget},
                        {"timeup_count", m.timeup_count},
                        {"avg_price", m.avg_price},
                        {"priced_vehicles", m.priced},
                        {"avg_connected_time", m.avg_connected_time}};
    }
    return j;
}

SimulationConfig builtin_scenario(const std::string& name) {
    const std::string prefix = "star-heterogeneous-aggressive-";
    if (name.rfind(prefix, 0) == 0) {
        return scenario_heterogeneous_aggressive(strategy_from_string(name.substr(prefix.size())));
    }
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::vector<std::string> builtin_scenario_names() {
    return {"star-heterogeneous-aggressive-ut", "star-heterogeneous-aggressive-uc",
            "star-heterogeneous-aggressive-af", "star-heterogeneous-aggressive-aft"};
}

} // namespace evfair
