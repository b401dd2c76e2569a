#include "evfair/report.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace evfair {

RunMetrics summarize(const std::vector<DepartureRecord>& departures, int censored) {
    RunMetrics m;
    m.censored = censored;
    if (departures.empty()) return m; // explicit empty marker: has_data stays false

    m.has_data = true;
    m.departures = static_cast<int>(departures.size());
    double b_sum = 0, full = 0, rem_sum = 0, timeup = 0, price_sum = 0, dur_sum = 0;
    for (const DepartureRecord& d : departures) {
        b_sum += d.b_depart;
        if (d.b_depart >= d.b_max - 1e-6 * d.b_max) full += 1.0;
        rem_sum += d.w_max - d.w_spent;
        if (d.reason == DisconnectReason::TimeUp) timeup += 1.0;
        if (d.price_defined) {
            price_sum += d.price;
            ++m.priced;
        }
        dur_sum += d.duration;
    }
    const double n = static_cast<double>(m.departures);
    m.avg_battery = b_sum / n;
    m.fraction_full = full / n;
    m.avg_remaining_budget = rem_sum / n;
    m.timeup_count = timeup;
    m.avg_price = m.priced > 0 ? price_sum / m.priced : 0.0;
    m.avg_connected_time = dur_sum / n;
    return m;
}

MetricStat t_interval(const std::vector<double>& values) {
    MetricStat s;
    s.n = static_cast<int>(values.size());
    if (s.n == 0) return s;
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / s.n;
    if (s.n < 2) return s;
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / (s.n - 1));
    const boost::math::students_t dist(s.n - 1);
    s.ci_half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(double(s.n));
    return s;
}

StatSummary sweep(const SweepSpec& spec) {
    if (spec.replications < 2) throw std::invalid_argument("need at least 2 replications");
    if (spec.lambdas.empty()) throw std::invalid_argument("no lambda values");
    for (std::size_t i = 0; i < spec.lambdas.size(); ++i) {
        if (!(spec.lambdas[i] > 0.0)) throw std::invalid_argument("lambda values must be positive");
        if (i > 0 && spec.lambdas[i] == spec.lambdas[i - 1]) {
            throw std::invalid_argument("duplicate lambda value " +
                                        std::to_string(spec.lambdas[i]));
        }
        if (i > 0 && spec.lambdas[i] < spec.lambdas[i - 1]) {
            throw std::invalid_argument("lambda values must be sorted ascending");
        }
    }
    if (!spec.base.poisson) throw std::invalid_argument("sweep base config has no Poisson block");

    struct Cell {
        bool ok = false;
        RunMetrics metrics;
        std::string failure;
    };
    const std::size_t nl = spec.lambdas.size();
    const std::size_t reps = static_cast<std::size_t>(spec.replications);
    std::vector<Cell> cells(nl * reps);

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t job = cursor.fetch_add(1);
            if (job >= cells.size()) return;
            const std::size_t li = job / reps;
            const std::size_t rep = job % reps;
            SimulationConfig cfg = spec.base;
            cfg.poisson->lambda = spec.lambdas[li];
            cfg.seed = mix_seed(spec.master_seed, li * 1000003ULL + rep);
            cfg.record_steps = false;
            try {
                const SimulationTrace trace = run(cfg);
                cells[job].metrics =
                    summarize(trace.departures, static_cast<int>(trace.censored.size()));
                cells[job].ok = true;
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "seed " << cfg.seed << ": " << e.what();
                cells[job].failure = os.str();
            }
        }
    };

    int jobs = spec.jobs > 0 ? spec.jobs
                             : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    StatSummary summary;
    for (std::size_t li = 0; li < nl; ++li) {
        SweepRow row;
        row.lambda = spec.lambdas[li];
        row.replications = spec.replications;
        std::vector<double> battery, full, budget, timeup, price, conn;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const Cell& c = cells[li * reps + rep];
            if (!c.ok) {
                ++row.failures;
                row.failure_notes.push_back(c.failure);
                continue;
            }
            row.censored_total += c.metrics.censored;
            if (!c.metrics.has_data) continue;
            battery.push_back(c.metrics.avg_battery);
            full.push_back(c.metrics.fraction_full);
            budget.push_back(c.metrics.avg_remaining_budget);
            timeup.push_back(c.metrics.timeup_count);
            conn.push_back(c.metrics.avg_connected_time);
            if (c.metrics.priced > 0) price.push_back(c.metrics.avg_price);
        }
        row.avg_battery = t_interval(battery);
        row.fraction_full = t_interval(full);
        row.remaining_budget = t_interval(budget);
        row.timeup_count = t_interval(timeup);
        row.price = t_interval(price);
        row.connected_time = t_interval(conn);
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

namespace {

void put(std::ostream& out, double v, bool last = false) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << (last ? "\n" : ",");
}

const char* kSummaryHeader =
    "lambda,replications,failures,censored,"
    "battery_mean,battery_ci,battery_n,"
    "full_frac_mean,full_frac_ci,full_frac_n,"
    "budget_rem_mean,budget_rem_ci,budget_rem_n,"
    "timeup_mean,timeup_ci,timeup_n,"
    "price_mean,price_ci,price_n,"
    "conn_time_mean,conn_time_ci,conn_time_n";

} // namespace

void export_summary_csv(const StatSummary& summary, std::ostream& out) {
    out << kSummaryHeader << "\n";
    for (const SweepRow& r : summary.rows) {
        put(out, r.lambda);
        out << r.replications << "," << r.failures << "," << r.censored_total << ",";
        for (const MetricStat* m :
             {&r.avg_battery, &r.fraction_full, &r.remaining_budget, &r.timeup_count, &r.price,
              &r.connected_time}) {
            put(out, m->mean);
            put(out, m->ci_half);
            const bool last = m == &r.connected_time;
            out << m->n << (last ? "\n" : ",");
        }
    }
}

StatSummary parse_summary_csv(std::istream& in) {
    StatSummary summary;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty summary csv");
    if (line != kSummaryHeader) throw std::runtime_error("unexpected summary csv header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string tok;
        std::vector<std::string> v;
        while (std::getline(row, tok, ',')) v.push_back(tok);
        if (v.size() != 22) throw std::runtime_error("bad summary csv row: " + line);
        SweepRow r;
        std::size_t i = 0;
        r.lambda = std::stod(v[i++]);
        r.replications = std::stoi(v[i++]);
        r.failures = std::stoi(v[i++]);
        r.censored_total = std::stoi(v[i++]);
        for (MetricStat* m : {&r.avg_battery, &r.fraction_full, &r.remaining_budget,
                              &r.timeup_count, &r.price, &r.connected_time}) {
            m->mean = std::stod(v[i++]);
            m->ci_half = std::stod(v[i++]);
            m->n = std::stoi(v[i++]);
        }
        summary.rows.push_back(r);
    }
    return summary;
}

void export_trace_csv(const SimulationTrace& trace, std::ostream& out) {
    out << "t,vehicle,bus,w,P,B,W_spent\n";
    for (const StepRecord& s : trace.steps) {
        for (const VehicleStepRow& r : s.rows) {
            put(out, s.t);
            out << r.vehicle << "," << r.bus << ",";
            put(out, r.w);
            put(out, r.p);
            put(out, r.b);
            put(out, r.w_spent, true);
        }
    }
}

void export_departures_csv(const SimulationTrace& trace, std::ostream& out) {
    out << "vehicle,bus,strategy,reason,t_arr,t_depart,duration,b0,b_depart,b_max,"
           "w_spent,w_max,energy,price_defined,price\n";
    auto row = [&](const DepartureRecord& d) {
        out << d.vehicle << "," << d.bus << "," << to_string(d.strategy) << ","
            << to_string(d.reason) << ",";
        put(out, d.t_arr);
        put(out, d.t_depart);
        put(out, d.duration);
        put(out, d.b0);
        put(out, d.b_depart);
        put(out, d.b_max);
        put(out, d.w_spent);
        put(out, d.w_max);
        put(out, d.energy);
        out << (d.price_defined ? 1 : 0) << ",";
        put(out, d.price, true);
    };
    for (const DepartureRecord& d : trace.departures) row(d);
    for (const DepartureRecord& d : trace.censored) row(d);
}

namespace {

nlohmann::json stat_json(const MetricStat& m) {
    return nlohmann::json{{"mean", m.mean}, {"ci95_half", m.ci_half}, {"n", m.n}};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    return out;
}

} // namespace

void export_summary(const StatSummary& summary, const std::string& format,
                    const std::filesystem::path& path) {
    if (format == "csv") {
        auto out = open_out(path);
        export_summary_csv(summary, out);
    } else if (format == "json") {
        nlohmann::json rows = nlohmann::json::array();
        for (const SweepRow& r : summary.rows) {
            rows.push_back({{"lambda", r.lambda},
                            {"replications", r.replications},
                            {"failures", r.failures},
                            {"censored", r.censored_total},
                            {"avg_battery", stat_json(r.avg_battery)},
                            {"fraction_full", stat_json(r.fraction_full)},
                            {"remaining_budget", stat_json(r.remaining_budget)},
                            {"timeup_count", stat_json(r.timeup_count)},
                            {"price", stat_json(r.price)},
                            {"connected_time", stat_json(r.connected_time)},
                            {"failure_notes", r.failure_notes}});
        }
        auto out = open_out(path);
        out << rows.dump(2) << "\n";
    } else {
        throw std::invalid_argument("unknown export format '" + format + "'");
    }
    if (std::ofstream probe(path, std::ios::app); !probe) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

void export_trace(const SimulationTrace& trace, const std::string& format,
                  const std::filesystem::path& path) {
    if (format != "csv") throw std::invalid_argument("unknown export format '" + format + "'");
    auto out = open_out(path);
    export_trace_csv(trace, out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace evfair
