#pragma once

#include <filesystem>
#include <iosfwd>

#include "evfair/simulator.hpp"

namespace evfair {

/// Per-run departure statistics. Price is averaged only over vehicles that
/// actually received energy; `priced` counts them.
struct RunMetrics {
    bool has_data = false;
    int departures = 0;
    int censored = 0;
    double avg_battery = 0.0;
    double fraction_full = 0.0;
    double avg_remaining_budget = 0.0;
    double timeup_count = 0.0;
    double avg_price = 0.0;
    int priced = 0;
    double avg_connected_time = 0.0;
};

RunMetrics summarize(const std::vector<DepartureRecord>& departures, int censored = 0);

struct SweepSpec {
    std::vector<double> lambdas; // positive, strictly ascending
    int replications = 20;       // >= 2
    std::uint64_t master_seed = 1;
    int jobs = 0; // worker threads; 0 = hardware concurrency
    SimulationConfig base;       // must carry a Poisson arrival block
};

struct MetricStat {
    double mean = 0.0;
    double ci_half = 0.0; // 95% Student-t half-width over replication values
    int n = 0;
};

struct SweepRow {
    double lambda = 0.0;
    int replications = 0;
    int failures = 0;
    int censored_total = 0;
    MetricStat avg_battery, fraction_full, remaining_budget, timeup_count, price,
        connected_time;
    std::vector<std::string> failure_notes; // seed + message per failed run
};

struct StatSummary {
    std::vector<SweepRow> rows;
};

/// Runs `replications` independent simulations per lambda with seeds derived
/// from (master_seed, lambda index, replication index) and aggregates with
/// 95% confidence intervals. Failed runs are recorded and skipped; the sweep
/// itself keeps going. Replication fan-out is parallel, aggregation is not
/// affected by scheduling.
StatSummary sweep(const SweepSpec& spec);

MetricStat t_interval(const std::vector<double>& values);

void export_summary_csv(const StatSummary& summary, std::ostream& out);
StatSummary parse_summary_csv(std::istream& in);
void export_trace_csv(const SimulationTrace& trace, std::ostream& out);
void export_departures_csv(const SimulationTrace& trace, std::ostream& out);

/// Format dispatcher used by the CLI: "csv" or "json" for summaries, "csv"
/// for traces. Unknown tokens and I/O failures raise with the path included.
void export_summary(const StatSummary& summary, const std::string& format,
                    const std::filesystem::path& path);
void export_trace(const SimulationTrace& trace, const std::string& format,
                  const std::filesystem::path& path);

} // namespace evfair
