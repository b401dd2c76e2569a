#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "evfair/report.hpp"
#include "evfair/simulator.hpp"

namespace evfair {

/// Scenario files are JSON mirroring SimulationConfig; see README for the
/// schema. The network may be given inline (serialized text), as a star
/// shorthand, or as a path relative to the scenario file.
SimulationConfig scenario_from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = ".");
SimulationConfig load_scenario_file(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const SimulationConfig& config);

SweepSpec sweep_from_json(const nlohmann::json& j,
                          const std::filesystem::path& base_dir = ".");
SweepSpec load_sweep_file(const std::filesystem::path& path);

/// Reproducibility metadata written next to run outputs.
nlohmann::json run_summary_json(const SimulationConfig& config, const SimulationTrace& trace);

/// Built-in scenario by name, e.g. "star-heterogeneous-aggressive-ut".
SimulationConfig builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

} // namespace evfair
