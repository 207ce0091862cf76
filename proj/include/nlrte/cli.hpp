#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nlrte/config.hpp"
#include "nlrte/manifest.hpp"
#include "nlrte/transport.hpp"

namespace nlrte {

inline constexpr const char* kVersion = "0.1.0";

// Problem assembly shared by the subcommands.
SpatialGrid grid_from_config(const Config& cfg);
EvolutionGrid evolution_from_config(const Config& cfg);
AngularQuadrature quadrature_from_config(const Config& cfg);
PhaseFunction phase_from_config(const Config& cfg, const AngularQuadrature& quad);
AbsorptionModel absorption_from_config(const Config& cfg, const SpatialGrid& grid, const EvolutionGrid& evo);
std::vector<double> initial_from_config(const Config& cfg, const SpatialGrid& grid);
SolverOptions solver_from_config(const Config& cfg);
TransportProblem transport_from_config(const Config& cfg);

// State of one CLI invocation, turned into `manifest.txt` by emit_manifest.
struct RunContext {
    std::string command;
    std::filesystem::path out_dir;
    Config config;
    RunManifest manifest;  // run-specific entries (seeds, iteration counts, ...)
    std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
    bool failed = false;
    std::string error_kind;
    std::string error_message;

    // Records an output file (relative to out_dir) in the manifest.
    std::filesystem::path output(const std::string& name);
};

// Keys under `timing.` are the only ones allowed to differ between two
// identical seeded runs.
std::filesystem::path emit_manifest(RunContext& ctx);

// Full command line including the program name. Returns the exit code:
// 0 success, 1 validation or input error, 2 solver non-convergence.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace nlrte
