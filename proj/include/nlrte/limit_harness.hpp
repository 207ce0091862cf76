#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlrte/diffusion.hpp"
#include "nlrte/table.hpp"
#include "nlrte/transport.hpp"

namespace nlrte {

// Builds the eps-scaled transport problem on an nx-per-axis, nz-step grid.
using ProblemFactory = std::function<TransportProblem(int nx, int nz, double epsilon)>;

struct ConvergenceStudy {
    ProblemFactory factory;
    std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
    int nx = 256;
    int nz = 50;
    // Cells of the base grid excluded at each boundary; z < layer_factor eps^2 excluded.
    int boundary_cells = 2;
    double layer_factor = 5.0;
    // Refine (nx, nz) -> (2nx, 2nz) until the Richardson estimate of the
    // transport discretization error is <= refine_ratio * e(eps).
    bool auto_refine = true;
    double refine_ratio = 0.2;
    int max_refinements = 6;
    // Constant c of the degenerate lower-bound check.
    double lower_bound_c = 1.0;
    SolverOptions options{};
    DiffusionOptions diffusion_options{};
};

struct StudyRecord {
    double epsilon = 0.0;
    double error = 0.0;
    double discretization_error = 0.0;  // Richardson estimate, 0 when not refined
    int nx = 0;
    int nz = 0;
    bool condition_ii = false;
    double min_density = 0.0;   // min interior <W_eps>/nu
    double min_reference = 0.0; // min interior w_0 (degenerate studies)
};

struct StudyResult {
    std::vector<StudyRecord> records;
    std::optional<double> slope;
    double slope_residual = 0.0;
    std::string note;
    bool monotone = true;       // e nonincreasing with 10% slack
    bool lower_bound_ok = true; // degenerate studies only
    CsvTable table() const;
};

// The diffusion problem matched to an eps-scaled transport problem (A from the
// cell problems, angular-mean absorption argument).
DiffusionProblem matched_diffusion(const TransportProblem& transport);

// e = max |<W_eps>/nu - W_0| over the interior window of one run pair.
double interior_error(const TransportProblem& problem, const DensityField& transport_density,
                      const DensityField& diffusion, int margin_cells, double z_min);

StudyResult run_convergence_study(const ConvergenceStudy& study);
StudyResult run_degenerate_study(const ConvergenceStudy& study);

// Least-squares slope of log y against log x; residual is the RMS misfit.
std::pair<double, double> fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nlrte
