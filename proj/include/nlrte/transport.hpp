#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nlrte/angular.hpp"
#include "nlrte/core.hpp"

namespace nlrte {

// Sigma_a(m)(z, x) = sum_{l=0}^{L} Sigma_{a,l}(z, x) m^l, coefficients
// sampled at every z-level and cell.
class AbsorptionModel {
public:
    AbsorptionModel() = default;
    AbsorptionModel(const SpatialGrid& grid, const EvolutionGrid& evolution, int order);

    static AbsorptionModel constant(const SpatialGrid& grid, const EvolutionGrid& evolution,
                                    std::vector<double> coefficients);
    // coefficient(l, z, x, y)
    static AbsorptionModel from_function(const SpatialGrid& grid, const EvolutionGrid& evolution,
                                         int order,
                                         const std::function<double(int, double, double, double)>& coefficient);

    int order() const noexcept { return order_; }
    const SpatialGrid& grid() const noexcept { return grid_; }
    const EvolutionGrid& evolution() const noexcept { return evo_; }

    double coefficient(int l, int iz, std::size_t cell) const { return c_[offset(l, iz, cell)]; }
    double& coefficient(int l, int iz, std::size_t cell) { return c_[offset(l, iz, cell)]; }
    std::vector<double>& values() noexcept { return c_; }
    const std::vector<double>& values() const noexcept { return c_; }

    // Throws ValidationError on negative or non-finite coefficients.
    void validate() const;

private:
    std::size_t offset(int l, int iz, std::size_t cell) const {
        return (static_cast<std::size_t>(l) * (evo_.steps() + 1) + iz) * grid_.cell_count() + cell;
    }

    SpatialGrid grid_;
    EvolutionGrid evo_;
    int order_ = 0;
    std::vector<double> c_;
};

double sigma_a_eval(const AbsorptionModel& model, int iz, std::size_t cell, double m);
double sigma_a_prime(const AbsorptionModel& model, int iz, std::size_t cell, double m);

struct TransportProblem {
    SpatialGrid grid;
    EvolutionGrid evolution;
    AngularQuadrature quadrature;
    PhaseFunction phase;
    double sigma_s = 1.0;
    AbsorptionModel absorption;
    std::vector<double> initial;  // f per cell, isotropic in angle
    double epsilon = 1.0;

    void validate() const;
    double initial_sup() const;
};

enum class Nonlinearity { lagged, per_step_picard };

struct SolverOptions {
    double tol_picard = 1e-10;
    int max_picard = 200;
    double tol_source = 1e-12;
    int max_source = 10000;
    Nonlinearity nonlinearity = Nonlinearity::per_step_picard;
    // Keep every z-level of the phase-space field; otherwise only the last.
    bool keep_history = true;
};

struct SolveStats {
    long long source_iterations = 0;
    int max_source_iterations = 0;
    int picard_iterations = 0;
    int max_inner_picard = 0;
    std::vector<double> picard_trace;
};

struct TransportSolution {
    std::vector<PhaseSpaceField> history;  // levels 0..nz when kept
    PhaseSpaceField final;
    DensityField density;                  // <W> at every level
    SolveStats stats;
};

struct ConditionReport {
    bool pass = false;
    // Condition (i): one entry per order k = 1..L (bound_k - f_sup).
    // Condition (ii): single entry, min over (z, x) of rhs - lhs.
    std::vector<double> margins;
    std::vector<double> bounds;
};

ConditionReport check_condition_i(const AbsorptionModel& model, double nu, double f_sup);
ConditionReport check_condition_ii(const AbsorptionModel& model, const PhaseFunction& p,
                                   double sigma_s, double nu, double f_sup, double epsilon);

// Linear transport with a prescribed absorption field sigma(z, x) (level
// n + 1 is used for the step n -> n + 1).
TransportSolution solve_linear_with_absorption(const TransportProblem& problem,
                                               const DensityField& sigma,
                                               const SolverOptions& options = {});

// The map m -> phi with absorption Sigma_a(m) frozen.
TransportSolution solve_linear_frozen(const TransportProblem& problem, const DensityField& m,
                                      const SolverOptions& options = {});

DensityField apply_F(const TransportProblem& problem, const DensityField& m,
                     const SolverOptions& options = {});

struct PicardResult {
    TransportSolution solution;
    DensityField fixed_point;
    std::vector<double> trace;  // relative L-inf change per F application
    std::vector<double> ratios; // trace[n + 1] / trace[n]
};

PicardResult picard_fixed_point(const TransportProblem& problem, const SolverOptions& options = {});

// One backward-Euler step prev -> next with absorption sigma_a per cell at the
// new level; `next` holds the initial guess. Returns the source iterations.
int transport_step(const TransportProblem& problem, const PhaseSpaceField& prev, std::span<const double> sigma_a,
                   PhaseSpaceField& next, const SolverOptions& options = {});

TransportSolution solve_semilinear_march(const TransportProblem& problem,
                                         const SolverOptions& options = {});

// Per cell: sum_j w_j (1/eps) k_j . grad_h W_j with the solver's upwind
// differences and zero inflow.
std::vector<double> streaming_balance(const TransportProblem& problem, const PhaseSpaceField& w);

// dW/dz = -(sum_l c_l (nu W)^l) W, W(0) = f0.
double homogeneous_ode_oracle(std::span<const double> coefficients, double nu, double f0, double z);

}  // namespace nlrte
