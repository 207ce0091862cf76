#pragma once

#include <cstdint>
#include <vector>

#include "nlrte/transport.hpp"

namespace nlrte {

// L + 1 experiments sharing geometry and the true absorption model, differing
// only in the initial condition.
struct ExperimentSet {
    TransportProblem base;                    // `initial` is ignored
    std::vector<std::vector<double>> sources; // f_1 < f_2 < ... pointwise
    std::vector<DensityField> data;           // g_j, filled by generate_data
    double noise = 0.0;                       // relative Gaussian noise level
    std::uint64_t seed = 0;
    bool ordered = false;                     // g_1 < g_2 < ... on the interior window

    TransportProblem experiment(std::size_t j) const;
};

// Cells excluded at each boundary when checks speak of "the interior".
inline constexpr int interior_margin = 2;

void generate_data(ExperimentSet& set, const SolverOptions& options = {});

enum class BalanceScheme {
    consistent,  // the solver's own backward difference and upwind streaming
    central      // central differences of g and of the flux J = <k u>
};

struct InverseOptions {
    BalanceScheme balance = BalanceScheme::consistent;
    // Gaussian smoothing width in cells; negative selects 1 when the data is
    // noisy and 0 otherwise.
    double smooth = -1.0;
    double tol_m = 1e-8;
    int max_iterations = 100;
    double cond_max = 1e8;
    SolverOptions solver{};
};

struct RecoveryResult {
    DensityField m;
    std::vector<double> trace;  // final relative change per level
    int iterations = 0;         // most fixed-point iterations spent on one level
    std::size_t excluded = 0;  // (level, cell) pairs with g <= 0
};

// Effective absorption m = Sigma_a(g) from one density field g and the
// initial condition in `problem`.
RecoveryResult recover_effective_absorption(const TransportProblem& problem, const DensityField& g,
                                            const InverseOptions& options = {}, double noise = 0.0);

struct VandermondeResult {
    std::vector<DensityField> coefficients;  // l = 0..L
    DensityField condition;
    std::vector<char> unreliable;  // per (level, cell)
    std::vector<char> clamped;
    std::size_t unreliable_count = 0;
    std::size_t clamped_count = 0;
};

VandermondeResult vandermonde_extract(const std::vector<DensityField>& m, const std::vector<DensityField>& g,
                                      double cond_max = 1e8);

struct ReconstructionResult {
    std::vector<DensityField> effective;
    VandermondeResult extraction;
    AbsorptionModel recovered;
    std::vector<double> residuals;  // ||<u_hat_j> - g_j||_inf
    std::vector<int> recovery_iterations;
};

ReconstructionResult reconstruct(const ExperimentSet& set, const InverseOptions& options = {});

struct InequalityReport {
    long long trials = 0;
    long long violations = 0;
    double min_slack = 0.0;  // min over trials of rhs - lhs
};

InequalityReport appendix_inequality_check(const PhaseFunction& p, const AngularQuadrature& quad, long long trials,
                                           std::uint64_t seed, int cells = 4);

double kappa(const PhaseFunction& p);
double kappa(double theta_lower, double theta_upper);

// Separable Gaussian smoothing in x (and y) and z with a width in cells.
DensityField smooth_density(const DensityField& g, double width_cells);

}  // namespace nlrte
