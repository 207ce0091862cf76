#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nlrte/core.hpp"
#include "nlrte/transport.hpp"

namespace nlrte {

// Argument handed to Sigma_a in the absorption term Sigma_a(.) W_0.
enum class AbsorptionArgument { point_value, angular_mean };

// dW/dz - div((A / (nu Sigma_s)) grad W) + Sigma_a(arg) W = Q,  W = 0 on the
// boundary, W(0) = f.  A is the unnormalized-measure diffusion matrix; nu is
// the angular measure it was integrated against (nu = 1 gives A / Sigma_s).
struct DiffusionProblem {
    SpatialGrid grid;
    EvolutionGrid evolution;
    Eigen::MatrixXd A;
    double sigma_s = 1.0;
    double nu = 1.0;
    AbsorptionModel absorption;
    AbsorptionArgument argument = AbsorptionArgument::angular_mean;
    std::vector<double> initial;
    // Q(z, x, y); empty means no source.
    std::function<double(double, double, double)> source;

    void validate() const;
    // Effective diffusivity along an axis, A_ii / (nu Sigma_s).
    double diffusivity(int axis) const;
    // Value at which Sigma_a is evaluated for a point value w.
    double absorption_argument(double w) const { return argument == AbsorptionArgument::angular_mean ? nu * w : w; }
};

struct DiffusionOptions {
    double tol_picard = 1e-10;
    int max_picard = 200;
};

struct DiffusionSolution {
    DensityField w;  // W_0 at every level
    int max_inner_picard = 0;
    long long linear_solves = 0;
};

DiffusionSolution solve_semilinear_diffusion(const DiffusionProblem& problem, const DiffusionOptions& options = {});

// Same scheme with Sigma_a frozen at Sigma_a(m_freeze)(z, x).  By default
// m_freeze is the absorption argument of ||f||_inf.
DiffusionSolution linear_diffusion_reference(const DiffusionProblem& problem, const DiffusionOptions& options = {},
                                             std::optional<double> m_freeze = std::nullopt);

// Net outward diffusive flux through the Dirichlet boundary for one level,
// integrated over the boundary (consistent with the scheme's stencil).
double boundary_outflow(const DiffusionProblem& problem, std::span<const double> w);

}  // namespace nlrte
