#include "nlrte/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "nlrte/error.hpp"
#include "nlrte/log.hpp"

namespace nlrte {

// ---------------------------------------------------------------------------
// Absorption model

AbsorptionModel::AbsorptionModel(const SpatialGrid& grid, const EvolutionGrid& evolution, int order)
    : grid_(grid), evo_(evolution), order_(order) {
    if (order < 0) throw ValidationError("absorption order must be >= 0");
    c_.assign(static_cast<std::size_t>(order + 1) * (evolution.steps() + 1) * grid.cell_count(), 0.0);
}

AbsorptionModel AbsorptionModel::constant(const SpatialGrid& grid, const EvolutionGrid& evolution,
                                          std::vector<double> coefficients) {
    if (coefficients.empty()) throw ValidationError("absorption model needs at least one coefficient");
    AbsorptionModel m(grid, evolution, static_cast<int>(coefficients.size()) - 1);
    const std::size_t block = (evolution.steps() + 1) * grid.cell_count();
    for (std::size_t l = 0; l < coefficients.size(); ++l)
        std::fill_n(m.c_.begin() + l * block, block, coefficients[l]);
    m.validate();
    return m;
}

AbsorptionModel AbsorptionModel::from_function(
    const SpatialGrid& grid, const EvolutionGrid& evolution, int order,
    const std::function<double(int, double, double, double)>& coefficient) {
    AbsorptionModel m(grid, evolution, order);
    const int ny = grid.dimension() == 2 ? grid.cells(1) : 1;
    for (int l = 0; l <= order; ++l)
        for (int iz = 0; iz <= evolution.steps(); ++iz)
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < grid.cells(0); ++ix) {
                    const double y = grid.dimension() == 2 ? grid.center(1, iy) : 0.0;
                    m.coefficient(l, iz, grid.index(ix, iy)) =
                        coefficient(l, evolution.level(iz), grid.center(0, ix), y);
                }
    m.validate();
    return m;
}

void AbsorptionModel::validate() const {
    for (double v : c_)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ValidationError("absorption coefficients must be finite and non-negative");
}

double sigma_a_eval(const AbsorptionModel& model, int iz, std::size_t cell, double m) {
    if (!(m >= 0.0)) throw ValidationError("sigma_a_eval: negative density argument " + std::to_string(m));
    double acc = 0.0;
    for (int l = model.order(); l >= 0; --l) acc = acc * m + model.coefficient(l, iz, cell);
    return acc;
}

double sigma_a_prime(const AbsorptionModel& model, int iz, std::size_t cell, double m) {
    if (!(m >= 0.0)) throw ValidationError("sigma_a_prime: negative density argument " + std::to_string(m));
    double acc = 0.0;
    for (int l = model.order(); l >= 1; --l) acc = acc * m + l * model.coefficient(l, iz, cell);
    return acc;
}

// ---------------------------------------------------------------------------
// Problem

void TransportProblem::validate() const {
    if (quadrature.size() == 0) throw ValidationError("transport problem has no quadrature");
    if (quadrature.dimension() != grid.dimension())
        throw ValidationError("quadrature dimension " + std::to_string(quadrature.dimension()) +
                              " does not match spatial dimension " + std::to_string(grid.dimension()));
    if (phase.size() != quadrature.size()) throw ValidationError("phase function does not match quadrature");
    if (!(sigma_s > 0.0) || !std::isfinite(sigma_s)) throw ValidationError("scattering coefficient must be positive");
    if (!(epsilon > 0.0) || epsilon > 1.0) throw ValidationError("epsilon must lie in (0, 1]");
    if (!(absorption.grid() == grid) || !(absorption.evolution() == evolution))
        throw ValidationError("absorption model is sampled on a different grid");
    absorption.validate();
    if (initial.size() != grid.cell_count())
        throw ValidationError("initial condition has " + std::to_string(initial.size()) + " cells, grid has " +
                              std::to_string(grid.cell_count()));
    for (double v : initial)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ValidationError("initial condition must be finite and non-negative");
}

double TransportProblem::initial_sup() const { return max_abs(initial); }

// ---------------------------------------------------------------------------
// Condition checks

ConditionReport check_condition_i(const AbsorptionModel& model, double nu, double f_sup) {
    ConditionReport r;
    r.pass = true;
    const std::size_t cells = model.grid().cell_count();
    for (int k = 1; k <= model.order(); ++k) {
        double bound = std::numeric_limits<double>::infinity();
        for (int iz = 0; iz <= model.evolution().steps(); ++iz)
            for (std::size_t c = 0; c < cells; ++c) {
                const double hi = model.coefficient(k, iz, c);
                if (hi == 0.0) continue;  // order k inactive here: no constraint
                bound = std::min(bound, model.coefficient(k - 1, iz, c) / (k * hi));
            }
        bound /= nu;
        r.bounds.push_back(bound);
        r.margins.push_back(bound - f_sup);
        if (!(f_sup <= bound)) r.pass = false;
    }
    return r;
}

ConditionReport check_condition_ii(const AbsorptionModel& model, const PhaseFunction& p, double sigma_s,
                                   double nu, double f_sup, double epsilon) {
    ConditionReport r;
    const double rhs = 2.0 * sigma_s * p.theta_lower() / (epsilon * epsilon);
    double margin = std::numeric_limits<double>::infinity();
    double worst_lhs = 0.0;
    for (int iz = 0; iz <= model.evolution().steps(); ++iz)
        for (std::size_t c = 0; c < model.grid().cell_count(); ++c) {
            const double lhs = nu * sigma_a_prime(model, iz, c, f_sup) * f_sup;
            worst_lhs = std::max(worst_lhs, lhs);
            margin = std::min(margin, rhs - lhs);
        }
    r.margins.push_back(margin);
    r.bounds.push_back(rhs);
    r.pass = margin >= 0.0;
    (void)worst_lhs;
    return r;
}

// ---------------------------------------------------------------------------
// Backward-Euler step with upwind sweeps and source iteration

namespace {

class Sweeper {
public:
    explicit Sweeper(const TransportProblem& pb) : pb_(pb) {
        const auto& g = pb.grid;
        const int nk = pb.quadrature.size();
        ax_.resize(nk);
        ay_.resize(nk);
        for (int j = 0; j < nk; ++j) {
            const auto& k = pb.quadrature.direction(j);
            ax_[j] = std::abs(k[0]) / (pb.epsilon * g.width(0));
            ay_[j] = g.dimension() == 2 ? std::abs(k[1]) / (pb.epsilon * g.width(1)) : 0.0;
        }
        scat_ = pb.sigma_s / (pb.epsilon * pb.epsilon);
        // Weighted kernel rows: (K u)_j = sum_l kw(j, l) u_l.
        kw_.resize(nk, nk);
        for (int j = 0; j < nk; ++j)
            for (int l = 0; l < nk; ++l) kw_(j, l) = pb.phase(j, l) * pb.quadrature.weight(l);
        isotropic_ = pb.phase.family() == PhaseFunction::Family::isotropic;
    }

    // Advances prev -> next over one z-step. `next` holds the initial guess.
    // Returns the number of source iterations.
    int step(const PhaseSpaceField& prev, std::span<const double> sigma_a, PhaseSpaceField& next, double tol,
             int max_iter) const {
        const std::size_t cells = pb_.grid.cell_count();
        const int nk = pb_.quadrature.size();
        const double inv_dz = 1.0 / pb_.evolution.step();
        std::vector<double> source(cells * nk);
        std::vector<double> trace;
        for (int it = 1; it <= max_iter; ++it) {
            scattering_source(next, source);
            double change = 0.0;
            double scale = 0.0;
            const int workers = worker_count();
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1 && cells * nk > 4096) \
    reduction(max : change, scale)
            for (int j = 0; j < nk; ++j) {
                const auto [dc, ds] = sweep(j, prev, sigma_a, source, inv_dz, next);
                change = std::max(change, dc);
                scale = std::max(scale, ds);
            }
            const double rel = scale > 0.0 ? change / scale : change;
            trace.push_back(rel);
            if (rel <= tol) return it;
        }
        double rho = 0.0;
        if (trace.size() >= 2 && trace[trace.size() - 2] > 0.0) rho = trace.back() / trace[trace.size() - 2];
        const std::string msg = "source iteration did not converge in " + std::to_string(max_iter) +
                                " iterations (last change " + std::to_string(trace.back()) +
                                ", spectral radius estimate " + std::to_string(rho) + ")";
        throw ConvergenceError(msg, std::move(trace));
    }

    // Upwind streaming term per cell and direction, angularly integrated.
    std::vector<double> streaming(const PhaseSpaceField& w) const {
        const auto& g = pb_.grid;
        const int nx = g.cells(0);
        const int ny = g.dimension() == 2 ? g.cells(1) : 1;
        const int nk = pb_.quadrature.size();
        std::vector<double> out(g.cell_count(), 0.0);
        for (int j = 0; j < nk; ++j) {
            const auto& k = pb_.quadrature.direction(j);
            const int sx = k[0] >= 0.0 ? -1 : 1;  // offset to the upwind neighbour
            const int sy = k[1] >= 0.0 ? -1 : 1;
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    const std::size_t c = g.index(ix, iy);
                    const double here = w(c, j);
                    const int ux = ix + sx;
                    const double upx = (ux >= 0 && ux < nx) ? w(g.index(ux, iy), j) : 0.0;
                    double term = ax_[j] * (here - upx);
                    if (g.dimension() == 2) {
                        const int uy = iy + sy;
                        const double upy = (uy >= 0 && uy < ny) ? w(g.index(ix, uy), j) : 0.0;
                        term += ay_[j] * (here - upy);
                    }
                    out[c] += pb_.quadrature.weight(j) * term;
                }
        }
        return out;
    }

private:
    void scattering_source(const PhaseSpaceField& w, std::vector<double>& source) const {
        const std::size_t cells = pb_.grid.cell_count();
        const int nk = pb_.quadrature.size();
        if (isotropic_) {
            const double inv_nu = 1.0 / pb_.quadrature.measure();
            for (std::size_t c = 0; c < cells; ++c) {
                const auto row = w.cell(c);
                double mean = 0.0;
                for (int l = 0; l < nk; ++l) mean += pb_.quadrature.weight(l) * row[l];
                std::fill_n(source.begin() + c * nk, nk, scat_ * mean * inv_nu);
            }
            return;
        }
        for (std::size_t c = 0; c < cells; ++c) {
            const auto row = w.cell(c);
            for (int j = 0; j < nk; ++j) {
                double s = 0.0;
                for (int l = 0; l < nk; ++l) s += kw_(j, l) * row[l];
                source[c * nk + j] = scat_ * s;
            }
        }
    }

    // Sweeps direction j in upwind order; returns (max change, max value).
    std::pair<double, double> sweep(int j, const PhaseSpaceField& prev, std::span<const double> sigma_a,
                                    const std::vector<double>& source, double inv_dz, PhaseSpaceField& next) const {
        const auto& g = pb_.grid;
        const int nx = g.cells(0);
        const int ny = g.dimension() == 2 ? g.cells(1) : 1;
        const int nk = pb_.quadrature.size();
        const auto& k = pb_.quadrature.direction(j);
        const bool fwd_x = k[0] >= 0.0;
        const bool fwd_y = k[1] >= 0.0;
        const double ax = ax_[j];
        const double ay = ay_[j];
        double change = 0.0;
        double scale = 0.0;
        for (int sy = 0; sy < ny; ++sy) {
            const int iy = fwd_y ? sy : ny - 1 - sy;
            const int up_y = fwd_y ? iy - 1 : iy + 1;
            for (int sx = 0; sx < nx; ++sx) {
                const int ix = fwd_x ? sx : nx - 1 - sx;
                const int up_x = fwd_x ? ix - 1 : ix + 1;
                const std::size_t c = g.index(ix, iy);
                double rhs = prev(c, j) * inv_dz + source[c * nk + j];
                if (up_x >= 0 && up_x < nx) rhs += ax * next(g.index(up_x, iy), j);
                double diag = inv_dz + sigma_a[c] + scat_ + ax;
                if (ny > 1) {
                    if (up_y >= 0 && up_y < ny) rhs += ay * next(g.index(ix, up_y), j);
                    diag += ay;
                }
                const double v = rhs / diag;
                change = std::max(change, std::abs(v - next(c, j)));
                scale = std::max(scale, std::abs(v));
                next(c, j) = v;
            }
        }
        return {change, scale};
    }

    const TransportProblem& pb_;
    std::vector<double> ax_, ay_;
    Eigen::MatrixXd kw_;
    double scat_ = 0.0;
    bool isotropic_ = false;
};

PhaseSpaceField initial_field(const TransportProblem& pb) {
    PhaseSpaceField f(pb.grid, pb.quadrature.size());
    for (std::size_t c = 0; c < pb.grid.cell_count(); ++c)
        std::fill(f.cell(c).begin(), f.cell(c).end(), pb.initial[c]);
    return f;
}

void store_level(TransportSolution& sol, int iz, const PhaseSpaceField& w, const AngularQuadrature& quad,
                 bool keep) {
    const auto mean = angular_mean_field(w, quad);
    std::copy(mean.begin(), mean.end(), sol.density.level(iz).begin());
    if (keep) sol.history.push_back(w);
}

double relative_change(std::span<const double> next, std::span<const double> prev) {
    const double scale = max_abs(next);
    const double diff = max_abs_diff(next, prev);
    return scale > 0.0 ? diff / scale : diff;
}

void warn_if_ill_posed(const TransportProblem& pb) {
    const double f_sup = pb.initial_sup();
    const double nu = pb.quadrature.measure();
    const bool ok_i = check_condition_i(pb.absorption, nu, f_sup).pass;
    const bool ok_ii = check_condition_ii(pb.absorption, pb.phase, pb.sigma_s, nu, f_sup, pb.epsilon).pass;
    if (!ok_i && !ok_ii)
        warn("neither well-posedness condition holds for ||f|| = " + std::to_string(f_sup) +
             "; uniqueness of the fixed point is not guaranteed");
    if (!pb.initial.empty() && *std::min_element(pb.initial.begin(), pb.initial.end()) == 0.0)
        warn("initial condition vanishes somewhere; uniqueness assumes f > 0");
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear solves

TransportSolution solve_linear_with_absorption(const TransportProblem& problem, const DensityField& sigma,
                                               const SolverOptions& options) {
    problem.validate();
    if (!(sigma.grid() == problem.grid) || !(sigma.evolution() == problem.evolution))
        throw ValidationError("absorption field is sampled on a different grid");
    for (double v : sigma.values())
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("absorption field must be finite and >= 0");

    const Sweeper sweeper(problem);
    TransportSolution sol;
    sol.density = DensityField(problem.grid, problem.evolution);
    PhaseSpaceField current = initial_field(problem);
    store_level(sol, 0, current, problem.quadrature, options.keep_history);

    for (int n = 0; n < problem.evolution.steps(); ++n) {
        PhaseSpaceField next = current;
        const int its = sweeper.step(current, sigma.level(n + 1), next, options.tol_source, options.max_source);
        sol.stats.source_iterations += its;
        sol.stats.max_source_iterations = std::max(sol.stats.max_source_iterations, its);
        current = std::move(next);
        store_level(sol, n + 1, current, problem.quadrature, options.keep_history);
    }
    sol.final = std::move(current);
    return sol;
}

TransportSolution solve_linear_frozen(const TransportProblem& problem, const DensityField& m,
                                      const SolverOptions& options) {
    if (!(m.grid() == problem.grid) || !(m.evolution() == problem.evolution))
        throw ValidationError("density field is sampled on a different grid");
    DensityField sigma(problem.grid, problem.evolution);
    for (int iz = 0; iz < m.levels(); ++iz)
        for (std::size_t c = 0; c < m.cell_count(); ++c) {
            const double v = m(iz, c);
            if (!(v >= 0.0)) throw ValidationError("frozen density must be non-negative");
            sigma(iz, c) = sigma_a_eval(problem.absorption, iz, c, v);
        }
    return solve_linear_with_absorption(problem, sigma, options);
}

DensityField apply_F(const TransportProblem& problem, const DensityField& m, const SolverOptions& options) {
    SolverOptions lean = options;
    lean.keep_history = false;
    return solve_linear_frozen(problem, m, lean).density;
}

PicardResult picard_fixed_point(const TransportProblem& problem, const SolverOptions& options) {
    problem.validate();
    warn_if_ill_posed(problem);

    DensityField m(problem.grid, problem.evolution);
    const double nu = problem.quadrature.measure();
    for (int iz = 0; iz < m.levels(); ++iz)
        for (std::size_t c = 0; c < m.cell_count(); ++c) m(iz, c) = nu * problem.initial[c];

    PicardResult result;
    for (int it = 1; it <= options.max_picard; ++it) {
        TransportSolution sol = solve_linear_frozen(problem, m, options);
        const double r = relative_change(sol.density.values(), m.values());
        result.trace.push_back(r);
        if (result.trace.size() >= 2 && result.trace[result.trace.size() - 2] > 0.0)
            result.ratios.push_back(r / result.trace[result.trace.size() - 2]);
        m = sol.density;
        if (r <= options.tol_picard) {
            sol.stats.picard_iterations = it;
            sol.stats.picard_trace = result.trace;
            result.solution = std::move(sol);
            result.fixed_point = std::move(m);
            return result;
        }
    }
    throw ConvergenceError("Picard iteration did not converge in " + std::to_string(options.max_picard) +
                               " iterations (last residual " + std::to_string(result.trace.back()) + ")",
                           result.trace);
}

TransportSolution solve_semilinear_march(const TransportProblem& problem, const SolverOptions& options) {
    problem.validate();
    warn_if_ill_posed(problem);

    const Sweeper sweeper(problem);
    const std::size_t cells = problem.grid.cell_count();
    TransportSolution sol;
    sol.density = DensityField(problem.grid, problem.evolution);
    PhaseSpaceField current = initial_field(problem);
    store_level(sol, 0, current, problem.quadrature, options.keep_history);

    std::vector<double> m(cells), sigma(cells);
    for (int n = 0; n < problem.evolution.steps(); ++n) {
        const auto prev_density = sol.density.level(n);
        std::copy(prev_density.begin(), prev_density.end(), m.begin());
        PhaseSpaceField next = current;
        std::vector<double> inner_trace;
        const int max_inner = options.nonlinearity == Nonlinearity::lagged ? 1 : options.max_picard;
        bool converged = false;
        for (int k = 1; k <= max_inner; ++k) {
            for (std::size_t c = 0; c < cells; ++c) sigma[c] = sigma_a_eval(problem.absorption, n + 1, c, m[c]);
            const int its = sweeper.step(current, sigma, next, options.tol_source, options.max_source);
            sol.stats.source_iterations += its;
            sol.stats.max_source_iterations = std::max(sol.stats.max_source_iterations, its);
            auto updated = angular_mean_field(next, problem.quadrature);
            const double r = relative_change(updated, m);
            inner_trace.push_back(r);
            m = std::move(updated);
            sol.stats.max_inner_picard = std::max(sol.stats.max_inner_picard, k);
            if (options.nonlinearity == Nonlinearity::lagged || r <= options.tol_picard) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("inner Picard loop did not converge at step " + std::to_string(n + 1) +
                                       " (last residual " + std::to_string(inner_trace.back()) + ")",
                                   inner_trace);
        current = std::move(next);
        store_level(sol, n + 1, current, problem.quadrature, options.keep_history);
    }
    sol.final = std::move(current);
    return sol;
}

int transport_step(const TransportProblem& problem, const PhaseSpaceField& prev, std::span<const double> sigma_a,
                   PhaseSpaceField& next, const SolverOptions& options) {
    if (sigma_a.size() != problem.grid.cell_count() || !(prev.grid() == problem.grid) ||
        !(next.grid() == problem.grid) || prev.directions() != problem.quadrature.size() ||
        next.directions() != problem.quadrature.size())
        throw ValidationError("transport_step: fields do not match problem");
    return Sweeper(problem).step(prev, sigma_a, next, options.tol_source, options.max_source);
}

std::vector<double> streaming_balance(const TransportProblem& problem, const PhaseSpaceField& w) {
    if (w.directions() != problem.quadrature.size() || !(w.grid() == problem.grid))
        throw ValidationError("streaming_balance: field does not match problem");
    return Sweeper(problem).streaming(w);
}

// ---------------------------------------------------------------------------
// Space-homogeneous oracle

double homogeneous_ode_oracle(std::span<const double> coefficients, double nu, double f0, double z) {
    if (coefficients.empty()) throw ValidationError("oracle needs at least one coefficient");
    if (z == 0.0) return f0;
    const std::size_t order = coefficients.size() - 1;
    const double c0 = coefficients[0];
    if (order == 0) return f0 * std::exp(-c0 * z);
    if (order == 1) {
        const double c1 = coefficients[1] * nu;
        if (c0 == 0.0) return f0 / (1.0 + c1 * f0 * z);
        const double decay = std::exp(-c0 * z);
        return c0 * f0 * decay / (c0 + c1 * f0 * (1.0 - decay));
    }
    using State = std::array<double, 1>;
    auto rhs = [&](const State& w, State& dw, double) {
        double acc = 0.0;
        const double m = nu * w[0];
        for (std::size_t l = coefficients.size(); l-- > 0;) acc = acc * m + coefficients[l];
        dw[0] = -acc * w[0];
    };
    State w{f0};
    namespace odeint = boost::numeric::odeint;
    auto stepper = odeint::make_controlled(1e-14, 1e-14, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_adaptive(stepper, rhs, w, 0.0, z, z / 1000.0);
    return w[0];
}

}  // namespace nlrte
