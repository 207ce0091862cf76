#include "nlrte/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "nlrte/error.hpp"
#include "nlrte/log.hpp"

namespace nlrte {

TransportProblem ExperimentSet::experiment(std::size_t j) const {
    TransportProblem p = base;
    p.initial = sources.at(j);
    return p;
}

namespace {

bool interior(const SpatialGrid& g, std::size_t c) {
    const int nx = g.cells(0);
    const int ix = static_cast<int>(c % nx);
    const int iy = static_cast<int>(c / nx);
    if (ix < interior_margin || ix >= nx - interior_margin) return false;
    return g.dimension() == 1 || (iy >= interior_margin && iy < g.cells(1) - interior_margin);
}

std::vector<double> gaussian_kernel(double width) {
    const int r = static_cast<int>(std::ceil(3.0 * width));
    std::vector<double> k(2 * r + 1);
    double s = 0.0;
    for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-0.5 * i * i / (width * width));
    for (double& v : k) v /= s;
    return k;
}

// Convolves along one axis of a (levels x ny x nx) block, renormalizing the
// kernel where it is cut by the boundary.
void smooth_axis(std::vector<double>& v, const std::vector<double>& k, int n, std::size_t stride, std::size_t count,
                 std::size_t block) {
    const int r = static_cast<int>(k.size() / 2);
    std::vector<double> line(n), out(n);
    for (std::size_t b = 0; b < count; ++b) {
        const std::size_t start = (b / stride) * block + (b % stride);
        for (int i = 0; i < n; ++i) line[i] = v[start + i * stride];
        for (int i = 0; i < n; ++i) {
            double acc = 0.0, wsum = 0.0;
            for (int t = -r; t <= r; ++t) {
                const int j = i + t;
                if (j < 0 || j >= n) continue;
                acc += k[t + r] * line[j];
                wsum += k[t + r];
            }
            out[i] = acc / wsum;
        }
        for (int i = 0; i < n; ++i) v[start + i * stride] = out[i];
    }
}

}  // namespace

DensityField smooth_density(const DensityField& g, double width) {
    if (!(width > 0.0)) return g;
    DensityField s = g;
    const auto k = gaussian_kernel(width);
    const auto& grid = g.grid();
    const int nx = grid.cells(0);
    const int ny = grid.dimension() == 2 ? grid.cells(1) : 1;
    const int levels = g.levels();
    const std::size_t cells = grid.cell_count();
    auto& v = s.values();
    // x: lines of length nx with unit stride; one per (level, iy).
    smooth_axis(v, k, nx, 1, static_cast<std::size_t>(levels) * ny, nx);
    if (ny > 1) smooth_axis(v, k, ny, nx, static_cast<std::size_t>(levels) * nx, cells);
    // z: stride = cells, one line per cell.
    smooth_axis(v, k, levels, cells, cells, 0);
    return s;
}

void generate_data(ExperimentSet& set, const SolverOptions& options) {
    if (set.sources.size() < 1) throw ValidationError("experiment set has no sources");
    const std::size_t cells = set.base.grid.cell_count();
    for (std::size_t j = 0; j < set.sources.size(); ++j) {
        const auto& f = set.sources[j];
        if (f.size() != cells) throw ValidationError("source " + std::to_string(j) + " does not match the grid");
        for (double v : f)
            if (!(v > 0.0)) throw ValidationError("sources must be strictly positive");
        if (j > 0)
            for (std::size_t c = 0; c < cells; ++c)
                if (!(f[c] > set.sources[j - 1][c]))
                    throw ValidationError("sources are not strictly ordered at cell " + std::to_string(c) +
                                          " (f_" + std::to_string(j) + " >= f_" + std::to_string(j + 1) + ")");
    }
    if (!(set.noise >= 0.0)) throw ValidationError("noise level must be >= 0");
    const double nu = set.base.quadrature.measure();
    for (std::size_t j = 0; j < set.sources.size(); ++j) {
        const auto p = set.experiment(j);
        const double f_sup = p.initial_sup();
        if (!check_condition_i(p.absorption, nu, f_sup).pass &&
            !check_condition_ii(p.absorption, p.phase, p.sigma_s, nu, f_sup, p.epsilon).pass)
            warn("experiment " + std::to_string(j + 1) + " satisfies neither well-posedness condition");
    }

    set.data.assign(set.sources.size(), DensityField{});
    std::vector<std::exception_ptr> errors(set.sources.size());
    const int workers = std::min<int>(worker_count(), static_cast<int>(set.sources.size()));
    SolverOptions opt = options;
    opt.keep_history = false;
#pragma omp parallel for num_threads(workers) if (workers > 1)
    for (int j = 0; j < static_cast<int>(set.sources.size()); ++j) {
        try {
            set.data[j] = solve_semilinear_march(set.experiment(j), opt).density;
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    set.ordered = true;
    for (std::size_t j = 1; j < set.data.size(); ++j)
        for (int iz = 0; iz < set.data[j].levels(); ++iz)
            for (std::size_t c = 0; c < cells; ++c)
                if (interior(set.base.grid, c) && !(set.data[j](iz, c) > set.data[j - 1](iz, c))) set.ordered = false;
    if (!set.ordered) warn("generated densities are not strictly ordered on the interior");

    if (set.noise > 0.0) {
        for (std::size_t j = 0; j < set.data.size(); ++j) {
            std::mt19937_64 rng(set.seed + 0x9e3779b97f4a7c15ULL * (j + 1));
            std::normal_distribution<double> n01;
            for (double& v : set.data[j].values()) v *= 1.0 + set.noise * n01(rng);
        }
    }
}

RecoveryResult recover_effective_absorption(const TransportProblem& problem, const DensityField& g_in,
                                            const InverseOptions& options, double noise) {
    problem.validate();
    if (!(g_in.grid() == problem.grid) || !(g_in.evolution() == problem.evolution))
        throw ValidationError("density data is sampled on a different grid");
    const double width = options.smooth >= 0.0 ? options.smooth : (noise > 0.0 ? 1.0 : 0.0);
    const DensityField g = smooth_density(g_in, width);

    const auto& grid = problem.grid;
    const auto& quad = problem.quadrature;
    const std::size_t cells = grid.cell_count();
    const int nz = problem.evolution.steps();
    const double dz = problem.evolution.step();

    RecoveryResult res;
    for (int iz = 1; iz <= nz; ++iz)
        for (std::size_t c = 0; c < cells; ++c)
            if (!(g(iz, c) > 0.0)) ++res.excluded;
    if (res.excluded > 0)
        warn("recovery: " + std::to_string(res.excluded) + " (level, cell) pairs with g <= 0 excluded");

    // z-derivative of g, shared by every iteration.
    DensityField dg(grid, problem.evolution);
    for (int iz = 1; iz <= nz; ++iz)
        for (std::size_t c = 0; c < cells; ++c) {
            if (options.balance == BalanceScheme::consistent || iz == nz)
                dg(iz, c) = (g(iz, c) - g(iz - 1, c)) / dz;
            else
                dg(iz, c) = (g(iz + 1, c) - g(iz - 1, c)) / (2.0 * dz);
        }

    const int nx = grid.cells(0);
    const int ny = grid.dimension() == 2 ? grid.cells(1) : 1;
    // Net streaming per cell: the solver's upwind balance, or central
    // differences of the flux J = <k u> / eps.
    auto divergence = [&](const PhaseSpaceField& u) {
        if (options.balance == BalanceScheme::consistent) return streaming_balance(problem, u);
        std::vector<double> div(cells, 0.0);
        for (int axis = 0; axis < grid.dimension(); ++axis) {
            std::vector<double> J(cells, 0.0);
            for (std::size_t c = 0; c < cells; ++c)
                for (int j = 0; j < quad.size(); ++j)
                    J[c] += quad.weight(j) * quad.direction(j)[axis] * u(c, j) / problem.epsilon;
            const double h = grid.width(axis);
            const int n = axis == 0 ? nx : ny;
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    const int i = axis == 0 ? ix : iy;
                    auto at = [&](int k) { return axis == 0 ? grid.index(k, iy) : grid.index(ix, k); };
                    const std::size_t c = grid.index(ix, iy);
                    if (i == 0)
                        div[c] += (J[at(1)] - J[c]) / h;
                    else if (i == n - 1)
                        div[c] += (J[c] - J[at(n - 2)]) / h;
                    else
                        div[c] += (J[at(i + 1)] - J[at(i - 1)]) / (2.0 * h);
                }
        }
        return div;
    };

    // u at level n + 1 depends on m at levels <= n + 1 only, so the fixed
    // point is resolved one level at a time.
    DensityField m(grid, problem.evolution);
    PhaseSpaceField current(grid, quad.size());
    for (std::size_t c = 0; c < cells; ++c) std::fill(current.cell(c).begin(), current.cell(c).end(), problem.initial[c]);
    std::vector<double> level(cells, 0.0), next_m(cells);
    for (int iz = 1; iz <= nz; ++iz) {
        PhaseSpaceField next = current;
        bool converged = false;
        double r = 0.0;
        for (int it = 1; it <= options.max_iterations; ++it) {
            transport_step(problem, current, level, next, options.solver);
            const auto div = divergence(next);
            for (std::size_t c = 0; c < cells; ++c) {
                const double gv = g(iz, c);
                next_m[c] = gv > 0.0 ? std::max(0.0, -(dg(iz, c) + div[c]) / gv) : 0.0;
            }
            const double scale = max_abs(next_m);
            const double change = max_abs_diff(next_m, level);
            r = scale > 0.0 ? change / scale : change;
            level.swap(next_m);
            res.iterations = std::max(res.iterations, it);
            if (r <= options.tol_m) {
                converged = true;
                break;
            }
        }
        res.trace.push_back(r);
        if (!converged)
            throw ConvergenceError("effective absorption recovery did not converge at level " + std::to_string(iz) +
                                       " in " + std::to_string(options.max_iterations) + " iterations",
                                   res.trace);
        // Re-solve with the converged level so the carried state matches m.
        transport_step(problem, current, level, next, options.solver);
        std::copy(level.begin(), level.end(), m.level(iz).begin());
        current = std::move(next);
    }
    std::copy(m.level(1).begin(), m.level(1).end(), m.level(0).begin());
    res.m = std::move(m);
    return res;
}

VandermondeResult vandermonde_extract(const std::vector<DensityField>& m, const std::vector<DensityField>& g,
                                      double cond_max) {
    if (m.empty() || m.size() != g.size()) throw ValidationError("vandermonde_extract needs matching m and g lists");
    const auto& grid = m[0].grid();
    const auto& evo = m[0].evolution();
    for (std::size_t j = 0; j < m.size(); ++j)
        if (!(m[j].grid() == grid) || !(g[j].grid() == grid) || m[j].levels() != m[0].levels() ||
            g[j].levels() != m[0].levels())
            throw ValidationError("vandermonde_extract: fields live on different grids");

    const int n = static_cast<int>(m.size());
    const std::size_t cells = grid.cell_count();
    const int levels = m[0].levels();
    VandermondeResult r;
    r.coefficients.assign(n, DensityField(grid, evo));
    r.condition = DensityField(grid, evo);
    r.unreliable.assign(static_cast<std::size_t>(levels) * cells, 0);
    r.clamped.assign(r.unreliable.size(), 0);

    Eigen::MatrixXd V(n, n);
    Eigen::VectorXd rhs(n);
    for (int iz = 0; iz < levels; ++iz)
        for (std::size_t c = 0; c < cells; ++c) {
            const std::size_t idx = iz * cells + c;
            for (int j = 0; j < n; ++j) {
                double p = 1.0;
                for (int l = 0; l < n; ++l) {
                    V(j, l) = p;
                    p *= g[j](iz, c);
                }
                rhs(j) = m[j](iz, c);
            }
            double cond = 1.0;
            if (n > 1) {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
                const auto& s = svd.singularValues();
                cond = s(n - 1) > 0.0 ? s(0) / s(n - 1) : std::numeric_limits<double>::infinity();
            }
            r.condition(iz, c) = cond;
            if (!(cond <= cond_max)) {
                r.unreliable[idx] = 1;
                ++r.unreliable_count;
                continue;
            }
            const Eigen::VectorXd x = n > 1 ? Eigen::VectorXd(V.fullPivLu().solve(rhs)) : rhs;
            for (int l = 0; l < n; ++l) {
                double v = x(l);
                if (v < 0.0) {
                    v = 0.0;
                    r.clamped[idx] = 1;
                }
                r.coefficients[l](iz, c) = v;
            }
            if (r.clamped[idx]) ++r.clamped_count;
        }

    // Unreliable cells take the mean of reliable neighbours on the same level,
    // falling back to the nearest reliable cell along x.
    if (r.unreliable_count > 0) {
        const int nx = grid.cells(0);
        const int ny = grid.dimension() == 2 ? grid.cells(1) : 1;
        for (int iz = 0; iz < levels; ++iz)
            for (std::size_t c = 0; c < cells; ++c) {
                if (!r.unreliable[iz * cells + c]) continue;
                const int ix = static_cast<int>(c % nx);
                const int iy = static_cast<int>(c / nx);
                std::vector<std::size_t> donors;
                const int off[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
                for (const auto& o : off) {
                    const int jx = ix + o[0];
                    const int jy = iy + o[1];
                    if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) continue;
                    const std::size_t d = grid.index(jx, jy);
                    if (!r.unreliable[iz * cells + d]) donors.push_back(d);
                }
                for (int dist = 2; donors.empty() && dist < nx; ++dist)
                    for (int s : {-dist, dist}) {
                        const int jx = ix + s;
                        if (jx >= 0 && jx < nx && !r.unreliable[iz * cells + grid.index(jx, iy)])
                            donors.push_back(grid.index(jx, iy));
                    }
                for (int l = 0; l < n; ++l) {
                    double acc = 0.0;
                    for (auto d : donors) acc += r.coefficients[l](iz, d);
                    r.coefficients[l](iz, c) = donors.empty() ? 0.0 : acc / donors.size();
                }
            }
    }
    return r;
}

ReconstructionResult reconstruct(const ExperimentSet& set, const InverseOptions& options) {
    if (set.data.size() != set.sources.size() || set.data.empty())
        throw ValidationError("experiment set has no data; run generate_data first");
    const std::size_t n = set.data.size();
    ReconstructionResult res;
    res.effective.resize(n);
    res.recovery_iterations.resize(n);
    std::vector<std::exception_ptr> errors(n);
    const int workers = std::min<int>(worker_count(), static_cast<int>(n));
#pragma omp parallel for num_threads(workers) if (workers > 1)
    for (int j = 0; j < static_cast<int>(n); ++j) {
        try {
            auto rec = recover_effective_absorption(set.experiment(j), set.data[j], options, set.noise);
            res.effective[j] = std::move(rec.m);
            res.recovery_iterations[j] = rec.iterations;
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    const double width = options.smooth >= 0.0 ? options.smooth : (set.noise > 0.0 ? 1.0 : 0.0);
    std::vector<DensityField> g;
    for (const auto& d : set.data) g.push_back(smooth_density(d, width));
    res.extraction = vandermonde_extract(res.effective, g, options.cond_max);

    const auto& grid = set.base.grid;
    const auto& evo = set.base.evolution;
    res.recovered = AbsorptionModel(grid, evo, static_cast<int>(n) - 1);
    for (int l = 0; l < static_cast<int>(n); ++l)
        for (int iz = 0; iz <= evo.steps(); ++iz)
            for (std::size_t c = 0; c < grid.cell_count(); ++c)
                res.recovered.coefficient(l, iz, c) = res.extraction.coefficients[l](iz, c);

    SolverOptions opt = options.solver;
    opt.keep_history = false;
    for (std::size_t j = 0; j < n; ++j) {
        TransportProblem p = set.experiment(j);
        p.absorption = res.recovered;
        const auto u = solve_semilinear_march(p, opt);
        res.residuals.push_back(max_abs_diff(u.density.values(), set.data[j].values()));
    }
    return res;
}

InequalityReport appendix_inequality_check(const PhaseFunction& p, const AngularQuadrature& quad, long long trials,
                                           std::uint64_t seed, int cells) {
    if (trials < 1) throw ValidationError("inequality check needs at least one trial");
    if (p.size() != quad.size()) throw ValidationError("phase function does not match quadrature");
    const int nk = quad.size();
    const double nu = quad.measure();
    const double k2 = kappa(p) * kappa(p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> upos(0.1, 2.0);
    std::normal_distribution<double> n01;

    InequalityReport rep;
    rep.trials = trials;
    rep.min_slack = std::numeric_limits<double>::infinity();
    std::vector<double> ut(nk), du(nk);
    for (long long t = 0; t < trials; ++t) {
        double lhs = 0.0, rhs = 0.0, scale = 0.0;
        for (int c = 0; c < cells; ++c) {
            double mean = 0.0;
            for (int j = 0; j < nk; ++j) {
                ut[j] = upos(rng);
                du[j] = n01(rng);
                mean += quad.weight(j) * du[j];
            }
            for (int j = 0; j < nk; ++j) du[j] -= mean / nu;
            const auto kdu = apply_scattering(p, quad, du);
            const auto kut = apply_scattering(p, quad, ut);
            for (int j = 0; j < nk; ++j) {
                const double w = quad.weight(j);
                lhs += w * kdu[j] * du[j] / ut[j];
                rhs += w * kut[j] * du[j] * du[j] / (ut[j] * ut[j]) + nu * 0.25 * k2 * w * du[j] * du[j] / ut[j];
                scale += w * kut[j] * du[j] * du[j] / (ut[j] * ut[j]);
            }
        }
        const double slack = rhs - lhs;
        rep.min_slack = std::min(rep.min_slack, slack);
        if (slack < -1e-12 * std::max(1.0, scale)) ++rep.violations;
    }
    return rep;
}

double kappa(double theta_lower, double theta_upper) {
    if (!(theta_lower > 0.0)) throw ValidationError("kappa needs theta_lower > 0");
    return (theta_upper - theta_lower) / (2.0 * std::sqrt(theta_lower));
}

double kappa(const PhaseFunction& p) { return kappa(p.theta_lower(), p.theta_upper()); }

}  // namespace nlrte
