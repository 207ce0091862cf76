#include "nlrte/limit_harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "nlrte/error.hpp"
#include "nlrte/log.hpp"

namespace nlrte {

DiffusionProblem matched_diffusion(const TransportProblem& t) {
    DiffusionProblem d;
    d.grid = t.grid;
    d.evolution = t.evolution;
    d.A = diffusion_matrix(t.phase, t.quadrature);
    d.sigma_s = t.sigma_s;
    d.nu = t.quadrature.measure();
    d.absorption = t.absorption;
    d.argument = AbsorptionArgument::angular_mean;
    d.initial = t.initial;
    return d;
}

namespace {

bool in_window(const SpatialGrid& g, std::size_t c, int margin) {
    const int nx = g.cells(0);
    const int ix = static_cast<int>(c % nx);
    const int iy = static_cast<int>(c / nx);
    if (ix < margin || ix >= nx - margin) return false;
    if (g.dimension() == 2 && (iy < margin || iy >= g.cells(1) - margin)) return false;
    return true;
}

int first_level(const EvolutionGrid& evo, double z_min) {
    int iz = static_cast<int>(std::ceil(z_min / evo.step() - 1e-9));
    return std::clamp(iz, 1, evo.steps());
}

// Max over the window of |coarse - restrict(fine)|, fine having twice the cells
// per axis and twice the steps.
double richardson_gap(const DensityField& coarse, const DensityField& fine, int margin, double z_min) {
    const auto& gc = coarse.grid();
    const auto& gf = fine.grid();
    const int nxc = gc.cells(0);
    const int two_d = gc.dimension() == 2;
    double gap = 0.0;
    for (int iz = first_level(coarse.evolution(), z_min); iz < coarse.levels(); ++iz)
        for (std::size_t c = 0; c < gc.cell_count(); ++c) {
            if (!in_window(gc, c, margin)) continue;
            const int ix = static_cast<int>(c % nxc);
            const int iy = static_cast<int>(c / nxc);
            double avg = 0.0;
            int count = 0;
            for (int dy = 0; dy <= two_d; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    avg += fine(2 * iz, gf.index(2 * ix + dx, two_d ? 2 * iy + dy : 0));
                    ++count;
                }
            gap = std::max(gap, std::abs(coarse(iz, c) - avg / count));
        }
    return gap;
}

double window_min(const DensityField& f, int margin, double z_min, double scale) {
    double lo = std::numeric_limits<double>::infinity();
    for (int iz = first_level(f.evolution(), z_min); iz < f.levels(); ++iz)
        for (std::size_t c = 0; c < f.cell_count(); ++c)
            if (in_window(f.grid(), c, margin)) lo = std::min(lo, f(iz, c) * scale);
    return lo;
}

struct Run {
    TransportProblem problem;
    DensityField transport;
    DensityField diffusion;
    double error = 0.0;
};

Run run_pair(const ConvergenceStudy& s, int nx, int nz, double eps, int margin, double z_min) {
    Run r;
    r.problem = s.factory(nx, nz, eps);
    r.problem.epsilon = eps;
    SolverOptions opt = s.options;
    opt.keep_history = false;
    r.transport = solve_semilinear_march(r.problem, opt).density;
    r.diffusion = solve_semilinear_diffusion(matched_diffusion(r.problem), s.diffusion_options).w;
    r.error = interior_error(r.problem, r.transport, r.diffusion, margin, z_min);
    return r;
}

StudyRecord study_one(const ConvergenceStudy& s, double eps, bool degenerate) {
    int nx = s.nx;
    int nz = s.nz;
    const double z_min = s.layer_factor * eps * eps;
    Run coarse = run_pair(s, nx, nz, eps, s.boundary_cells, z_min);

    StudyRecord rec;
    rec.epsilon = eps;
    Run* accepted = &coarse;
    Run fine;
    if (s.auto_refine) {
        bool ok = false;
        for (int level = 0; level < s.max_refinements; ++level) {
            const int scale = nx * 2 / s.nx;
            fine = run_pair(s, nx * 2, nz * 2, eps, s.boundary_cells * scale, z_min);
            const int margin = s.boundary_cells * nx / s.nx;
            rec.discretization_error = richardson_gap(coarse.transport, fine.transport, margin, z_min);
            nx *= 2;
            nz *= 2;
            if (rec.discretization_error <= s.refine_ratio * fine.error) {
                ok = true;
                break;
            }
            coarse = std::move(fine);
        }
        if (!ok) {
            warn("limit study: discretization error " + std::to_string(rec.discretization_error) +
                 " still above " + std::to_string(s.refine_ratio) + " e(eps) at eps = " + std::to_string(eps));
            fine = std::move(coarse);
        }
        accepted = &fine;
    }
    const Run& r = *accepted;
    rec.error = r.error;
    rec.nx = nx;
    rec.nz = nz;
    const double nu = r.problem.quadrature.measure();
    rec.condition_ii = check_condition_ii(r.problem.absorption, r.problem.phase, r.problem.sigma_s, nu,
                                          r.problem.initial_sup(), eps)
                           .pass;
    const int margin = s.boundary_cells * nx / s.nx;
    rec.min_density = window_min(r.transport, margin, z_min, 1.0 / nu);
    if (degenerate) {
        const auto ref = linear_diffusion_reference(matched_diffusion(r.problem), s.diffusion_options);
        rec.min_reference = window_min(ref.w, margin, z_min, 1.0);
    }
    return rec;
}

StudyResult run_study(const ConvergenceStudy& s, bool degenerate) {
    if (!s.factory) throw ValidationError("convergence study has no problem factory");
    if (s.epsilons.empty()) throw ValidationError("convergence study needs at least one epsilon");
    for (std::size_t i = 0; i < s.epsilons.size(); ++i) {
        const double e = s.epsilons[i];
        if (!(e > 0.0) || e > 1.0) throw ValidationError("epsilon values must lie in (0, 1]");
        if (i > 0 && !(e < s.epsilons[i - 1])) throw ValidationError("epsilon list must be strictly decreasing");
    }
    if (degenerate) {
        const TransportProblem probe = s.factory(s.nx, s.nz, s.epsilons.front());
        const auto d = matched_diffusion(probe);
        const double m = d.absorption_argument(probe.initial_sup());
        for (int iz = 0; iz <= probe.evolution.steps(); ++iz)
            for (std::size_t c = 0; c < probe.grid.cell_count(); ++c)
                if (!(sigma_a_eval(probe.absorption, iz, c, m) > 0.0))
                    throw ValidationError("degenerate study requires Sigma_a(||f||) > 0 everywhere; it vanishes at "
                                          "level " + std::to_string(iz) + ", cell " + std::to_string(c));
    }

    StudyResult res;
    res.records.resize(s.epsilons.size());
    std::vector<std::exception_ptr> errors(s.epsilons.size());
    const int workers = std::min<int>(worker_count(), static_cast<int>(s.epsilons.size()));
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
    for (int i = 0; i < static_cast<int>(s.epsilons.size()); ++i) {
        try {
            res.records[i] = study_one(s, s.epsilons[i], degenerate);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (const auto& r : res.records)
        if (!r.condition_ii) warn("condition (ii) fails at eps = " + std::to_string(r.epsilon));
    for (std::size_t i = 1; i < res.records.size(); ++i)
        if (res.records[i].error > 1.1 * res.records[i - 1].error) res.monotone = false;
    if (degenerate)
        for (const auto& r : res.records)
            if (r.min_density < r.min_reference - s.lower_bound_c * r.epsilon) res.lower_bound_ok = false;

    if (res.records.size() >= 3) {
        std::vector<double> x, y;
        for (const auto& r : res.records) {
            x.push_back(r.epsilon);
            y.push_back(r.error);
        }
        const auto [slope, resid] = fit_loglog(x, y);
        res.slope = slope;
        res.slope_residual = resid;
    } else {
        res.note = "insufficient points";
    }
    return res;
}

}  // namespace

double interior_error(const TransportProblem& problem, const DensityField& transport_density,
                      const DensityField& diffusion, int margin_cells, double z_min) {
    if (!(transport_density.grid() == diffusion.grid()) || transport_density.levels() != diffusion.levels())
        throw ValidationError("interior_error: fields live on different grids");
    const double inv_nu = 1.0 / problem.quadrature.measure();
    double e = 0.0;
    for (int iz = first_level(diffusion.evolution(), z_min); iz < diffusion.levels(); ++iz)
        for (std::size_t c = 0; c < diffusion.cell_count(); ++c)
            if (in_window(diffusion.grid(), c, margin_cells))
                e = std::max(e, std::abs(transport_density(iz, c) * inv_nu - diffusion(iz, c)));
    return e;
}

StudyResult run_convergence_study(const ConvergenceStudy& study) { return run_study(study, false); }

StudyResult run_degenerate_study(const ConvergenceStudy& study) { return run_study(study, true); }

std::pair<double, double> fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_loglog needs >= 2 paired points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("fit_loglog needs positive data");
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(y[i]) - (icpt + slope * std::log(x[i]));
        rss += r * r;
    }
    return {slope, std::sqrt(rss / n)};
}

CsvTable StudyResult::table() const {
    CsvTable t;
    t.header = {"epsilon", "error", "discretization_error", "nx", "nz", "min_density", "min_reference"};
    for (const auto& r : records)
        t.add({r.epsilon, r.error, r.discretization_error, static_cast<double>(r.nx), static_cast<double>(r.nz),
               r.min_density, r.min_reference});
    return t;
}

}  // namespace nlrte
