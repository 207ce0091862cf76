#include "nlrte/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "nlrte/error.hpp"

namespace nlrte {

void DiffusionProblem::validate() const {
    const int d = grid.dimension();
    if (A.rows() != d || A.cols() != d)
        throw ValidationError("diffusion matrix must be " + std::to_string(d) + "x" + std::to_string(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i != j && std::abs(A(i, j)) > 1e-12 * std::abs(A(i, i)))
                throw ValidationError("only diagonal diffusion matrices are supported");
            if (i == j && !(A(i, i) > 0.0)) throw ValidationError("diffusion matrix must be positive definite");
        }
    if (!(sigma_s > 0.0)) throw ValidationError("scattering coefficient must be positive");
    if (!(nu > 0.0)) throw ValidationError("angular measure must be positive");
    if (!(absorption.grid() == grid) || !(absorption.evolution() == evolution))
        throw ValidationError("absorption model is sampled on a different grid");
    absorption.validate();
    if (initial.size() != grid.cell_count()) throw ValidationError("initial condition does not match grid");
    for (double v : initial)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("initial condition must be finite and >= 0");
}

double DiffusionProblem::diffusivity(int axis) const { return A(axis, axis) / (nu * sigma_s); }

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Stiffness of -div(D grad) with cell-centered Dirichlet boundaries (ghost =
// -interior, i.e. the boundary face sits half a cell away).
SpMat stiffness(const DiffusionProblem& pb) {
    const auto& g = pb.grid;
    const int nx = g.cells(0);
    const int ny = g.dimension() == 2 ? g.cells(1) : 1;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(g.cell_count() * 5);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const auto c = static_cast<int>(g.index(ix, iy));
            double diag = 0.0;
            for (int axis = 0; axis < g.dimension(); ++axis) {
                const double k = pb.diffusivity(axis) / (g.width(axis) * g.width(axis));
                const int i = axis == 0 ? ix : iy;
                const int n = axis == 0 ? nx : ny;
                for (int s : {-1, 1}) {
                    const int j = i + s;
                    if (j < 0 || j >= n) {
                        diag += 2.0 * k;
                        continue;
                    }
                    const auto nb = static_cast<int>(axis == 0 ? g.index(j, iy) : g.index(ix, j));
                    t.emplace_back(c, nb, -k);
                    diag += k;
                }
            }
            t.emplace_back(c, c, diag);
        }
    SpMat m(static_cast<int>(g.cell_count()), static_cast<int>(g.cell_count()));
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

// sigma(iz, cell, w) supplies the absorption for the linear step.
template <class Sigma>
DiffusionSolution march(const DiffusionProblem& pb, const DiffusionOptions& opt, Sigma sigma_of, bool frozen) {
    pb.validate();
    const auto& g = pb.grid;
    const std::size_t n = g.cell_count();
    const double dz = pb.evolution.step();
    const SpMat K = stiffness(pb);

    DiffusionSolution sol;
    sol.w = DensityField(g, pb.evolution);
    std::copy(pb.initial.begin(), pb.initial.end(), sol.w.level(0).begin());

    Eigen::VectorXd prev = Eigen::Map<const Eigen::VectorXd>(pb.initial.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs(n), cur = prev;
    SpMat M = K;
    for (std::size_t c = 0; c < n; ++c) M.coeffRef(static_cast<int>(c), static_cast<int>(c)) += 1.0 / dz;
    M.makeCompressed();
    // Diagonal entries, so each inner iterate only rewrites the absorption.
    std::vector<double*> diag(n);
    for (std::size_t c = 0; c < n; ++c) diag[c] = &M.coeffRef(static_cast<int>(c), static_cast<int>(c));
    const Eigen::VectorXd base_diag = M.diagonal();
    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.analyzePattern(M);

    for (int step = 0; step < pb.evolution.steps(); ++step) {
        const int iz = step + 1;
        const double z = pb.evolution.level(iz);
        rhs = prev / dz;
        if (pb.source) {
            const int nx = g.cells(0);
            for (std::size_t c = 0; c < n; ++c) {
                const int ix = static_cast<int>(c % nx);
                const int iy = static_cast<int>(c / nx);
                const double y = g.dimension() == 2 ? g.center(1, iy) : 0.0;
                rhs[c] += pb.source(z, g.center(0, ix), y);
            }
        }
        std::vector<double> trace;
        bool done = false;
        for (int k = 1; k <= (frozen ? 1 : opt.max_picard); ++k) {
            for (std::size_t c = 0; c < n; ++c) *diag[c] = base_diag[c] + sigma_of(iz, c, cur[c]);
            ldlt.factorize(M);
            if (ldlt.info() != Eigen::Success)
                throw ValidationError("diffusion system is not positive definite at step " + std::to_string(iz));
            Eigen::VectorXd next = ldlt.solve(rhs);
            ++sol.linear_solves;
            const double scale = next.lpNorm<Eigen::Infinity>();
            const double change = (next - cur).lpNorm<Eigen::Infinity>();
            const double r = scale > 0.0 ? change / scale : change;
            trace.push_back(r);
            cur = std::move(next);
            sol.max_inner_picard = std::max(sol.max_inner_picard, k);
            if (frozen || r <= opt.tol_picard) {
                done = true;
                break;
            }
        }
        if (!done)
            throw ConvergenceError("diffusion inner Picard did not converge at step " + std::to_string(iz),
                                   std::move(trace));
        std::copy(cur.data(), cur.data() + n, sol.w.level(iz).begin());
        prev = cur;
    }
    return sol;
}

}  // namespace

DiffusionSolution solve_semilinear_diffusion(const DiffusionProblem& problem, const DiffusionOptions& options) {
    auto sigma = [&](int iz, std::size_t c, double w) {
        return sigma_a_eval(problem.absorption, iz, c, problem.absorption_argument(std::max(w, 0.0)));
    };
    return march(problem, options, sigma, false);
}

DiffusionSolution linear_diffusion_reference(const DiffusionProblem& problem, const DiffusionOptions& options,
                                             std::optional<double> m_freeze) {
    const double m = m_freeze ? *m_freeze : problem.absorption_argument(max_abs(problem.initial));
    if (!(m >= 0.0)) throw ValidationError("freeze value must be non-negative");
    auto sigma = [&](int iz, std::size_t c, double) { return sigma_a_eval(problem.absorption, iz, c, m); };
    return march(problem, options, sigma, true);
}

double boundary_outflow(const DiffusionProblem& problem, std::span<const double> w) {
    const auto& g = problem.grid;
    if (w.size() != g.cell_count()) throw ValidationError("boundary_outflow: level does not match grid");
    const int nx = g.cells(0);
    const int ny = g.dimension() == 2 ? g.cells(1) : 1;
    double flux = 0.0;
    for (int axis = 0; axis < g.dimension(); ++axis) {
        const double face = g.volume() / g.width(axis);  // boundary face measure of one cell
        const double k = 2.0 * problem.diffusivity(axis) / g.width(axis);
        const int n = axis == 0 ? nx : ny;
        const int m = axis == 0 ? ny : nx;
        for (int t = 0; t < m; ++t) {
            const std::size_t lo = axis == 0 ? g.index(0, t) : g.index(t, 0);
            const std::size_t hi = axis == 0 ? g.index(n - 1, t) : g.index(t, n - 1);
            flux += face * k * (w[lo] + w[hi]);
        }
    }
    return flux;
}

}  // namespace nlrte
